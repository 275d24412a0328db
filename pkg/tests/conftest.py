import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_lines(points_per_line=10, gap=5.0):
    """Samples on y=0 and y=gap with x = 0..points_per_line-1, labels 1 and 2."""
    x = np.arange(points_per_line, dtype=float)
    X = np.vstack([np.column_stack([x, np.zeros_like(x)]),
                   np.column_stack([x, np.full_like(x, gap)])])
    y = np.repeat([1, 2], points_per_line)
    return X, y


def two_circles(n_per_circle=20, radii=(1.0, 3.0)):
    t = 2 * np.pi * np.arange(n_per_circle) / n_per_circle
    X = np.vstack([np.column_stack([r * np.cos(t), r * np.sin(t)]) for r in radii])
    y = np.repeat([1, 2], n_per_circle)
    return X, y


def random_split(rng, m_max, n_max, c_powers=(-3, 3)):
    """Random cluster split and hyperparameters for solver tests.

    Samples lie in the unit cube (as after minmax scaling); cluster 1 is the
    within-cluster side and is never empty.
    """
    from planeclust.data import split_cluster
    from planeclust.ramp import HyperParams

    m = int(rng.integers(2, m_max + 1))
    n = int(rng.integers(1, n_max + 1))
    X = rng.random((m, n))
    y = rng.integers(1, 3, m)
    y[0] = 1
    lo, hi = c_powers
    hp = HyperParams(c1=2.0 ** int(rng.integers(lo, hi + 1)),
                     c2=2.0 ** int(rng.integers(lo, hi + 1)),
                     delta=float(rng.uniform(0, 0.9)), s=float(rng.uniform(-0.9, 0)))
    return split_cluster(X, y, 1), hp


# -- acceptance summary ----------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = _criterion_of(report)
    if number is None:
        return
    ok = report.passed and not hasattr(report, "wasxfail")
    measured = dict(report.user_properties).get("measured", "")
    _CRITERIA[number] = (ok, measured or ("" if ok else "see traceback"))


def _criterion_of(report):
    for name, value in report.user_properties:
        if name == "criterion":
            return value
    return None


def pytest_itemcollected(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", mark.args[0]))
        item.user_properties.append(("title", mark.args[1]))
        _TITLES[mark.args[0]] = mark.args[1]


_TITLES = {}


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {_TITLES.get(number, '')}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
