import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_split, two_circles, two_lines
from planeclust import cluster
from planeclust.baselines import CentroidModel
from planeclust.cluster import (KernelModel, PlaneModel, assign, fit, gram, initial_plane,
                                load_model, predict, save_model, scale_plane)
from planeclust.data import Dataset, nng_init, standardize
from planeclust.metrics import nmi, rand_accuracy
from planeclust.ramp import HyperParams, Plane, plane_objective


class TestGram:
    def test_diagonal_is_one(self, rng):
        X = rng.normal(size=(6, 3))
        np.testing.assert_allclose(np.diag(gram(X, X, 0.7)), 1.0)

    def test_small_mu_limit(self, rng):
        X = rng.random((10, 4))
        assert np.all(np.abs(gram(X, X, 1e-12) - 1) <= 1e-6)

    def test_scalar_value(self):
        assert gram([[0.0]], [[1.0]], 1.0)[0, 0] == pytest.approx(0.36787944117144233, abs=1e-15)

    def test_symmetric_psd(self, rng):
        X = rng.normal(size=(12, 2))
        K = gram(X, X, 0.5)
        np.testing.assert_allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-10

    def test_linear_kernel(self, rng):
        A, B = rng.normal(size=(3, 2)), rng.normal(size=(4, 2))
        np.testing.assert_allclose(gram(A, B, 1.0, "linear"), A @ B.T)

    def test_errors(self):
        with pytest.raises(ValueError):
            gram(np.ones((2, 2)), np.ones((2, 3)), 1.0)
        with pytest.raises(ValueError):
            gram(np.ones((2, 2)), np.ones((2, 2)), 0.0)
        with pytest.raises(ValueError):
            gram(np.ones((2, 2)), np.ones((2, 2)), 1.0, "poly")


class TestAssign:
    planes = [Plane(np.array([1.0, 0.0]), 0.0), Plane(np.array([0.0, 1.0]), -1.0)]

    def test_smaller_deviation_wins(self):
        assert assign(PlaneModel(self.planes, 2), [[0.2, 0.9]]).tolist() == [2]

    def test_tie_goes_to_first(self):
        assert assign(PlaneModel(self.planes, 2), [[0.5, 0.5]]).tolist() == [1]

    def test_single_plane(self, rng):
        model = PlaneModel(self.planes[:1], 1)
        assert set(assign(model, rng.normal(size=(7, 2)))) == {1}

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            assign(PlaneModel(self.planes, 2), np.ones((2, 3)))


class TestFit:
    def test_two_lines(self):
        X, y = two_lines()
        d = standardize(Dataset(X, y), "minmax")
        model = fit(d, 2, HyperParams(), "linear", nng_init(d, 2, 0))
        labels = model.training_meta["final_labels"]
        assert rand_accuracy(y, labels) == 100.0 and nmi(y, labels) == pytest.approx(100.0)

    def test_single_cluster(self, rng):
        X = rng.normal(size=(12, 3))
        model = fit(X, 1, HyperParams(), "linear", np.ones(12, dtype=int))
        assert model.training_meta["outer_iterations"] == 1
        assert model.training_meta["stop_reason"] == "converged"
        assert len(model.planes) == 1

    @pytest.mark.parametrize("mode", ["linear", "kernel"])
    def test_predict_matches_stored_labels(self, rng, mode):
        X = rng.random((30, 2))
        model = fit(X, 3, HyperParams(mu=2.0), mode, nng_init(X, 3, 0))
        np.testing.assert_array_equal(predict(model, X), model.training_meta["final_labels"])

    def test_sample_on_first_plane(self):
        X, y = two_lines()
        model = fit(X, 2, HyperParams(), "linear", y)
        first = int(np.flatnonzero(model.training_meta["final_labels"] == 1)[0])
        assert predict(model, X[first:first + 1]).tolist() == [1]

    def test_kernel_gram_row_identity(self, rng):
        X = rng.random((25, 3))
        model = fit(X, 2, HyperParams(mu=0.5), "kernel", nng_init(X, 2, 0))
        G = gram(X, X, 0.5)
        U = np.column_stack([p.u for p in model.planes])
        train_dev = np.column_stack([G, np.ones(25)]) @ U
        for j in (0, 7, 24):
            np.testing.assert_allclose(model.deviations(X[j:j + 1])[0], train_dev[j],
                                       rtol=0, atol=1e-12)

    def test_kernel_uses_precomputed_gram(self, rng):
        X = rng.random((20, 2))
        init = nng_init(X, 2, 0)
        a = fit(X, 2, HyperParams(mu=1.0), "kernel", init)
        b = fit(X, 2, HyperParams(mu=1.0), "kernel", init, gram_matrix=gram(X, X, 1.0))
        np.testing.assert_array_equal(a.training_meta["final_labels"], b.training_meta["final_labels"])

    def test_terminates_within_outer_max(self, rng):
        for _ in range(5):
            X = rng.random((40, 2))
            model = fit(X, 4, HyperParams(c1=8, c2=0.25), "linear", nng_init(X, 4, 1), outer_max=3)
            assert model.training_meta["outer_iterations"] <= 3
            assert set(model.training_meta["fit_labels"]) == {1, 2, 3, 4}

    def test_errors(self, rng):
        X = rng.random((5, 2))
        with pytest.raises(ValueError):
            fit(X, 6, HyperParams(), "linear", np.ones(5, dtype=int))
        with pytest.raises(ValueError):
            fit(X, 2, HyperParams(), "cubic", nng_init(X, 2, 0))
        with pytest.raises(ValueError):
            fit(X, 2, HyperParams(), "linear", None)
        with pytest.raises(ValueError):
            fit(X, 2, HyperParams(), "kernel", nng_init(X, 2, 0), gram_matrix=np.eye(4))

    def test_on_solve_callback(self, rng):
        X = rng.random((20, 2))
        seen = []
        model = fit(X, 2, HyperParams(), "linear", nng_init(X, 2, 0),
                    on_solve=lambda r, i, state: seen.append((r, i)))
        rounds = model.training_meta["outer_iterations"]
        assert seen[:2] == [(1, 1), (1, 2)] and seen[-1][0] == rounds


class TestSyntheticSeparability:
    def test_circles_need_the_kernel(self):
        X, y = two_circles()
        d = standardize(Dataset(X, y), "minmax")
        init = nng_init(d, 2, 0)
        linear_best = max(rand_accuracy(y, fit(d, 2, HyperParams(c1=c1, c2=c2), "linear", init)
                                        .training_meta["final_labels"])
                          for c1 in (0.25, 1.0, 4.0) for c2 in (0.25, 1.0, 4.0))
        assert linear_best < 70
        kernel_best = 0.0
        for mu in 2.0 ** np.arange(-2, 6):
            G = gram(d.samples, d.samples, mu)
            labels = fit(d, 2, HyperParams(mu=mu), "kernel", nng_init(G, 2, 0),
                         gram_matrix=G).training_meta["final_labels"]
            kernel_best = max(kernel_best, rand_accuracy(y, labels))
        assert kernel_best == 100.0


def test_linear_kernel_reproduces_linear_deviations(rng):
    # with K = X X', coefficients w = X alpha give K(x, X) w = x' (X' ... ) = x' v for v = X' w
    X = rng.normal(size=(5, 2))
    v, b = np.array([0.7, -1.3]), 0.4
    alpha = np.linalg.lstsq(X.T, v, rcond=None)[0]
    linear = PlaneModel([Plane(v, b)], 1)
    kern = KernelModel([Plane(alpha, b)], 1, support=X, kernel="linear")
    np.testing.assert_allclose(kern.deviations(X), linear.deviations(X), atol=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((24, 2))
    truth = rng.integers(1, 4, 24)
    init = nng_init(X, 3, 0)
    perm = rng.permutation(24)
    hp = HyperParams(c1=2.0, c2=0.5)
    a = fit(X, 3, hp, "linear", init)
    b = fit(X[perm], 3, hp, "linear", init[perm])
    la, lb = a.training_meta["final_labels"], b.training_meta["final_labels"]
    np.testing.assert_array_equal(la[perm], lb)
    for pa, pb in zip(a.planes, b.planes):
        np.testing.assert_allclose(pa.u, pb.u, rtol=1e-6, atol=1e-8)
    assert rand_accuracy(truth[perm], lb) == pytest.approx(rand_accuracy(truth, la), abs=1e-12)


class TestInitialPlane:
    def test_scale_plane_is_best_multiple(self, rng):
        for _ in range(20):
            sp, hp = random_split(rng, 20, 3)
            u = rng.normal(size=sp.dim)
            plane, value = scale_plane(u, sp, hp)
            assert value == pytest.approx(plane_objective(plane, sp, hp), rel=1e-12, abs=1e-12)
            grid = [plane_objective(t * u, sp, hp) for t in np.linspace(0, 20, 2001)]
            assert value <= min(grid) + 1e-12

    def test_initial_plane_not_worse_than_origin(self, rng):
        for _ in range(20):
            sp, hp = random_split(rng, 20, 3)
            p = initial_plane(sp, hp)
            assert plane_objective(p, sp, hp) <= plane_objective(np.zeros(sp.dim), sp, hp) + 1e-12


class TestSerialization:
    def test_linear_round_trip(self, rng):
        X = rng.random((15, 3))
        model = fit(X, 2, HyperParams(), "linear", nng_init(X, 2, 0))
        text = save_model(model, None)
        assert text.splitlines()[0] == "planeclust-model v1 mode=linear k=2 n=3"
        back = load_model(io.StringIO(text))
        for p, q in zip(model.planes, back.planes):
            np.testing.assert_array_equal(p.u, q.u)
        np.testing.assert_array_equal(predict(back, X), predict(model, X))

    def test_kernel_round_trip(self, rng, tmp_path):
        X = rng.random((12, 2))
        model = fit(X, 2, HyperParams(mu=0.3), "kernel", nng_init(X, 2, 0))
        path = tmp_path / "model.txt"
        save_model(model, path)
        head = path.read_text().splitlines()[0]
        assert head == "planeclust-model v1 mode=kernel k=2 n=2 m=12 mu=0.29999999999999999"
        back = load_model(path)
        assert isinstance(back, KernelModel) and back.mu == 0.3
        np.testing.assert_array_equal(back.support, X)
        np.testing.assert_array_equal(predict(back, X), predict(model, X))

    def test_centroid_round_trip(self):
        model = CentroidModel(np.array([[0.1, 0.2], [1 / 3, 7.0]]), 2, {})
        back = load_model(io.StringIO(save_model(model, None)))
        np.testing.assert_array_equal(back.centers, model.centers)

    def test_rejects_foreign_file(self):
        with pytest.raises(ValueError):
            load_model(io.StringIO("something else\n"))
        with pytest.raises(ValueError):
            load_model(io.StringIO(""))
