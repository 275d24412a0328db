import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import two_lines
from planeclust.baselines import (PPC_RIDGE, fix_sign, kmeans_fit, kmeans_objective, kpc_fit,
                                  kpc_objective, kpc_plane, ppc_fit, ppc_matrix, ppc_objective,
                                  ppc_plane)
from planeclust.data import nng_init, split_cluster
from planeclust.metrics import rand_accuracy
from planeclust.ramp import Plane


def within_only(X):
    return split_cluster(np.asarray(X, dtype=float), np.ones(len(X), dtype=int), 1)


class TestKpcPlane:
    def test_horizontal_line(self):
        p = kpc_plane(within_only([[0, 2], [1, 2], [3, 2]]))
        np.testing.assert_allclose(p.w, [0, 1], atol=1e-12)
        assert p.b == pytest.approx(-2)

    def test_diagonal_line(self):
        p = kpc_plane(within_only([[0, 1], [1, 0], [0.25, 0.75]]))
        np.testing.assert_allclose(p.w, [2 ** -0.5, 2 ** -0.5], atol=1e-12)
        assert p.b == pytest.approx(-(2 ** -0.5))

    def test_single_point(self):
        p = kpc_plane(within_only([[0.3, -1.0]]))
        np.testing.assert_allclose(p.w, [1, 0])
        assert p.w @ [0.3, -1.0] + p.b == pytest.approx(0.0)

    @settings(max_examples=30)
    @given(st.integers(0, 2**31 - 1))
    def test_unit_normal_and_global_minimum(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(int(rng.integers(2, 15)), int(rng.integers(1, 5))))
        sp = within_only(X)
        p = kpc_plane(sp)
        assert abs(np.linalg.norm(p.w) - 1) <= 1e-10
        best = kpc_objective(sp, p)
        W = rng.normal(size=(1000, X.shape[1]))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        for w in W:
            probe = Plane(w, -w @ X.mean(axis=0))
            assert best <= kpc_objective(sp, probe) + 1e-10

    def test_needs_a_sample(self):
        with pytest.raises(ValueError):
            kpc_plane(split_cluster(np.ones((3, 2)), [2, 2, 2], 1))


class TestPpcPlane:
    @settings(max_examples=30)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([2.0 ** -8, 0.5, 1.0, 16.0, 128.0]))
    def test_eigen_residual(self, seed, c):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(int(rng.integers(3, 20)), int(rng.integers(1, 5))))
        y = rng.integers(1, 3, X.shape[0])
        y[:2] = [1, 2]
        sp = split_cluster(X, y, 1)
        v = ppc_plane(sp, c).u
        M = ppc_matrix(sp, c)
        lam = np.linalg.eigvalsh(M)[0]
        assert abs(np.linalg.norm(v) - 1) <= 1e-12
        assert np.linalg.norm(M @ v - lam * v) <= 1e-8 * max(1.0, np.abs(M).max())

    def test_small_c_fits_planar_cluster(self):
        X = np.array([[0, 1.0], [1, 1.0], [2, 1.0], [5, 5.0], [6, 7.0]])
        sp = split_cluster(X, [1, 1, 1, 2, 2], 1)
        p = ppc_plane(sp, 1e-6)
        assert np.abs(sp.Z.T @ p.u).max() <= 1e-3

    def test_lines_beat_candidate_grid(self):
        X, y = two_lines(10, 5.0)
        sp = split_cluster(X / 9, y, 1)
        p = ppc_plane(sp, 1.0)
        best = ppc_objective(sp, p, 1.0)
        for a in np.linspace(0, 2 * np.pi, 73):
            for b in np.linspace(-2, 2, 41):
                u = np.array([np.cos(a), np.sin(a), b])
                assert best <= ppc_objective(sp, Plane.from_u(u / np.linalg.norm(u)), 1.0) + 1e-12
        # at c=1 the between term tilts the plane; a small c keeps it on y=0
        q = ppc_plane(sp, 2.0 ** -8)
        assert abs(q.w[0]) < 1e-4 and np.abs(sp.Z.T @ q.u).max() < 1e-2

    def test_swapped_roles_large_c(self, rng):
        X = rng.normal(size=(20, 3))
        y = np.repeat([1, 2], 10)
        sp = split_cluster(X, y, 2)
        big, small = ppc_plane(sp, 64.0), ppc_plane(sp, 2.0 ** -8)
        assert ppc_objective(sp, big, 64.0) <= ppc_objective(sp, small, 64.0) + 1e-12

    def test_ridge_and_sign(self):
        assert PPC_RIDGE == 1e-8
        np.testing.assert_array_equal(fix_sign(np.array([0.2, -0.9, 0.9])), [-0.2, 0.9, -0.9])

    def test_rejects_nonpositive_c(self):
        with pytest.raises(ValueError):
            ppc_plane(within_only([[1.0, 2.0]]), 0.0)


class TestPlaneFits:
    def test_kpc_two_lines(self):
        X, y = two_lines()
        model = kpc_fit(X, 2, nng_init(X, 2, 0))
        assert rand_accuracy(y, model.training_meta["final_labels"]) == 100.0
        assert model.mode == "kpc"

    def test_kpc_single_cluster(self, rng):
        model = kpc_fit(rng.normal(size=(9, 2)), 1, np.ones(9, dtype=int))
        assert model.training_meta["outer_iterations"] == 1

    def test_ppc_two_lines(self):
        X, y = two_lines()
        model = ppc_fit(X, 2, 1.0, y)
        assert rand_accuracy(y, model.training_meta["final_labels"]) == 100.0


class TestKmeans:
    def test_two_points(self):
        model = kmeans_fit(np.array([[0.0, 1.0], [4.0, 2.0]]), 2, seed=3)
        np.testing.assert_array_equal(np.sort(model.centers, axis=0), [[0, 1], [4, 2]])

    def test_square_single_center(self):
        model = kmeans_fit(np.array([[0, 0], [0, 1], [1, 0], [1, 1.0]]), 1)
        np.testing.assert_allclose(model.centers, [[0.5, 0.5]])

    @pytest.mark.parametrize("seed", range(5))
    def test_separated_blobs(self, seed):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(0, 0.3, (15, 2)), rng.normal(10, 0.3, (15, 2))])
        y = np.repeat([1, 2], 15)
        model = kmeans_fit(X, 2, seed)
        assert rand_accuracy(y, model.training_meta["final_labels"]) == 100.0

    @settings(max_examples=30)
    @given(st.integers(0, 2**31 - 1))
    def test_objective_non_increasing(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(int(rng.integers(5, 40)), 2))
        model = kmeans_fit(X, int(rng.integers(1, 5)), seed)
        assert np.all(np.diff(model.training_meta["objective_trace"]) <= 1e-9)
        labels = model.training_meta["final_labels"]
        assert model.training_meta["objective"] == pytest.approx(
            kmeans_objective(X, labels, model.centers))

    def test_seed_determinism(self, rng):
        X = rng.normal(size=(30, 2))
        a, b = kmeans_fit(X, 3, 11), kmeans_fit(X, 3, 11)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((2, 2)), 3)
