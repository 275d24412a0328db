"""scikit-learn style wrappers around the functional API.

Cluster labels are ``1..k`` everywhere in this package, including the
``labels_`` attribute and the output of ``predict``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import baselines, cluster
from .data import check_labels, nng_init, random_init
from .ramp import HyperParams
from .solver import SolverOptions


def _initial_labels(init, X, k, random_state):
    if isinstance(init, str):
        if init == "nng":
            return nng_init(X, k, random_state)
        if init == "random":
            return random_init(X, k, random_state)
        raise ValueError(f"init must be 'nng', 'random' or an array of labels, got {init!r}")
    return check_labels(init, m=X.shape[0], k=k)


class _PlaneEstimator(ClusterMixin, TransformerMixin, BaseEstimator):

    def _store(self, model):
        self.model_ = model
        self.labels_ = np.asarray(model.training_meta["final_labels"])
        self.n_iter_ = model.training_meta["outer_iterations"]
        self.objective_ = model.training_meta["objective"]
        self.n_features_in_ = self._n_features
        return self

    def predict(self, X):
        """Label ``1..k`` of the nearest plane for each row of ``X``."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return cluster.assign(self.model_, X)

    def transform(self, X):
        """Absolute deviation of each row from each cluster center, shape (m, k)."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return np.abs(self.model_.deviations(X))

    @property
    def coef_(self):
        check_is_fitted(self, "model_")
        return np.vstack([p.w for p in self.model_.planes])

    @property
    def intercept_(self):
        check_is_fitted(self, "model_")
        return np.array([p.b for p in self.model_.planes])


class RampTWSVC(_PlaneEstimator):
    """Plane-based clustering with bounded ramp costs.

    Parameters
    ----------
    n_clusters : int
    c1, c2 : float
        Weights of the within-cluster and between-cluster costs.
    delta, s : float
        Ramp shape parameters, ``0 <= delta < 1`` and ``-1 < s <= 0``.
    kernel : {'linear', 'rbf'}
        ``'rbf'`` fits cluster centers in the kernel-generated space with
        ``K(a, b) = exp(-mu |a - b|^2)``.
    mu : float
    init : {'nng', 'random'} or array of shape (m,)
        With ``kernel='rbf'`` the graph is built on the rows of the Gram
        matrix, the representation the kernel planes act on.
    random_state : int
    outer_max : int
    max_iter, tol, smoothing : solver controls, see :class:`SolverOptions`.

    Attributes
    ----------
    model_ : PlaneModel or KernelModel
    labels_ : ndarray of shape (m,)
    n_iter_ : int
        Outer plane/label rounds.
    objective_ : float
    """

    def __init__(self, n_clusters=2, *, c1=1.0, c2=1.0, delta=0.3, s=-0.2,
                 kernel="linear", mu=1.0, init="nng", random_state=0, outer_max=50,
                 max_iter=200, tol=1e-8, smoothing=1e-6):
        self.n_clusters = n_clusters
        self.c1 = c1
        self.c2 = c2
        self.delta = delta
        self.s = s
        self.kernel = kernel
        self.mu = mu
        self.init = init
        self.random_state = random_state
        self.outer_max = outer_max
        self.max_iter = max_iter
        self.tol = tol
        self.smoothing = smoothing

    def fit(self, X, y=None):
        X = check_array(X)
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"kernel must be 'linear' or 'rbf', got {self.kernel!r}")
        hp = HyperParams(c1=self.c1, c2=self.c2, delta=self.delta, s=self.s, mu=self.mu)
        opts = SolverOptions(max_iter=self.max_iter, subproblem_tol=self.tol,
                             smoothing=self.smoothing)
        mode = "linear" if self.kernel == "linear" else "kernel"
        G = cluster.gram(X, X, self.mu) if mode == "kernel" else None
        init = _initial_labels(self.init, X if G is None else G, self.n_clusters,
                               self.random_state)
        self._n_features = X.shape[1]
        return self._store(cluster.fit(X, self.n_clusters, hp, mode, init, opts,
                                       self.outer_max, gram_matrix=G))


class KPlaneClustering(_PlaneEstimator):
    """k-plane clustering: least-squares planes with ``|w| = 1``."""

    def __init__(self, n_clusters=2, *, init="nng", random_state=0, outer_max=50):
        self.n_clusters = n_clusters
        self.init = init
        self.random_state = random_state
        self.outer_max = outer_max

    def fit(self, X, y=None):
        X = check_array(X)
        init = _initial_labels(self.init, X, self.n_clusters, self.random_state)
        self._n_features = X.shape[1]
        return self._store(baselines.kpc_fit(X, self.n_clusters, init, self.outer_max))


class ProximalPlaneClustering(_PlaneEstimator):
    """Proximal plane clustering with trade-off ``c`` between the two fit terms."""

    def __init__(self, n_clusters=2, *, c=1.0, init="nng", random_state=0, outer_max=50):
        self.n_clusters = n_clusters
        self.c = c
        self.init = init
        self.random_state = random_state
        self.outer_max = outer_max

    def fit(self, X, y=None):
        X = check_array(X)
        init = _initial_labels(self.init, X, self.n_clusters, self.random_state)
        self._n_features = X.shape[1]
        return self._store(baselines.ppc_fit(X, self.n_clusters, self.c, init,
                                             self.outer_max))


class LloydKMeans(ClusterMixin, TransformerMixin, BaseEstimator):
    """Lloyd k-means started from a seeded random labeling."""

    def __init__(self, n_clusters=2, *, random_state=0, outer_max=100):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.outer_max = outer_max

    def fit(self, X, y=None):
        X = check_array(X)
        model = baselines.kmeans_fit(X, self.n_clusters, self.random_state, self.outer_max)
        self.model_ = model
        self.cluster_centers_ = model.centers
        self.labels_ = model.training_meta["final_labels"]
        self.n_iter_ = model.training_meta["outer_iterations"]
        self.inertia_ = model.training_meta["objective"]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return cluster.assign(self.model_, check_array(X))

    def transform(self, X):
        """Euclidean distance of each row to each center."""
        check_is_fitted(self, "model_")
        return self.model_.deviations(check_array(X))
