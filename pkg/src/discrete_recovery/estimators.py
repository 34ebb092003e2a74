"""scikit-learn style wrappers around the iterative recovery models.

Each estimator runs the model's own initializer (or user-supplied initial
labels via ``init``) followed by the alternating iteration, and exposes
``labels_``, ``trace_``, ``n_iter_`` and ``converged_`` after ``fit``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import IterationConfig, run_iterations
from .exceptions import ContractViolation
from .gmm import GmmModel, gmm_assign_all, gmm_spectral_init
from .groupsync import PermModel, Z2Model, ZkModel, perm_init, z2_init, zk_init
from .mra import MraModel, mra_init, unshift
from .numerics import Rng
from .ranking import RankingModel, rank_init
from .signrec import SignModel, sqrt_slope_init


class _IterativeMixin:

    def _iterate(self, model, default_init):
        if isinstance(self.init, str):
            if self.init != "default":
                raise ContractViolation(f"init must be 'default' or an array, got {self.init!r}")
            z0 = default_init()
        else:
            z0 = np.asarray(self.init)
        cfg = IterationConfig(self.t_max, self.halt_on_fixed_point)
        self.trace_ = run_iterations(model, z0, cfg)
        self.labels_ = self.trace_.labels
        self.block_ = self.trace_.final_block
        self.n_iter_ = self.trace_.iterations_run
        self.converged_ = self.trace_.converged
        return self.block_


def _square(Y, name="Y"):
    Y = check_array(Y)
    if Y.shape[0] != Y.shape[1]:
        raise ValueError(f"{name} must be square, got shape {Y.shape}")
    return Y


class LloydClustering(_IterativeMixin, ClusterMixin, TransformerMixin, BaseEstimator):
    """Lloyd's algorithm started from a spectral + k-means++ clustering.

    Samples are rows of ``X``, as usual in scikit-learn.
    """

    def __init__(self, n_clusters=2, kmeans_restarts=5, init="default", t_max=None,
                 halt_on_fixed_point=True, random_state=0):
        self.n_clusters = n_clusters
        self.kmeans_restarts = kmeans_restarts
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        Y = X.T
        model = GmmModel(Y, self.n_clusters)
        rng = Rng(self.random_state)
        centers = self._iterate(
            model, lambda: gmm_spectral_init(Y, self.n_clusters, rng, self.kmeans_restarts))
        self.cluster_centers_ = centers.T
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return gmm_assign_all(check_array(X).T, self.cluster_centers_.T)

    def transform(self, X):
        """Euclidean distance of each row to each center."""
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X)
        diff = X[:, None, :] - self.cluster_centers_[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))


class FeatureMatchingRanker(_IterativeMixin, BaseEstimator):
    """Approximate ranks from a ``p x p`` matrix of pairwise comparisons.

    ``Y[i, j]`` is a noisy measurement of ``beta (z_i - z_j)``.
    """

    def __init__(self, init="default", t_max=None, halt_on_fixed_point=True):
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point

    def fit(self, Y, y=None):
        model = RankingModel(_square(Y))
        self.beta_ = self._iterate(model, lambda: rank_init(model.T))
        self.ranks_ = self.labels_
        return self

    def fit_predict(self, Y, y=None):
        return self.fit(Y).ranks_


class IterativeSignRecovery(_IterativeMixin, RegressorMixin, BaseEstimator):
    """Signs of a sparse regression vector with known ``lam`` and ``s``.

    Starts from thresholded square-root SLOPE, then alternates restricted
    least squares with coordinatewise thresholding.
    """

    def __init__(self, lam=1.0, s=1, penalty_A=1.5, init="default", t_max=None,
                 halt_on_fixed_point=True):
        self.lam = lam
        self.s = s
        self.penalty_A = penalty_A
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        model = SignModel(X, y, self.lam, self.s)
        self._iterate(model, lambda: sqrt_slope_init(X, y, self.lam, self.penalty_A))
        self.signs_ = self.labels_
        # coefficients refitted on the final support
        self.coef_ = model.fit_block(self.signs_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_array(X) @ self.coef_


class MultireferenceAligner(_IterativeMixin, TransformerMixin, BaseEstimator):
    """Cyclic shifts and common signal from shifted noisy copies.

    Each row of ``X`` is one observation of length ``d``.
    """

    def __init__(self, init="default", t_max=None, halt_on_fixed_point=True):
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point

    def fit(self, X, y=None):
        Y = check_array(X).T
        model = MraModel(Y)
        self.signal_ = self._iterate(model, lambda: mra_init(Y))
        self.shifts_ = self.labels_
        return self

    def transform(self, X):
        """Undo the fitted shifts row by row (rows must match the fitted data)."""
        check_is_fitted(self, "shifts_")
        X = check_array(X)
        if X.shape[0] != self.shifts_.size:
            raise ValueError("transform expects the rows that were fitted")
        return np.stack([unshift(t, row) for t, row in zip(self.shifts_, X)])


class Z2Synchronizer(_IterativeMixin, BaseEstimator):
    """Signs ``z`` from a symmetric ``p x p`` matrix ``lam z z^T + noise``."""

    def __init__(self, init="default", t_max=None, halt_on_fixed_point=True):
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point

    def fit(self, Y, y=None):
        Y = _square(Y)
        self.scale_ = self._iterate(Z2Model(Y), lambda: z2_init(Y))[0]
        return self

    def fit_predict(self, Y, y=None):
        return self.fit(Y).labels_


class ZkSynchronizer(_IterativeMixin, BaseEstimator):
    """Group elements mod ``k`` from ``Y[i, j] ~ lam ((z_i - z_j) mod k) + noise``."""

    def __init__(self, k=2, init="default", t_max=None, halt_on_fixed_point=True,
                 random_state=0):
        self.k = k
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point
        self.random_state = random_state

    def fit(self, Y, y=None):
        Y = _square(Y)
        rng = Rng(self.random_state)
        self.scale_ = self._iterate(ZkModel(Y, self.k), lambda: zk_init(Y, self.k, rng))[0]
        return self

    def fit_predict(self, Y, y=None):
        return self.fit(Y).labels_


class PermutationSynchronizer(_IterativeMixin, BaseEstimator):
    """Permutations of ``d`` items from a ``pd x pd`` block matrix.

    ``labels_`` has shape ``(p, d)``; row ``j`` is ``sigma_j`` with
    ``Z_j[sigma_j[c], c] = 1``.
    """

    def __init__(self, d=2, init="default", t_max=None, halt_on_fixed_point=True):
        self.d = d
        self.init = init
        self.t_max = t_max
        self.halt_on_fixed_point = halt_on_fixed_point

    def fit(self, Y, y=None):
        Y = _square(Y)
        model = PermModel(Y, self.d)
        self.scale_ = self._iterate(model, lambda: perm_init(Y, model.p, self.d))[0]
        return self

    def fit_predict(self, Y, y=None):
        return self.fit(Y).labels_
