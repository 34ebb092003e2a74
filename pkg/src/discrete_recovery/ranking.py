"""Approximate ranking from pairwise comparisons.

``Y[i, j] ~ N(beta * (z_i - z_j), 1)`` for ``i != j``; both orientations are
observed independently and the diagonal is ignored. Ranks are integers in
``1..p`` and need not form a permutation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import GroundTruth, RecoveryModel
from .exceptions import ContractViolation, DegenerateLabelsError
from .numerics import Rng

BETA_SCAN_EPS = 1e-12


def _check_square(Y):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ContractViolation(f"Y must be square, got shape {Y.shape}")
    return Y


def rank_statistics(Y):
    """Contrast statistics ``T_j`` for every ``j`` at once."""
    Y = _check_square(Y)
    p = Y.shape[0]
    if p < 2:
        return np.zeros(p)
    off = Y - np.diag(np.diag(Y))
    return (off.sum(axis=1) - off.sum(axis=0)) / math.sqrt(2.0 * (p - 1))


def rank_statistic(Y, j):
    """``T_j = sum_{i != j} (Y[j, i] - Y[i, j]) / sqrt(2 (p - 1))``."""
    Y = _check_square(Y)
    p = Y.shape[0]
    mask = np.arange(p) != j
    return float(np.sum(Y[j, mask] - Y[mask, j]) / math.sqrt(2.0 * (p - 1)))


def rank_fit_beta(Y, labels):
    """Least-squares slope of ``Y[i, j]`` on ``z_i - z_j`` over ``i != j``."""
    Y = _check_square(Y)
    z = np.asarray(labels, dtype=float)
    D = z[:, None] - z[None, :]
    den = np.sum(D * D)
    if den == 0.0:
        raise DegenerateLabelsError("all rank labels are equal; slope is undefined")
    np.fill_diagonal(D, 0.0)
    return float(np.sum(D * Y) / den)


def _scan(c, beta, p):
    a = np.arange(1, p + 1)
    obj = (c[:, None] - 2.0 * p * beta * (a[None, :] - (p + 1) / 2.0)) ** 2
    return a[np.argmin(obj, axis=1)]


def rank_assign_all(T, beta, p=None):
    """Vectorized :func:`rank_assign`."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    p = T.size if p is None else int(p)
    c = math.sqrt(2.0 * (p - 1)) * T
    if abs(beta) < BETA_SCAN_EPS:
        return _scan(c, beta, p)
    # the objective is (2 p beta)^2 (a - x)^2, so the nearest integer wins;
    # ceil(x - 1/2) sends exact halves to the smaller rank
    x = c / (2.0 * p * beta) + (p + 1) / 2.0
    return np.clip(np.ceil(x - 0.5), 1, p).astype(np.int64)


def rank_assign(T_j, beta, p):
    """Rank in ``1..p`` whose template ``2 p beta (a - (p+1)/2)`` best matches
    ``sqrt(2 (p - 1)) T_j``."""
    return int(rank_assign_all([T_j], beta, p)[0])


def rank_init(T):
    """Ascending rank of each ``T_j`` (1-based, ties by index)."""
    T = np.asarray(T, dtype=float)
    z = np.empty(T.size, dtype=np.int64)
    z[np.argsort(T, kind="stable")] = np.arange(1, T.size + 1)
    return z


def rank_loss(z, z_true, beta_star):
    p = len(z)
    diff = np.asarray(z, dtype=float) - np.asarray(z_true, dtype=float)
    return 2.0 * p * p * beta_star ** 2 / (p - 1) * float(np.sum(diff ** 2))


def rank_l2(z, z_true):
    """Mean squared rank error ``(1/p) sum (z_j - z*_j)^2``."""
    diff = np.asarray(z, dtype=float) - np.asarray(z_true, dtype=float)
    return float(np.mean(diff ** 2))


class RankingModel(RecoveryModel):
    """Iterative feature matching for approximate ranking."""

    def __init__(self, Y):
        self.Y = _check_square(Y)
        self.T = rank_statistics(self.Y)

    @property
    def n_coords(self):
        return self.Y.shape[0]

    def fit_block(self, labels, previous=None):
        return rank_fit_beta(self.Y, labels)

    def assign(self, block):
        return rank_assign_all(self.T, block, self.n_coords)

    def assign_label(self, j, block):
        return rank_assign(self.T[j], block, self.n_coords)

    def alphabet(self, j):
        return list(range(1, self.n_coords + 1))

    def validate_labels(self, labels):
        z = np.asarray(labels)
        p = self.n_coords
        if z.shape != (p,):
            raise ContractViolation(f"expected {p} ranks, got shape {z.shape}")
        if z.size and (z.min() < 1 or z.max() > p):
            raise ContractViolation(f"ranks must lie in 1..{p}")
        return z.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        return rank_loss(labels, truth_labels, truth_block)

    def canonical_error(self, labels, truth_labels):
        return float(np.mean(np.asarray(labels) != np.asarray(truth_labels)))

    def delta_min_sq(self, truth_block):
        p = self.n_coords
        return 2.0 * p * p * truth_block ** 2 / (p - 1)

    def block_summary(self, block):
        return np.array([block])


@dataclass(frozen=True)
class RankingInstance:
    Y: np.ndarray
    truth_labels: np.ndarray
    beta_star: float
    c_p: float

    @property
    def ground_truth(self):
        return GroundTruth(self.truth_labels, self.beta_star)

    def model(self):
        return RankingModel(self.Y)


def generate_ranking(p, beta_star, rng, c_p=0.0, noise=1.0):
    """Random permutation with ``floor(c_p)`` entries moved by one rank."""
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    z = rng.permutation(p) + 1
    n_move = min(int(math.floor(c_p)), p)
    if n_move > 0 and p > 1:
        for j in rng.choice(p, n_move):
            step = 1 if rng.uniform() < 0.5 else -1
            if not 1 <= z[j] + step <= p:
                step = -step
            z[j] += step
    zf = z.astype(float)
    Y = beta_star * (zf[:, None] - zf[None, :]) + noise * rng.standard_normal((p, p))
    np.fill_diagonal(Y, 0.0)
    return RankingInstance(Y, z.astype(np.int64), float(beta_star), float(c_p))
