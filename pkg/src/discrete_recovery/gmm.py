"""Gaussian mixture clustering: Lloyd's iteration and spectral initialization.

Data are stored column-wise, ``Y`` is ``d x p`` with one observation per
column. Cluster labels are 0-based integers in ``range(k)``.
"""

from dataclasses import dataclass

import numpy as np

from .core import GroundTruth, RecoveryModel
from .exceptions import ContractViolation
from .numerics import Rng, hungarian_min, truncated_svd


def _check_labels(labels, k, p):
    labels = np.asarray(labels)
    if labels.shape != (p,):
        raise ContractViolation(f"expected {p} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ContractViolation(f"labels must lie in range({k})")
    return labels.astype(np.int64)


def gmm_fit_block(Y, labels, k, previous=None):
    """Cluster means; an empty cluster keeps ``previous`` or gets the global mean."""
    Y = np.asarray(Y, dtype=float)
    labels = _check_labels(labels, k, Y.shape[1])
    onehot = (labels[:, None] == np.arange(k)[None, :]).astype(float)
    counts = onehot.sum(axis=0)
    sums = Y @ onehot
    centers = np.empty((Y.shape[0], k))
    full = counts > 0
    centers[:, full] = sums[:, full] / counts[full]
    if not np.all(full):
        fill = Y.mean(axis=1) if previous is None else None
        for a in np.flatnonzero(~full):
            centers[:, a] = previous[:, a] if previous is not None else fill
    return centers


def _sq_dists(Y, centers):
    # exact per-coordinate differences so equidistant ties compare equal
    diff = Y[:, :, None] - centers[:, None, :]
    return np.einsum("dpk,dpk->pk", diff, diff)


def gmm_assign(y, centers):
    """Index of the nearest center to ``y`` (first index on ties)."""
    y = np.asarray(y, dtype=float)
    d2 = np.sum((np.asarray(centers) - y[:, None]) ** 2, axis=0)
    return int(np.argmin(d2))


def gmm_assign_all(Y, centers):
    return np.argmin(_sq_dists(np.asarray(Y, dtype=float), np.asarray(centers)), axis=1)


def lloyd_objective(Y, labels, centers):
    Y = np.asarray(Y, dtype=float)
    return float(np.sum((Y - np.asarray(centers)[:, labels]) ** 2))


def kmeans_pp_seeds(points, k, rng):
    """k-means++ seeding on the rows of ``points``; returns seed row indices."""
    n = points.shape[0]
    idx = [rng.integers(n)]
    d2 = np.sum((points - points[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            nxt = rng.integers(n)
        else:
            cum = np.cumsum(d2)
            nxt = int(min(np.searchsorted(cum, rng.uniform() * total, side="right"), n - 1))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return np.asarray(idx)


def kmeans(points, k, rng, restarts=5, max_iter=300):
    """Best-of-``restarts`` k-means++ plus Lloyd refinement on rows of ``points``.

    Returns
    -------
    labels : (n,) ndarray
    objective : float
    """
    points = np.asarray(points, dtype=float)
    Yc = points.T
    best = None
    for _ in range(max(1, restarts)):
        centers = points[kmeans_pp_seeds(points, k, rng)].T.copy()
        labels = gmm_assign_all(Yc, centers)
        for _ in range(max_iter):
            centers = gmm_fit_block(Yc, labels, k, previous=centers)
            new = gmm_assign_all(Yc, centers)
            if np.array_equal(new, labels):
                break
            labels = new
        obj = lloyd_objective(Yc, labels, gmm_fit_block(Yc, labels, k, previous=centers))
        if best is None or obj < best[1]:
            best = (labels, obj)
    return best


def gmm_spectral_init(Y, k, rng=None, kmeans_restarts=5):
    """Project columns on the top-``k`` left singular vectors, then k-means++.

    Parameters
    ----------
    Y : (d, p) array_like
    k : int
        Requires ``k <= min(d, p)``.
    rng : Rng, optional
    kmeans_restarts : int
        Independent k-means++ runs; the lowest objective wins.
    """
    Y = np.asarray(Y, dtype=float)
    d, p = Y.shape
    if not 1 <= k <= min(d, p):
        raise ContractViolation(f"need 1 <= k <= min(d, p) = {min(d, p)}, got k={k}")
    if k == 1:
        return np.zeros(p, dtype=np.int64)
    rng = rng if rng is not None else Rng(0)
    U, _, _ = truncated_svd(Y, k)
    projected = U.T @ Y
    labels, _ = kmeans(projected.T, k, rng, restarts=kmeans_restarts)
    return labels.astype(np.int64)


def _confusion(z, z_true, k):
    C = np.zeros((k, k))
    np.add.at(C, (np.asarray(z), np.asarray(z_true)), 1.0)
    return C


def best_relabeling(z, z_true, k=None):
    """Permutation ``pi`` (array) maximizing agreement of ``pi[z]`` with ``z_true``."""
    z = np.asarray(z, dtype=np.int64)
    z_true = np.asarray(z_true, dtype=np.int64)
    if k is None:
        k = int(max(z.max(initial=0), z_true.max(initial=0))) + 1
    pi, _ = hungarian_min(-_confusion(z, z_true, k))
    return pi


def misclustering(z, z_true, k=None):
    """Fraction of points misclustered, minimized over label permutations."""
    z = np.asarray(z, dtype=np.int64)
    z_true = np.asarray(z_true, dtype=np.int64)
    if z.shape != z_true.shape:
        raise ContractViolation("label vectors differ in length")
    if z.size == 0:
        return 0.0
    pi = best_relabeling(z, z_true, k)
    return float(np.mean(pi[z] != z_true))


def gmm_loss(z, z_true, centers):
    centers = np.asarray(centers, dtype=float)
    diff = centers[:, np.asarray(z)] - centers[:, np.asarray(z_true)]
    return float(np.sum(diff ** 2))


def min_center_distance(centers):
    centers = np.asarray(centers, dtype=float)
    k = centers.shape[1]
    if k < 2:
        return np.inf
    G = np.sum((centers[:, :, None] - centers[:, None, :]) ** 2, axis=0)
    return float(np.sqrt(np.min(G[~np.eye(k, dtype=bool)])))


class GmmModel(RecoveryModel):
    """Lloyd's algorithm as an instance of the generic loop."""

    def __init__(self, Y, k):
        self.Y = np.asarray(Y, dtype=float)
        self.k = int(k)

    @property
    def n_coords(self):
        return self.Y.shape[1]

    def fit_block(self, labels, previous=None):
        return gmm_fit_block(self.Y, labels, self.k, previous)

    def assign(self, block):
        return gmm_assign_all(self.Y, block)

    def assign_label(self, j, block):
        return gmm_assign(self.Y[:, j], block)

    def alphabet(self, j):
        return list(range(self.k))

    def validate_labels(self, labels):
        return _check_labels(labels, self.k, self.n_coords)

    def loss(self, labels, truth_labels, truth_block):
        return gmm_loss(labels, truth_labels, truth_block)

    def canonical_error(self, labels, truth_labels):
        return misclustering(labels, truth_labels, self.k)

    def align(self, labels, truth_labels):
        pi = best_relabeling(labels, truth_labels, self.k)
        return pi[np.asarray(labels, dtype=np.int64)]

    def delta_min_sq(self, truth_block):
        return min_center_distance(truth_block) ** 2

    def block_summary(self, block):
        return np.array([min_center_distance(block)])


@dataclass(frozen=True)
class GmmInstance:
    Y: np.ndarray
    truth_labels: np.ndarray
    centers: np.ndarray
    k: int

    @property
    def delta_min(self):
        return min_center_distance(self.centers)

    @property
    def ground_truth(self):
        return GroundTruth(self.truth_labels, self.centers)

    def model(self):
        return GmmModel(self.Y, self.k)


def simplex_centers(d, k, delta):
    """``k`` centers at pairwise distance ``delta`` (needs ``k <= d``)."""
    if k > d:
        raise ContractViolation(f"a regular simplex of {k} points needs d >= {k}")
    C = np.zeros((d, k))
    C[np.arange(k), np.arange(k)] = delta / np.sqrt(2.0)
    return C


def generate_gmm(p, k, d, delta, rng, noise=1.0, centers=None):
    """Balanced mixture with minimum center separation ``delta``.

    Centers default to a regular simplex when ``k <= d`` so every pair sits
    at distance ``delta``; otherwise Gaussian centers are rescaled so the
    closest pair is at ``delta``.
    """
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    if not 1 <= k <= p:
        raise ContractViolation(f"need 1 <= k <= p, got k={k}, p={p}")
    if centers is None:
        if k <= d:
            centers = simplex_centers(d, k, delta)
        else:
            centers = rng.standard_normal((d, k))
            centers *= delta / min_center_distance(centers)
    centers = np.asarray(centers, dtype=float)
    z = (np.arange(p) % k)[rng.permutation(p)].astype(np.int64)
    Y = centers[:, z] + noise * rng.standard_normal((d, p))
    return GmmInstance(Y, z, centers, int(k))
