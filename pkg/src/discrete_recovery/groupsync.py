"""Group synchronization over Z_2, Z/kZ and the symmetric group.

Z_2 labels are +-1, Z/kZ labels are integers mod ``k`` and a permutation
label is an index array ``sigma`` with ``Z[sigma[c], c] = 1``.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import GroundTruth, RecoveryModel
from .exceptions import ContractViolation, DegenerateLabelsError
from .gmm import gmm_spectral_init
from .numerics import Rng, hungarian_min, sym_eig, symmetric_gaussian

BRUTE_FORCE_MAX_D = 8


def _sign(x):
    # sign with sign(0) = +1
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int64)


def _check_square(Y):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ContractViolation(f"Y must be square, got shape {Y.shape}")
    return Y


# --------------------------------------------------------------------------
# Z_2


def z2_fit_lambda(Y, z):
    """``z^T Y z / p^2``."""
    z = np.asarray(z, dtype=float)
    return float(z @ Y @ z) / z.size ** 2


def z2_step(Y, z):
    """Power-method update ``sign(Y z)``, negated when ``z^T Y z < 0``."""
    Y = _check_square(Y)
    z = np.asarray(z, dtype=float)
    v = Y @ z
    out = _sign(v)
    return out if float(z @ v) >= 0 else -out


def z2_init(Y):
    """Signs of the leading eigenvector."""
    _, V = sym_eig(_check_square(Y), top_r=1)
    return _sign(V[:, 0])


def z2_error(z, z_true):
    """``min(h(z, z*), h(z, -z*)) / p``."""
    z = np.asarray(z)
    z_true = np.asarray(z_true)
    h = np.sum(z != z_true)
    return float(min(h, z.size - h)) / z.size


class Z2Model(RecoveryModel):
    """The block is ``(lambda_hat, z)``; assignment is :func:`z2_step`."""

    def __init__(self, Y):
        self.Y = _check_square(Y)

    @property
    def n_coords(self):
        return self.Y.shape[0]

    def fit_block(self, labels, previous=None):
        return (z2_fit_lambda(self.Y, labels), np.asarray(labels))

    def assign(self, block):
        return z2_step(self.Y, block[1])

    def assign_label(self, j, block):
        return int(self.assign(block)[j])

    def alphabet(self, j):
        return [1, -1]

    def validate_labels(self, labels):
        z = np.asarray(labels)
        if z.shape != (self.n_coords,):
            raise ContractViolation(f"expected {self.n_coords} signs, got shape {z.shape}")
        if not np.all(np.abs(z) == 1):
            raise ContractViolation("Z_2 labels must be +1 or -1")
        return z.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        diff = np.asarray(labels, dtype=float) - np.asarray(truth_labels, dtype=float)
        return self.n_coords * truth_block ** 2 * float(np.sum(diff ** 2))

    def canonical_error(self, labels, truth_labels):
        return z2_error(labels, truth_labels)

    def align(self, labels, truth_labels):
        z = np.asarray(labels)
        return -z if np.sum(z != truth_labels) > z.size / 2 else z

    def delta_min_sq(self, truth_block):
        return 4.0 * self.n_coords * truth_block ** 2

    def block_summary(self, block):
        return np.array([block[0]])


@dataclass(frozen=True)
class Z2Instance:
    Y: np.ndarray
    truth: np.ndarray
    lambda_star: float

    @property
    def ground_truth(self):
        return GroundTruth(self.truth, self.lambda_star)

    def model(self):
        return Z2Model(self.Y)


def generate_z2(p, lambda_star, rng, noise=1.0):
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    z = rng.signs(p)
    Y = lambda_star * np.outer(z, z) + noise * symmetric_gaussian(rng, p)
    np.fill_diagonal(Y, 0.0)
    return Z2Instance(Y, z, float(lambda_star))


# --------------------------------------------------------------------------
# Z/kZ


def zk_op(g, h, k):
    return (np.asarray(g) + np.asarray(h)) % k


def zk_inv(g, k):
    return (-np.asarray(g)) % k


def zk_diff(g, h, k):
    """``g o h^{-1} = (g - h) mod k``."""
    return (np.asarray(g) - np.asarray(h)) % k


def zk_fit_lambda(Y, z, k):
    z = np.asarray(z, dtype=np.int64)
    D = zk_diff(z[:, None], z[None, :], k).astype(float)
    den = float(np.sum(D * D))
    if den == 0.0:
        raise DegenerateLabelsError("constant Z/kZ labels; the scale fit is undefined")
    np.fill_diagonal(D, 0.0)
    return float(np.sum(D * Y)) / den


def zk_assign_all(Y, z, lam, k):
    """``argmin_a sum_i (Y[i, j] - lam ((z_i - a) mod k))^2`` for every ``j``.

    The sum runs over all ``i`` including ``i = j``.
    """
    z = np.asarray(z, dtype=np.int64)
    templ = lam * zk_diff(z[:, None], np.arange(k)[None, :], k)  # (p, k)
    diff = Y[:, :, None] - templ[:, None, :]  # (i, j, a)
    return np.argmin(np.sum(diff * diff, axis=0), axis=1).astype(np.int64)


def zk_step(Y, z, k):
    """One fit/assign round; returns ``(lambda_hat, z_new)``."""
    Y = _check_square(Y)
    lam = zk_fit_lambda(Y, z, k)
    return lam, zk_assign_all(Y, z, lam, k)


def zk_error(z, z_true, k):
    """``min_a (1/p) sum_j 1{z_j != (z*_j - a) mod k}``."""
    z = np.asarray(z, dtype=np.int64)
    if z.size == 0:
        return 0.0
    counts = np.bincount(zk_diff(z_true, z, k), minlength=k)
    return 1.0 - counts.max() / z.size


def _zk_sort_clusters(Y, clusters, k):
    means = np.zeros(k)
    in0 = clusters == 0
    for l in range(1, k):
        means[l] = Y[np.ix_(clusters == l, in0)].mean()
    perm = np.zeros(k, dtype=np.int64)
    order = np.argsort(np.abs(means[1:]), kind="stable")
    perm[1 + order] = np.arange(1, k)
    return perm[clusters]


def zk_init(Y, k, rng=None, attempts=3, kmeans_restarts=5):
    """Spectral clustering of the columns, then order clusters by block mean.

    Cluster 0 gets label 0; cluster ``l`` gets the ascending rank of
    ``|mean(Y[i, j] : i in l, j in 0)|`` among ``l = 1..k-1``.
    """
    Y = _check_square(Y)
    p = Y.shape[0]
    if k == 1:
        return np.zeros(p, dtype=np.int64)
    rng = rng if rng is not None else Rng(0)
    for attempt in range(attempts):
        clusters = gmm_spectral_init(Y, k, rng.child(attempt), kmeans_restarts)
        if np.all(np.bincount(clusters, minlength=k) > 0):
            return _zk_sort_clusters(Y, clusters, k)
    raise DegenerateLabelsError(f"spectral clustering left an empty cluster {attempts} times")


class ZkModel(RecoveryModel):
    """The block is ``(lambda_hat, z)``."""

    def __init__(self, Y, k):
        self.Y = _check_square(Y)
        self.k = int(k)

    @property
    def n_coords(self):
        return self.Y.shape[0]

    def fit_block(self, labels, previous=None):
        return (zk_fit_lambda(self.Y, labels, self.k), np.asarray(labels))

    def assign(self, block):
        return zk_assign_all(self.Y, block[1], block[0], self.k)

    def assign_label(self, j, block):
        lam, z = block
        a = np.arange(self.k)
        templ = lam * zk_diff(np.asarray(z)[:, None], a[None, :], self.k)
        return int(np.argmin(np.sum((self.Y[:, [j]] - templ) ** 2, axis=0)))

    def alphabet(self, j):
        return list(range(self.k))

    def validate_labels(self, labels):
        z = np.asarray(labels)
        if z.shape != (self.n_coords,):
            raise ContractViolation(f"expected {self.n_coords} labels, got shape {z.shape}")
        if z.size and (z.min() < 0 or z.max() >= self.k):
            raise ContractViolation(f"labels must lie in [0, {self.k})")
        return z.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        zt = np.asarray(truth_labels)
        a = zk_diff(zt[:, None], np.asarray(labels)[None, :], self.k)
        b = zk_diff(zt[:, None], zt[None, :], self.k)
        return truth_block ** 2 * float(np.sum((a - b) ** 2))

    def canonical_error(self, labels, truth_labels):
        return zk_error(labels, truth_labels, self.k)

    def align(self, labels, truth_labels):
        counts = np.bincount(zk_diff(truth_labels, labels, self.k), minlength=self.k)
        return zk_op(labels, int(np.argmax(counts)), self.k)

    def delta_min_sq(self, truth_block):
        return self.n_coords * truth_block ** 2

    def block_summary(self, block):
        return np.array([block[0]])


@dataclass(frozen=True)
class ZkInstance:
    Y: np.ndarray
    truth: np.ndarray
    lambda_star: float
    k: int

    @property
    def ground_truth(self):
        return GroundTruth(self.truth, self.lambda_star)

    def model(self):
        return ZkModel(self.Y, self.k)


def generate_zk(p, k, lambda_star, rng, noise=1.0):
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    z = rng.integers(k, size=p)
    Y = lambda_star * zk_diff(z[:, None], z[None, :], k) + noise * rng.standard_normal((p, p))
    np.fill_diagonal(Y, 0.0)
    return ZkInstance(Y, z.astype(np.int64), float(lambda_star), int(k))


# --------------------------------------------------------------------------
# permutations


def perm_matrix(sigma):
    """Dense ``Z`` with ``Z[sigma[c], c] = 1`` (for tests and small examples)."""
    sigma = np.asarray(sigma)
    Z = np.zeros((sigma.size, sigma.size))
    Z[sigma, np.arange(sigma.size)] = 1.0
    return Z


def _row_index(sigmas, d):
    # r[i, c] = row of Y holding block i, entry sigma_i(c)
    return np.arange(sigmas.shape[0])[:, None] * d + sigmas


def _check_perm_data(Y, d):
    Y = _check_square(Y)
    if d < 1 or Y.shape[0] % d:
        raise ContractViolation(f"Y of size {Y.shape[0]} is not a multiple of d={d}")
    return Y, Y.shape[0] // d


def perm_fit_lambda(Y, sigmas, d):
    """``<Y, Z Z^T> / (p^2 d)``."""
    Y, p = _check_perm_data(Y, d)
    r = _row_index(np.asarray(sigmas), d)
    ZtY = Y[r.T, :].sum(axis=1)  # (d, pd)
    return float(np.sum(ZtY[np.arange(d)[:, None], r.T])) / (p * p * d)


def perm_scores(Y, sigmas, d, lam):
    """Score matrices ``M_j = lam sum_i Y_ij^T Z_i``, shape ``(p, d, d)``."""
    Y, p = _check_perm_data(Y, d)
    r = _row_index(np.asarray(sigmas), d)
    ZtY = Y[r.T, :].sum(axis=1)  # row c is sum_i Y[i d + sigma_i(c), :]
    return lam * ZtY.reshape(d, p, d).transpose(1, 2, 0)


def perm_project(M):
    """``argmax_{U} <M, U>`` over permutation matrices, as an index array."""
    sigma, _ = hungarian_min(-np.asarray(M).T)
    return np.asarray(sigma, dtype=np.int64)


def perm_step(Y, sigmas, d):
    """One fit/assign round; returns ``(lambda_hat, sigmas_new)``."""
    lam = perm_fit_lambda(Y, sigmas, d)
    M = perm_scores(Y, sigmas, d, lam)
    return lam, np.stack([perm_project(Mj) for Mj in M])


def perm_init(Y, p, d):
    """Top-``d`` eigenvectors, each ``d x d`` block rounded to a permutation."""
    Y, p_obs = _check_perm_data(Y, d)
    if p_obs != p:
        raise ContractViolation(f"Y holds {p_obs} blocks, expected {p}")
    _, U = sym_eig(Y, top_r=d)
    return np.stack([perm_project(U[j * d:(j + 1) * d]) for j in range(p)])


def perm_error_detail(sigmas, truth):
    """Quotiented error and whether it came from the heuristic alignment.

    Returns
    -------
    error : float
        ``min_pi (1/p) sum_j 1{sigma_j != sigma*_j o pi}``.
    heuristic : bool
        True for ``d > 8``, where ``pi`` comes from a Hungarian match of
        entrywise agreement counts instead of exhaustive search.
    """
    sigmas = np.asarray(sigmas, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if sigmas.shape != truth.shape:
        raise ContractViolation("permutation label arrays differ in shape")
    p, d = sigmas.shape
    if p == 0:
        return 0.0, False
    if d <= BRUTE_FORCE_MAX_D:
        perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
        hits = np.zeros(len(perms), dtype=np.int64)
        for j in range(p):
            hits += np.all(truth[j][perms] == sigmas[j][None, :], axis=1)
        return 1.0 - hits.max() / p, False
    A = np.zeros((d, d))
    for j in range(p):
        A[np.arange(d), np.argsort(truth[j])[sigmas[j]]] += 1.0
    pi, _ = hungarian_min(-A)
    return float(np.mean(np.any(truth[:, pi] != sigmas, axis=1))), True


def perm_error(sigmas, truth):
    return perm_error_detail(sigmas, truth)[0]


def perm_align(sigmas, truth):
    """Relabel ``sigmas`` by the global permutation used in :func:`perm_error`."""
    sigmas = np.asarray(sigmas, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    p, d = sigmas.shape
    if d <= BRUTE_FORCE_MAX_D:
        perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
        hits = np.zeros(len(perms), dtype=np.int64)
        for j in range(p):
            hits += np.all(truth[j][perms] == sigmas[j][None, :], axis=1)
        pi = perms[int(np.argmax(hits))]
    else:
        A = np.zeros((d, d))
        for j in range(p):
            A[np.arange(d), np.argsort(truth[j])[sigmas[j]]] += 1.0
        pi, _ = hungarian_min(-A)
    # sigma_j = sigma*_j o pi  <=>  sigma_j o pi^{-1} = sigma*_j
    return sigmas[:, np.argsort(pi)]


class PermModel(RecoveryModel):
    """Labels are a ``(p, d)`` array of permutations; block is ``(lambda_hat, sigmas)``."""

    def __init__(self, Y, d):
        self.Y, self.p = _check_perm_data(Y, d)
        self.d = int(d)

    @property
    def n_coords(self):
        return self.p

    def fit_block(self, labels, previous=None):
        return (perm_fit_lambda(self.Y, labels, self.d), np.asarray(labels))

    def assign(self, block):
        M = perm_scores(self.Y, block[1], self.d, block[0])
        return np.stack([perm_project(Mj) for Mj in M])

    def assign_label(self, j, block):
        return perm_project(perm_scores(self.Y, block[1], self.d, block[0])[j])

    def alphabet(self, j):
        return [np.array(s) for s in itertools.permutations(range(self.d))]

    def alphabet_size(self, j):
        return math.factorial(self.d)

    def validate_labels(self, labels):
        S = np.asarray(labels)
        if S.shape != (self.p, self.d):
            raise ContractViolation(f"expected shape {(self.p, self.d)}, got {S.shape}")
        if not np.all(np.sort(S, axis=1) == np.arange(self.d)[None, :]):
            raise ContractViolation("each row must be a permutation of range(d)")
        return S.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        mismatched = np.sum(np.asarray(labels) != np.asarray(truth_labels))
        return self.p * truth_block ** 2 * 2.0 * float(mismatched)

    def canonical_error(self, labels, truth_labels):
        return perm_error(labels, truth_labels)

    def align(self, labels, truth_labels):
        return perm_align(labels, truth_labels)

    def delta_min_sq(self, truth_block):
        return 4.0 * self.p * truth_block ** 2

    def block_summary(self, block):
        return np.array([block[0]])


@dataclass(frozen=True)
class PermSyncInstance:
    Y: np.ndarray
    truth: np.ndarray
    lambda_star: float
    d: int

    @property
    def ground_truth(self):
        return GroundTruth(self.truth, self.lambda_star)

    def model(self):
        return PermModel(self.Y, self.d)


def generate_perm(p, d, lambda_star, rng, noise=1.0):
    """Block matrix ``lambda Z_i Z_j^T + W_ij`` with zero diagonal blocks."""
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    sigmas = np.stack([rng.permutation(d) for _ in range(p)]).astype(np.int64)
    r = _row_index(sigmas, d)
    Y = noise * symmetric_gaussian(rng, p * d)
    for c in range(d):
        # entries (i d + sigma_i(c), j d + sigma_j(c)) of Z Z^T
        Y[np.ix_(r[:, c], r[:, c])] += lambda_star
    for i in range(p):
        Y[i * d:(i + 1) * d, i * d:(i + 1) * d] = 0.0
    return PermSyncInstance(Y, sigmas, float(lambda_star), int(d))
