"""Sign recovery in sparse linear regression.

``Y = X beta + eps`` with ``X`` an ``n x p`` standard Gaussian design and
``beta`` s-sparse with ``|beta_j| >= lam`` on its support. Labels are
``sign(beta_j)`` in ``{-1, 0, 1}``.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import GroundTruth, RecoveryModel
from .exceptions import ContractViolation, ConvergenceError, SupportTooLargeError
from .numerics import Rng, slope_prox, sorted_l1_norm

log = logging.getLogger(__name__)

RIDGE = 1e-10
SIGMA_FLOOR = 1e-12


def _check_design(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != Y.size:
        raise ContractViolation(f"X {X.shape} and Y ({Y.size},) are incompatible")
    return X, Y


def _check_sparsity(p, s):
    if not 1 <= s <= p:
        raise ContractViolation(f"s must satisfy 1 <= s <= p, got s={s}, p={p}")


def restricted_lsq(X, Y, signs, allow_ridge=False):
    """Least squares on the support of ``signs``, zero elsewhere.

    Solved through the Gram matrix on the support by Cholesky, with a
    ``1e-10`` ridge when the Gram matrix is numerically singular.

    Parameters
    ----------
    allow_ridge : bool
        If false a support larger than ``n`` raises
        :class:`SupportTooLargeError`; if true it is solved with the ridge.
    """
    X, Y = _check_design(X, Y)
    signs = np.asarray(signs)
    if signs.shape != (X.shape[1],):
        raise ContractViolation(f"expected {X.shape[1]} signs, got shape {signs.shape}")
    S = np.flatnonzero(signs)
    beta = np.zeros(X.shape[1])
    if S.size == 0:
        return beta
    if S.size > X.shape[0] and not allow_ridge:
        raise SupportTooLargeError(f"support of size {S.size} exceeds n={X.shape[0]}")
    XS = X[:, S]
    G = XS.T @ XS
    rhs = XS.T @ Y
    try:
        if S.size > X.shape[0]:
            raise linalg.LinAlgError("rank deficient")
        c = linalg.cho_factor(G, check_finite=False)
        sol = linalg.cho_solve(c, rhs, check_finite=False)
        if np.linalg.cond(G) > 1e12:
            raise linalg.LinAlgError("ill conditioned")
    except linalg.LinAlgError:
        scale = max(1.0, float(np.mean(np.diag(G))))
        sol = linalg.solve(G + RIDGE * scale * np.eye(S.size), rhs, assume_a="pos")
    beta[S] = sol
    return beta


def threshold_t(col_norm_sq, lam, p, s):
    """``lam / 2 + log((p - s) / s) / (lam * ||X_j||^2)``; ``-inf`` when ``s == p``."""
    _check_sparsity(p, s)
    if lam <= 0:
        raise ContractViolation("lam must be positive")
    if s == p:
        return np.full(np.shape(col_norm_sq), -np.inf) if np.ndim(col_norm_sq) else -np.inf
    return lam / 2.0 + math.log((p - s) / s) / (lam * np.asarray(col_norm_sq, dtype=float))


def coordinate_statistics(X, Y, beta):
    """``u_j = X_j^T (Y - sum_{l != j} beta_l X_l) / ||X_j||^2`` for all ``j``."""
    X, Y = _check_design(X, Y)
    beta = np.asarray(beta, dtype=float)
    norms = np.einsum("ij,ij->j", X, X)
    r = Y - X @ beta
    return X.T @ r / norms + beta


def sign_assign_all(X, Y, beta, lam, s):
    X, Y = _check_design(X, Y)
    u = coordinate_statistics(X, Y, beta)
    t = threshold_t(np.einsum("ij,ij->j", X, X), lam, X.shape[1], s)
    return (np.sign(u) * (np.abs(u) > t)).astype(np.int64)


def sign_assign(j, X, Y, beta, lam, s):
    """Thresholded sign of coordinate ``j``; ``|u_j| == t`` maps to 0."""
    X, Y = _check_design(X, Y)
    beta = np.asarray(beta, dtype=float)
    xj = X[:, j]
    nsq = float(xj @ xj)
    partial = Y - X @ beta + xj * beta[j]
    u = float(xj @ partial) / nsq
    t = threshold_t(nsq, lam, X.shape[1], s)
    return int(np.sign(u)) if abs(u) > t else 0


def snr(lam, n, p, s):
    """``lam sqrt(n) / 2 - log((p - s) / s) / (lam sqrt(n))``."""
    _check_sparsity(p, s)
    x = lam * math.sqrt(n)
    return x / 2.0 - math.log((p - s) / s) / x


def lambda_for_snr(target, n, p, s):
    """Signal level ``lam`` at which :func:`snr` equals ``target``."""
    _check_sparsity(p, s)
    L = math.log((p - s) / s)
    x = target + math.sqrt(target * target + 2.0 * L)
    if x <= 0:
        raise ContractViolation(f"no positive lam gives SNR {target}")
    return x / math.sqrt(n)


def slope_weights(p):
    """``sqrt(log(2 p / j))`` for ``j = 1..p``."""
    return np.sqrt(np.log(2.0 * p / np.arange(1, p + 1)))


def sqrt_slope_objective(X, Y, beta, A, weights=None):
    X, Y = _check_design(X, Y)
    w = slope_weights(X.shape[1]) if weights is None else weights
    return float(np.linalg.norm(Y - X @ beta) + A * sorted_l1_norm(beta, w))


def _fista(X, Y, w, beta, L, tol, max_iter):
    # FISTA with gradient-based adaptive restart
    x = beta.copy()
    y = x.copy()
    t = 1.0
    for it in range(1, max_iter + 1):
        grad = X.T @ (X @ y - Y)
        x_new = slope_prox(y - grad / L, w / L)
        step = x_new - x
        if np.dot(y - x_new, step) > 0:
            t = 1.0
            y = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * step
            t = t_new
        x = x_new
        if np.linalg.norm(step) <= tol * max(1.0, np.linalg.norm(x)):
            return x, it
    return x, max_iter


def sqrt_slope(X, Y, A=1.5, tol=1e-8, max_outer=200, max_inner=20000):
    """Square-root SLOPE estimate.

    Minimizes ``||Y - X b|| + A sum_j sqrt(log(2p/j)) |b|_(j)`` by alternating
    ``sigma = ||Y - X b||`` with warm-started FISTA on
    ``0.5 ||Y - X b||^2 + A sigma SLOPE(b)``.

    Raises
    ------
    ConvergenceError
        If the objective has not settled to relative change ``tol`` within
        ``max_outer`` rounds; the last iterate is attached.
    """
    X, Y = _check_design(X, Y)
    if A <= 0:
        raise ContractViolation("penalty A must be positive")
    n, p = X.shape
    w = slope_weights(p)
    G = X @ X.T if n <= p else X.T @ X
    L = max(float(np.linalg.eigvalsh(G)[-1]), SIGMA_FLOOR)
    beta = np.zeros(p)
    sigma = max(float(np.linalg.norm(Y)), SIGMA_FLOOR)
    obj = sigma
    for _ in range(max_outer):
        beta, _ = _fista(X, Y, A * sigma * w, beta, L, tol * 1e-2, max_inner)
        sigma = max(float(np.linalg.norm(Y - X @ beta)), SIGMA_FLOOR)
        new_obj = sigma + A * sorted_l1_norm(beta, w)
        if abs(obj - new_obj) <= tol * max(new_obj, SIGMA_FLOOR):
            return beta
        obj = new_obj
    raise ConvergenceError("square-root SLOPE did not converge", last_iterate=beta)


def sqrt_slope_init(X, Y, lam, A=1.5, tol=1e-8):
    """Signs of the square-root SLOPE estimate, thresholded at ``lam / 2``."""
    beta = sqrt_slope(X, Y, A=A, tol=tol)
    return (np.sign(beta) * (np.abs(beta) >= lam / 2.0)).astype(np.int64)


def hamming_s(z, z_true, s):
    """Hamming distance divided by the sparsity ``s``."""
    return float(np.sum(np.asarray(z) != np.asarray(z_true))) / s


def sign_loss(z, z_true, beta_star, lam, col_norm_sq):
    z = np.asarray(z)
    zt = np.asarray(z_true)
    b2 = np.asarray(beta_star, dtype=float) ** 2 * col_norm_sq
    false_pos = (zt == 0) & (z != 0)
    missed = (zt != 0) & (z == 0)
    flipped = z * zt == -1
    return float(np.sum(lam ** 2 * col_norm_sq * false_pos) + np.sum(b2 * missed)
                 + np.sum(4.0 * b2 * flipped))


class SignModel(RecoveryModel):
    """Alternating restricted least squares and coordinatewise thresholding.

    ``lam`` and ``s`` are treated as known. ``canonical_error`` is the
    normalized Hamming loss ``h / s``, which can exceed 1.
    """

    def __init__(self, X, Y, lam, s):
        self.X, self.Y = _check_design(X, Y)
        _check_sparsity(self.X.shape[1], s)
        self.lam = float(lam)
        self.s = int(s)
        self.col_norm_sq = np.einsum("ij,ij->j", self.X, self.X)
        self.ridge_fallbacks = 0

    @property
    def n_coords(self):
        return self.X.shape[1]

    def fit_block(self, labels, previous=None):
        if np.count_nonzero(labels) > self.X.shape[0]:
            self.ridge_fallbacks += 1
            log.info("support %d exceeds n=%d; using ridge solve",
                     np.count_nonzero(labels), self.X.shape[0])
        return restricted_lsq(self.X, self.Y, labels, allow_ridge=True)

    def assign(self, block):
        return sign_assign_all(self.X, self.Y, block, self.lam, self.s)

    def assign_label(self, j, block):
        return sign_assign(j, self.X, self.Y, block, self.lam, self.s)

    def alphabet(self, j):
        return [-1, 0, 1]

    def validate_labels(self, labels):
        z = np.asarray(labels)
        if z.shape != (self.n_coords,):
            raise ContractViolation(f"expected {self.n_coords} signs, got shape {z.shape}")
        if not np.all(np.isin(z, (-1, 0, 1))):
            raise ContractViolation("signs must lie in {-1, 0, 1}")
        return z.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        return sign_loss(labels, truth_labels, truth_block, self.lam, self.col_norm_sq)

    def canonical_error(self, labels, truth_labels):
        return hamming_s(labels, truth_labels, self.s)

    def delta_min_sq(self, truth_block):
        return self.lam ** 2 * float(self.col_norm_sq.min())

    def block_summary(self, block):
        return np.array([np.count_nonzero(block), np.linalg.norm(block)], dtype=float)


@dataclass(frozen=True)
class SignInstance:
    X: np.ndarray
    Y: np.ndarray
    truth_signs: np.ndarray
    beta_star: np.ndarray
    lam: float
    s: int

    @property
    def ground_truth(self):
        return GroundTruth(self.truth_signs, self.beta_star)

    def model(self):
        return SignModel(self.X, self.Y, self.lam, self.s)


def generate_sign(n, p, s, lam, rng, noise=1.0):
    """Gaussian design, uniform support of size ``s``, ``|beta_j| = lam`` there."""
    _check_sparsity(p, s)
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    X = rng.standard_normal((n, p))
    support = rng.choice(p, s)
    z = np.zeros(p, dtype=np.int64)
    z[support] = rng.signs(s)
    beta = lam * z.astype(float)
    Y = X @ beta + noise * rng.standard_normal(n)
    return SignInstance(X, Y, z, beta, float(lam), int(s))
