"""Multireference alignment over cyclic shifts.

A shift is an integer offset ``t`` in ``[0, d)`` acting as
``(Z theta)_i = theta_{(i + t) mod d}``. Observations are the columns of the
``d x p`` matrix ``Y``, ``Y_j = Z_j theta + eps_j``.
"""

from dataclasses import dataclass

import numpy as np

from .core import GroundTruth, RecoveryModel
from .exceptions import ContractViolation
from .numerics import Rng


def apply_shift(t, v):
    """``(Z_t v)_i = v_{(i + t) mod d}``; works along axis 0."""
    return np.roll(v, -int(t), axis=0)


def unshift(t, v):
    """Inverse of :func:`apply_shift`, i.e. ``Z_t^T v``."""
    return np.roll(v, int(t), axis=0)


def compose(s, t, d):
    """Offset of ``apply_shift(s, apply_shift(t, .))``."""
    return (s + t) % d


def _all_shifts(theta):
    d = theta.size
    idx = (np.arange(d)[:, None] + np.arange(d)[None, :]) % d
    return theta[idx]  # row t is apply_shift(t, theta)


def mra_fit_block(Y, shifts):
    """Average of the unshifted observations."""
    Y = np.asarray(Y, dtype=float)
    shifts = np.asarray(shifts, dtype=np.int64)
    d, p = Y.shape
    if shifts.shape != (p,):
        raise ContractViolation(f"expected {p} shifts, got shape {shifts.shape}")
    rows = (np.arange(d)[:, None] - shifts[None, :]) % d
    return Y[rows, np.arange(p)[None, :]].mean(axis=1)


def mra_assign_all(Y, theta):
    Y = np.asarray(Y, dtype=float)
    S = _all_shifts(np.asarray(theta, dtype=float))
    diff = Y.T[:, None, :] - S[None, :, :]
    return np.argmin(np.einsum("ptd,ptd->pt", diff, diff), axis=1)


def mra_assign(y, theta):
    """Offset ``t`` minimizing ``||y - Z_t theta||^2``; smallest offset on ties."""
    y = np.asarray(y, dtype=float)
    S = _all_shifts(np.asarray(theta, dtype=float))
    return int(np.argmin(np.sum((S - y[None, :]) ** 2, axis=1)))


def mra_init(Y):
    """Align every column to the first one by a full shift scan."""
    Y = np.asarray(Y, dtype=float)
    d, p = Y.shape
    out = np.zeros(p, dtype=np.int64)
    ref = Y[:, 0]
    for j in range(1, p):
        # Z_j = argmin_u ||Y_1 - Z_u^T Y_j||^2, so Z_u^T Y_j = unshift(u, Y_j)
        cands = np.stack([unshift(u, Y[:, j]) for u in range(d)])
        out[j] = int(np.argmin(np.sum((cands - ref[None, :]) ** 2, axis=1)))
    return out


def shift_error(shifts, truth, d):
    """``min_u (1/p) sum_j 1{(t_j + u) mod d != t*_j}``."""
    shifts = np.asarray(shifts, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if shifts.size == 0:
        return 0.0
    counts = np.bincount((truth - shifts) % d, minlength=d)
    return 1.0 - counts.max() / shifts.size


def best_global_shift(shifts, truth, d):
    counts = np.bincount((np.asarray(truth) - np.asarray(shifts)) % d, minlength=d)
    return int(np.argmax(counts))


def delta_min_sq(theta):
    """``min_{u != 0} ||theta - Z_u theta||^2``."""
    theta = np.asarray(theta, dtype=float)
    if theta.size < 2:
        return np.inf
    S = _all_shifts(theta)
    return float(np.min(np.sum((S[1:] - theta[None, :]) ** 2, axis=1)))


def mra_loss(shifts, truth, theta):
    S = _all_shifts(np.asarray(theta, dtype=float))
    diff = S[np.asarray(shifts)] - S[np.asarray(truth)]
    return float(np.sum(diff ** 2))


class MraModel(RecoveryModel):
    def __init__(self, Y):
        self.Y = np.asarray(Y, dtype=float)
        self.d = self.Y.shape[0]

    @property
    def n_coords(self):
        return self.Y.shape[1]

    def fit_block(self, labels, previous=None):
        return mra_fit_block(self.Y, labels)

    def assign(self, block):
        return mra_assign_all(self.Y, block)

    def assign_label(self, j, block):
        return mra_assign(self.Y[:, j], block)

    def alphabet(self, j):
        return list(range(self.d))

    def validate_labels(self, labels):
        z = np.asarray(labels)
        if z.shape != (self.n_coords,):
            raise ContractViolation(f"expected {self.n_coords} shifts, got shape {z.shape}")
        if z.size and (z.min() < 0 or z.max() >= self.d):
            raise ContractViolation(f"shifts must lie in [0, {self.d})")
        return z.astype(np.int64)

    def loss(self, labels, truth_labels, truth_block):
        return mra_loss(labels, truth_labels, truth_block)

    def canonical_error(self, labels, truth_labels):
        return shift_error(labels, truth_labels, self.d)

    def align(self, labels, truth_labels):
        u = best_global_shift(labels, truth_labels, self.d)
        return (np.asarray(labels) + u) % self.d

    def delta_min_sq(self, truth_block):
        return delta_min_sq(truth_block)

    def block_summary(self, block):
        return np.array([np.linalg.norm(block)])


@dataclass(frozen=True)
class MraInstance:
    Y: np.ndarray
    truth_shifts: np.ndarray
    theta_star: np.ndarray

    @property
    def delta_min(self):
        return float(np.sqrt(delta_min_sq(self.theta_star)))

    @property
    def ground_truth(self):
        return GroundTruth(self.truth_shifts, self.theta_star)

    def model(self):
        return MraModel(self.Y)


def draw_theta(d, rng, delta_min=None, floor=0.1, max_tries=1000):
    """Gaussian signal, optionally rescaled so ``Delta_min`` hits a target.

    Draws with ``Delta_min^2 < floor * d`` (before rescaling) are rejected.
    """
    for _ in range(max_tries):
        theta = rng.standard_normal(d)
        dm2 = delta_min_sq(theta)
        if dm2 >= floor * d:
            if delta_min is not None:
                theta = theta * (delta_min / np.sqrt(dm2))
            return theta
    raise ContractViolation(f"no signal with Delta_min^2 >= {floor} d after {max_tries} draws")


def generate_mra(d, p, rng, delta_min=None, noise=1.0, theta=None, floor=0.1):
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    if theta is None:
        theta = draw_theta(d, rng, delta_min, floor)
    theta = np.asarray(theta, dtype=float)
    shifts = rng.integers(d, size=p)
    S = _all_shifts(theta)
    Y = S[shifts].T + noise * rng.standard_normal((d, p))
    return MraInstance(Y, shifts.astype(np.int64), theta)
