"""The alternating fit/assign loop shared by every model.

A model supplies a least-squares fit of its continuous block parameter given
labels, and a per-coordinate assignment rule against that fit. The loop
alternates the two, updating all coordinates from the same block estimate.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .exceptions import ContractViolation


@dataclass(frozen=True)
class GroundTruth:
    """True labels and block parameter of a synthetic instance."""

    labels: np.ndarray
    block: Any


class RecoveryModel(ABC):
    """Observed data plus the two steps of the iteration for one problem.

    Subclasses hold their data read-only. Labels are numpy integer arrays
    with one entry per coordinate (one row per coordinate for permutation
    labels).
    """

    @property
    @abstractmethod
    def n_coords(self) -> int:
        """Number of coordinates ``p`` carrying a label."""

    @abstractmethod
    def fit_block(self, labels, previous=None):
        """Least-squares block estimate given ``labels``.

        ``previous`` is the block from the prior iteration, for models that
        need a fallback (empty clusters).
        """

    @abstractmethod
    def assign_label(self, j, block):
        """Best label for coordinate ``j`` against ``block``."""

    @abstractmethod
    def alphabet(self, j):
        """All admissible labels of coordinate ``j`` in tie-break order."""

    @abstractmethod
    def loss(self, labels, truth_labels, truth_block) -> float:
        """Squared distance between template means at ``labels`` and truth."""

    @abstractmethod
    def canonical_error(self, labels, truth_labels) -> float:
        """Hamming fraction after quotienting the model's global symmetry."""

    @abstractmethod
    def delta_min_sq(self, truth_block) -> float:
        """Smallest squared gap between two candidate means."""

    def alphabet_size(self, j) -> int:
        return len(self.alphabet(j))

    def assign(self, block):
        """Assign every coordinate against the same ``block``."""
        return np.array([self.assign_label(j, block) for j in range(self.n_coords)])

    def align(self, labels, truth_labels):
        """Map ``labels`` into the frame of ``truth_labels`` (identity by default)."""
        return np.asarray(labels)

    def block_summary(self, block):
        return np.asarray([], dtype=float)

    def validate_labels(self, labels):
        labels = np.asarray(labels)
        if labels.shape[:1] != (self.n_coords,):
            raise ContractViolation(
                f"expected {self.n_coords} labels, got array of shape {labels.shape}")
        return labels

    def hamming(self, labels, truth_labels) -> int:
        a = np.asarray(labels).reshape(self.n_coords, -1)
        b = np.asarray(truth_labels).reshape(self.n_coords, -1)
        return int(np.sum(np.any(a != b, axis=1)))


def default_t_max(p):
    """Iteration budget ``ceil(3 ln p)``, at least 1."""
    return max(1, math.ceil(3.0 * math.log(max(p, 1))))


@dataclass(frozen=True)
class IterationConfig:
    t_max: Optional[int] = None
    halt_on_fixed_point: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.t_max is not None and self.t_max < 1:
            raise ContractViolation(f"t_max must be >= 1, got {self.t_max}")

    def resolve_t_max(self, p):
        return self.t_max if self.t_max is not None else default_t_max(p)


@dataclass(frozen=True)
class TraceEntry:
    t: int
    labels: np.ndarray
    loss_value: Optional[float]
    error_metric: Optional[float]
    block_summary: np.ndarray


@dataclass
class Trace:
    entries: list = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0
    final_block: Any = None

    @property
    def labels(self):
        return self.entries[-1].labels

    @property
    def losses(self):
        return [e.loss_value for e in self.entries]

    @property
    def errors(self):
        return [e.error_metric for e in self.entries]

    def __len__(self):
        return len(self.entries)


def _entry(model, t, labels, block, truth):
    loss = err = None
    if truth is not None:
        aligned = model.align(labels, truth.labels)
        loss = float(model.loss(aligned, truth.labels, truth.block))
        err = float(model.canonical_error(labels, truth.labels))
    summary = np.asarray(model.block_summary(block), dtype=float) if block is not None \
        else np.asarray([], dtype=float)
    return TraceEntry(t, np.array(labels, copy=True), loss, err, summary)


def one_step(model, labels, previous=None):
    """One synchronous update: refit the block at ``labels``, reassign all."""
    labels = model.validate_labels(labels)
    block = model.fit_block(labels, previous)
    return model.assign(block)


def ideal_step(model, truth_labels):
    """Assignment against the block fitted at the true labels."""
    if truth_labels is None:
        raise ContractViolation("ideal_step requires the true labels")
    return one_step(model, truth_labels)


def run_iterations(model, init_labels, cfg=None, truth=None):
    """Alternate block fit and label assignment starting from ``init_labels``.

    Parameters
    ----------
    model : RecoveryModel
    init_labels : array_like
    cfg : IterationConfig, optional
    truth : GroundTruth, optional
        Only used to fill in ``loss_value`` and ``error_metric``.

    Returns
    -------
    Trace
        Entry ``t`` holds ``z^(t)``; entry 0 is the initializer. When
        ``halt_on_fixed_point`` is set the run stops at the first ``t`` with
        ``z^(t) == z^(t-1)`` and ``converged`` is true.
    """
    cfg = cfg or IterationConfig()
    z = np.array(model.validate_labels(init_labels), copy=True)
    t_max = cfg.resolve_t_max(model.n_coords)
    trace = Trace()
    trace.entries.append(_entry(model, 0, z, None, truth))
    block = None
    for t in range(1, t_max + 1):
        block = model.fit_block(z, block)
        z_new = model.assign(block)
        trace.entries.append(_entry(model, t, z_new, block, truth))
        trace.iterations_run = t
        same = np.array_equal(z_new, z)
        z = z_new
        if same:
            trace.converged = True
            if cfg.halt_on_fixed_point:
                break
    trace.final_block = block
    return trace
