"""Iterative recovery of discrete structure in linear models.

One alternating loop (least-squares block fit, then per-coordinate label
assignment) instantiated for Gaussian mixture clustering, approximate
ranking, sign recovery, multireference alignment and Z_2, Z/kZ and
permutation synchronization.
"""

from .core import (GroundTruth, IterationConfig, RecoveryModel, Trace, TraceEntry,
                   default_t_max, ideal_step, one_step, run_iterations)
from .estimators import (FeatureMatchingRanker, IterativeSignRecovery, LloydClustering,
                         MultireferenceAligner, PermutationSynchronizer, Z2Synchronizer,
                         ZkSynchronizer)
from .exceptions import (ConfigError, ContractViolation, ConvergenceError,
                         DegenerateLabelsError, SupportTooLargeError)
from .numerics import RNG_ALGORITHM, Rng

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractViolation", "ConvergenceError", "DegenerateLabelsError",
    "FeatureMatchingRanker", "GroundTruth", "IterationConfig", "IterativeSignRecovery",
    "LloydClustering", "MultireferenceAligner", "PermutationSynchronizer", "RNG_ALGORITHM",
    "RecoveryModel", "Rng", "SupportTooLargeError", "Trace", "TraceEntry", "Z2Synchronizer",
    "ZkSynchronizer", "default_t_max", "ideal_step", "one_step", "run_iterations",
]
