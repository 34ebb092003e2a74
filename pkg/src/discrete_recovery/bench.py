"""Synthetic instances, Monte Carlo sweeps, brute-force oracles and rate tables."""

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import IterationConfig, default_t_max, ideal_step, run_iterations
from .exceptions import ContractViolation, DegenerateLabelsError
from .gmm import GmmModel, generate_gmm, gmm_spectral_init
from .groupsync import (PermModel, Z2Model, ZkModel, generate_perm, generate_z2,
                        generate_zk, perm_init, z2_init, zk_init)
from .mra import MraModel, generate_mra, mra_init
from .numerics import Rng
from .ranking import RankingModel, generate_ranking, rank_init
from .signrec import generate_sign, lambda_for_snr, sqrt_slope_init

log = logging.getLogger(__name__)

INITIALIZERS = ("default", "truth", "corrupt")
BRUTE_FORCE_MAX_ROWS = 4096


# --------------------------------------------------------------------------
# model registry


@dataclass(frozen=True)
class ModelKind:
    """How the sweep driver builds, initializes and scores one model family.

    ``generate(params, value, rng)`` returns an instance exposing ``model()``
    and ``ground_truth``; ``initialize(instance, params, rng)`` returns the
    model's own initial labels; ``exponent(params, value)`` is the theory
    rate exponent at grid value ``value``; ``units(params)`` is the number
    of label slots one error count is divided by.
    """

    name: str
    required: tuple
    defaults: dict
    grid_key: str
    generate: Callable
    initialize: Callable
    exponent: Callable
    units: Callable


def _gen_gmm(P, v, rng):
    return generate_gmm(P["p"], P["k"], P["d"], v, rng, noise=P["noise"])


def _gen_rank(P, v, rng):
    return generate_ranking(P["p"], v, rng, c_p=P["c_p"], noise=P["noise"])


def _gen_sign(P, v, rng):
    lam = lambda_for_snr(v, P["n"], P["p"], P["s"])
    return generate_sign(P["n"], P["p"], P["s"], lam, rng, noise=P["noise"])


def _gen_mra(P, v, rng):
    return generate_mra(P["d"], P["p"], rng, delta_min=v, noise=P["noise"],
                        floor=P["delta_floor"])


KINDS = {
    "gmm": ModelKind(
        "gmm", ("p", "k", "d"), {"noise": 1.0, "kmeans_restarts": 5}, "delta",
        _gen_gmm,
        lambda inst, P, rng: gmm_spectral_init(inst.Y, inst.k, rng, P["kmeans_restarts"]),
        lambda P, v: v * v / 8.0,
        lambda P: P["p"]),
    "rank": ModelKind(
        "rank", ("p",), {"noise": 1.0, "c_p": 0.0}, "beta",
        _gen_rank,
        lambda inst, P, rng: rank_init(inst.model().T),
        lambda P, v: P["p"] * v * v / 4.0,
        lambda P: P["p"]),
    "sign": ModelKind(
        "sign", ("n", "p", "s"), {"noise": 1.0, "penalty_A": 1.5}, "snr",
        _gen_sign,
        lambda inst, P, rng: sqrt_slope_init(inst.X, inst.Y, inst.lam, P["penalty_A"]),
        lambda P, v: v * v / 2.0,
        lambda P: P["s"]),
    "mra": ModelKind(
        "mra", ("d", "p"), {"noise": 1.0, "delta_floor": 0.1}, "delta",
        _gen_mra,
        lambda inst, P, rng: mra_init(inst.Y),
        lambda P, v: v * v / 8.0,
        lambda P: P["p"]),
    "sync-z2": ModelKind(
        "sync-z2", ("p",), {"noise": 1.0}, "lambda",
        lambda P, v, rng: generate_z2(P["p"], v, rng, noise=P["noise"]),
        lambda inst, P, rng: z2_init(inst.Y),
        lambda P, v: P["p"] * v * v / 2.0,
        lambda P: P["p"]),
    "sync-zk": ModelKind(
        "sync-zk", ("p", "k"), {"noise": 1.0, "kmeans_restarts": 5}, "lambda",
        lambda P, v, rng: generate_zk(P["p"], P["k"], v, rng, noise=P["noise"]),
        lambda inst, P, rng: zk_init(inst.Y, inst.k, rng, kmeans_restarts=P["kmeans_restarts"]),
        lambda P, v: P["p"] * v * v / 8.0,
        lambda P: P["p"]),
    "sync-perm": ModelKind(
        "sync-perm", ("p", "d"), {"noise": 1.0}, "lambda",
        lambda P, v, rng: generate_perm(P["p"], P["d"], v, rng, noise=P["noise"]),
        lambda inst, P, rng: perm_init(inst.Y, P["p"], P["d"]),
        lambda P, v: P["p"] * v * v / 2.0,
        lambda P: P["p"]),
}


def get_kind(name):
    try:
        return KINDS[name]
    except KeyError:
        raise ContractViolation(f"unknown model kind {name!r}; choose from {sorted(KINDS)}")


def generate(kind, params, value, rng):
    """Draw one synthetic instance of ``kind`` at grid value ``value``."""
    K = get_kind(kind)
    P = {**K.defaults, **params}
    missing = [k for k in K.required if k not in P]
    if missing:
        raise ContractViolation(f"missing parameters for {kind}: {missing}")
    return K.generate(P, value, rng if isinstance(rng, Rng) else Rng(rng))


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of a Monte Carlo sweep.

    Parameters
    ----------
    kind : str
        Key of :data:`KINDS`.
    params : dict
        Instance dimensions and model knobs (``p``, ``k``, ``d``, ``n``,
        ``s``, ``noise``, ...).
    grid : tuple of float
        Values of the kind's signal parameter, sorted ascending.
    init : {"default", "truth", "corrupt"}
    flip_fraction : float
        Fraction of coordinates relabeled by the ``"corrupt"`` initializer.
    threads : int
        Worker threads for replicates; 0 means one per CPU.
    """

    kind: str
    params: dict
    grid: tuple
    replicates: int = 1
    seed: int = 0
    init: str = "default"
    flip_fraction: float = 0.1
    t_max: Optional[int] = None
    halt_on_fixed_point: bool = True
    threads: int = 1

    def __post_init__(self):
        get_kind(self.kind)
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.replicates < 1:
            raise ContractViolation("replicates must be >= 1")
        if list(self.grid) != sorted(self.grid):
            raise ContractViolation("grid must be sorted ascending")
        if self.init not in INITIALIZERS:
            raise ContractViolation(f"init must be one of {INITIALIZERS}")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ContractViolation("flip_fraction must lie in [0, 1]")
        if self.threads < 0:
            raise ContractViolation("threads must be >= 0")

    @property
    def model_kind(self):
        return KINDS[self.kind]

    def resolved_params(self):
        return {**self.model_kind.defaults, **self.params}


@dataclass
class ReplicateResult:
    grid_index: int
    replicate: int
    losses: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    ideal_error: float = float("nan")
    ideal_loss: float = float("nan")
    failure: Optional[str] = None

    @property
    def final_error(self):
        return self.errors[-1] if self.errors else float("nan")

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else float("nan")


@dataclass
class GridPointSummary:
    value: float
    n_ok: int
    n_failed: int
    mean_error: float
    median_error: float
    stderr_error: float
    mean_loss_trajectory: list
    ideal_error: float
    iteration_counts: list
    converged_fraction: float


@dataclass
class ExperimentReport:
    spec: SweepSpec
    points: list
    replicates: list

    @property
    def failures(self):
        return [r for r in self.replicates if r.failure is not None]

    def to_dict(self):
        return {"spec": spec_to_dict(self.spec),
                "points": [asdict(pt) for pt in self.points]}


def corrupt_labels(model, labels, fraction, rng):
    """Move ``round(fraction * p)`` coordinates to a different random label."""
    z = np.array(labels, copy=True)
    p = model.n_coords
    m = int(round(fraction * p))
    for j in rng.choice(p, m):
        if isinstance(model, PermModel):
            while True:
                cand = rng.permutation(model.d)
                if model.d == 1 or not np.array_equal(cand, z[j]):
                    break
            z[j] = cand
            continue
        others = [a for a in model.alphabet(j) if a != z[j]]
        if others:
            z[j] = others[rng.integers(len(others))]
    return z


def _resolve_t_max(spec, model):
    return spec.t_max if spec.t_max is not None else default_t_max(model.n_coords)


def run_replicate(spec, g, r):
    """One generate/initialize/iterate run; failures are caught and coded."""
    res = ReplicateResult(g, r)
    P = spec.resolved_params()
    rng = Rng(spec.seed, (g, r))
    try:
        inst = spec.model_kind.generate(P, spec.grid[g], rng.child(0))
        model = inst.model()
        truth = inst.ground_truth
        if spec.init == "default":
            z0 = spec.model_kind.initialize(inst, P, rng.child(1))
        elif spec.init == "truth":
            z0 = truth.labels
        else:
            z0 = corrupt_labels(model, truth.labels, spec.flip_fraction, rng.child(1))
        cfg = IterationConfig(_resolve_t_max(spec, model), spec.halt_on_fixed_point, spec.seed)
        trace = run_iterations(model, z0, cfg, truth)
        res.losses = trace.losses
        res.errors = trace.errors
        res.iterations = trace.iterations_run
        res.converged = trace.converged
        z_ideal = ideal_step(model, truth.labels)
        res.ideal_error = model.canonical_error(z_ideal, truth.labels)
        res.ideal_loss = model.loss(model.align(z_ideal, truth.labels), truth.labels, truth.block)
    except Exception as exc:  # recorded, never aborts the sweep
        res.failure = type(exc).__name__
        log.warning("grid %d replicate %d failed: %s: %s", g, r, res.failure, exc)
    return res


def _summarize(spec, g, results):
    ok = [r for r in results if r.failure is None]
    t_cap = spec.t_max if spec.t_max is not None else default_t_max(spec.resolved_params()["p"])
    if ok:
        errs = np.array([r.final_error for r in ok])
        mean, median = float(errs.mean()), float(np.median(errs))
        stderr = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
        # a run that stopped at a fixed point keeps its last loss afterwards
        L = max(len(r.losses) for r in ok)
        traj = np.array([r.losses + [r.losses[-1]] * (L - len(r.losses)) for r in ok])
        mean_traj = [float(x) for x in traj.mean(axis=0)]
        ideal = float(np.mean([r.ideal_error for r in ok]))
        conv = float(np.mean([r.converged for r in ok]))
        counts = np.bincount([r.iterations for r in ok], minlength=t_cap + 1)
    else:
        mean = median = stderr = ideal = conv = float("nan")
        mean_traj = []
        counts = np.zeros(t_cap + 1, dtype=int)
    return GridPointSummary(spec.grid[g], len(ok), len(results) - len(ok), mean, median,
                            stderr, mean_traj, ideal, [int(c) for c in counts], conv)


def run_sweep(spec):
    """Run every (grid point, replicate) pair and aggregate.

    Each pair gets its own stream ``Rng(seed, (grid_index, replicate))``, so
    the report does not depend on ``threads`` or completion order.
    """
    tasks = [(g, r) for g in range(len(spec.grid)) for r in range(spec.replicates)]
    threads = spec.threads or os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: run_replicate(spec, *t), tasks))
    else:
        results = [run_replicate(spec, g, r) for g, r in tasks]
    points = []
    for g in range(len(spec.grid)):
        chunk = results[g * spec.replicates:(g + 1) * spec.replicates]
        points.append(_summarize(spec, g, chunk))
    return ExperimentReport(spec, points, results)


def ideal_error(model, instance):
    """Quotiented error of the ideal step on a single instance."""
    truth = instance.ground_truth
    return model.canonical_error(ideal_step(model, truth.labels), truth.labels)


@dataclass(frozen=True)
class RateRow:
    value: float
    exponent: float
    mean_error: float
    ratio: float
    floored: bool


def rate_table(report):
    """``-log(mean error) / exponent`` per grid point.

    Grid points with zero observed errors use the resolution
    ``1 / (replicates * units)`` instead and are flagged as floored (the
    ratio is then a lower bound).
    """
    spec = report.spec
    P = spec.resolved_params()
    K = spec.model_kind
    floor = 1.0 / (spec.replicates * K.units(P))
    rows = []
    for pt in report.points:
        x = K.exponent(P, pt.value)
        err = pt.mean_error
        floored = not err > 0.0 if not math.isnan(err) else False
        used = floor if floored else err
        ratio = -math.log(used) / x if x > 0 and not math.isnan(used) else float("nan")
        rows.append(RateRow(pt.value, x, err, ratio, floored))
    return rows


# --------------------------------------------------------------------------
# serialization helpers shared with the cli


def spec_to_dict(spec):
    d = {"kind": spec.kind, **spec.params, spec.model_kind.grid_key: list(spec.grid),
         "replicates": spec.replicates, "seed": spec.seed, "init": spec.init,
         "flip_fraction": spec.flip_fraction, "halt_on_fixed_point": spec.halt_on_fixed_point,
         "threads": spec.threads}
    if spec.t_max is not None:
        d["t_max"] = spec.t_max
    return d


# --------------------------------------------------------------------------
# brute-force oracle


@dataclass
class BruteForceTable:
    """One assignment step for every labeling, from independent code.

    ``rows`` maps a labeling (as a tuple) to the next labeling, or to the
    exception class raised by the block fit.
    """

    rows: dict

    def __len__(self):
        return len(self.rows)

    def step(self, z):
        out = self.rows[_key(z)]
        if isinstance(out, type):
            raise out("brute-force block fit is undefined at this labeling")
        return out

    def fixed_point(self, z, max_steps=None):
        """Iterate the table map from ``z`` until it stops changing."""
        max_steps = max_steps or len(self.rows) + 1
        z = np.asarray(z)
        for _ in range(max_steps):
            nxt = self.step(z)
            if np.array_equal(nxt, z):
                return nxt
            z = nxt
        return z


def _key(z):
    return tuple(np.asarray(z).ravel().tolist())


def _lstsq(design, target):
    if not np.any(design):
        raise DegenerateLabelsError("design is identically zero")
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return coef


def _argmin_first(values):
    best, arg = None, None
    for idx, v in enumerate(values):
        if best is None or v < best:
            best, arg = v, idx
    return arg


def _bf_gmm(model, z):
    Y, k = model.Y, model.k
    d, p = Y.shape
    centers = np.empty((d, k))
    for a in range(k):
        # operator Y[:, j] = B[:, z_j] decouples into one mean per cluster;
        # plain means keep an all-in-one cluster bitwise equal to the
        # global-mean fallback, so the resulting exact tie resolves to 0
        members = [j for j in range(p) if z[j] == a]
        centers[:, a] = Y[:, members].mean(axis=1) if members else Y.mean(axis=1)
    return np.array([_argmin_first([np.sum((Y[:, j] - centers[:, a]) ** 2) for a in range(k)])
                     for j in range(p)])


def _bf_rank(model, z):
    Y = model.Y
    p = Y.shape[0]
    pairs = [(i, j) for i in range(p) for j in range(p) if i != j]
    design = np.array([[z[i] - z[j]] for i, j in pairs], dtype=float)
    beta = _lstsq(design, np.array([Y[i, j] for i, j in pairs]))[0]
    out = []
    for j in range(p):
        T = sum(Y[j, i] - Y[i, j] for i in range(p) if i != j) / math.sqrt(2 * (p - 1))
        nu = [2 * p * beta * (a - (p + 1) / 2) / math.sqrt(2 * (p - 1)) for a in range(1, p + 1)]
        out.append(1 + _argmin_first([(T - v) ** 2 for v in nu]))
    return np.array(out)


def _bf_z2(model, z):
    Y = model.Y
    p = Y.shape[0]
    design = np.outer(z, z).reshape(-1, 1).astype(float)
    lam = _lstsq(design, Y.reshape(-1))[0]
    B = lam * np.asarray(z, dtype=float)
    cands = [1, -1]
    return np.array([cands[_argmin_first([np.sum((Y[:, j] - a * B) ** 2) for a in cands])]
                     for j in range(p)])


def _bf_zk(model, z):
    Y, k = model.Y, model.k
    p = Y.shape[0]
    pairs = [(i, j) for i in range(p) for j in range(p) if i != j]
    design = np.array([[(z[i] - z[j]) % k] for i, j in pairs], dtype=float)
    lam = _lstsq(design, np.array([Y[i, j] for i, j in pairs]))[0]
    out = []
    for j in range(p):
        costs = [sum((Y[i, j] - lam * ((z[i] - a) % k)) ** 2 for i in range(p))
                 for a in range(k)]
        out.append(_argmin_first(costs))
    return np.array(out)


def _bf_mra(model, z):
    Y = model.Y
    d, p = Y.shape
    # operator Y[i, j] = theta[(i + z_j) mod d]
    design = np.zeros((d * p, d))
    for j in range(p):
        for i in range(d):
            design[j * d + i, (i + z[j]) % d] = 1.0
    theta = _lstsq(design, Y.T.reshape(-1))
    out = []
    for j in range(p):
        costs = [sum((Y[i, j] - theta[(i + a) % d]) ** 2 for i in range(d)) for a in range(d)]
        out.append(_argmin_first(costs))
    return np.array(out)


def _bf_perm(model, Z):
    Y, d, p = model.Y, model.d, model.p
    dense = []
    for j in range(p):
        M = np.zeros((d, d))
        M[Z[j], np.arange(d)] = 1.0
        dense.append(M)
    mask = np.ones((p * d, p * d), dtype=bool)
    for i in range(p):
        mask[i * d:(i + 1) * d, i * d:(i + 1) * d] = False
    full = np.vstack(dense)
    design = (full @ full.T)[mask].reshape(-1, 1)
    lam = _lstsq(design, Y[mask])[0]
    B = lam * full
    perms = [np.array(s) for s in itertools.permutations(range(d))]
    out = []
    for j in range(p):
        Yj = Y[:, j * d:(j + 1) * d]
        costs = []
        for s in perms:
            U = np.zeros((d, d))
            U[s, np.arange(d)] = 1.0
            costs.append(np.sum((Yj - B @ U.T) ** 2))
        out.append(perms[_argmin_first(costs)])
    return np.stack(out)


_BRUTE = {GmmModel: _bf_gmm, RankingModel: _bf_rank, Z2Model: _bf_z2, ZkModel: _bf_zk,
          MraModel: _bf_mra, PermModel: _bf_perm}


def _all_labelings(model):
    alph = [model.alphabet(j) for j in range(model.n_coords)]
    for combo in itertools.product(*alph):
        yield np.array(combo)


def brute_force_map(model):
    """Tabulate one assignment step over every labeling of a tiny instance.

    The block is refitted by ``numpy.linalg.lstsq`` on an explicitly built
    linear operator and each coordinate scans its alphabet in order, taking
    the first minimizer. Sign recovery is not supported because its
    assignment is a threshold rule rather than a template match.
    """
    fn = _BRUTE.get(type(model))
    if fn is None:
        raise ContractViolation(f"no brute-force oracle for {type(model).__name__}")
    n_rows = 1
    for j in range(model.n_coords):
        n_rows *= model.alphabet_size(j)
    if n_rows > BRUTE_FORCE_MAX_ROWS:
        raise ContractViolation(f"{n_rows} labelings exceed the {BRUTE_FORCE_MAX_ROWS} cap")
    rows = {}
    for z in _all_labelings(model):
        try:
            rows[_key(z)] = fn(model, z)
        except DegenerateLabelsError:
            rows[_key(z)] = DegenerateLabelsError
    return BruteForceTable(rows)

