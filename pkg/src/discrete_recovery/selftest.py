"""Fast oracle and invariant checks run by ``discrete-recovery selftest``."""

import itertools
import math

import numpy as np

from .bench import SweepSpec, _all_labelings, brute_force_map, generate, run_sweep
from .core import one_step
from .exceptions import DegenerateLabelsError
from .numerics import Rng, hungarian_min, slope_prox, sym_eig, truncated_svd

ORACLE_CASES = {
    "gmm": ({"p": 4, "k": 2, "d": 2}, 2.0),
    "rank": ({"p": 4}, 0.5),
    "sync-z2": ({"p": 3}, 1.0),
    "sync-zk": ({"p": 3, "k": 3}, 1.0),
    "mra": ({"d": 3, "p": 3}, 2.0),
    "sync-perm": ({"p": 2, "d": 3}, 1.0),
}

LOSS_CASES = {
    "gmm": ({"p": 30, "k": 3, "d": 4}, 3.0),
    "rank": ({"p": 12}, 0.4),
    "sign": ({"n": 40, "p": 20, "s": 3}, 2.0),
    "mra": ({"d": 6, "p": 20}, 3.0),
    "sync-z2": ({"p": 20}, 0.5),
    "sync-zk": ({"p": 20, "k": 4}, 0.5),
    "sync-perm": ({"p": 6, "d": 3}, 0.5),
}


def _step_or_error(model, z):
    try:
        return one_step(model, z)
    except DegenerateLabelsError:
        return DegenerateLabelsError


def oracle_mismatches(kind, params, value, seed):
    """Labelings where ``one_step`` disagrees with the brute-force table."""
    model = generate(kind, params, value, Rng(seed)).model()
    table = brute_force_map(model)
    bad = 0
    for z in _all_labelings(model):
        want = table.rows[tuple(z.ravel().tolist())]
        got = _step_or_error(model, z)
        if isinstance(want, type) or isinstance(got, type):
            bad += want is not got
        else:
            bad += not np.array_equal(want, got)
    return bad, len(table)


def _random_labels(model, rng):
    return np.stack([model.alphabet(j)[rng.integers(model.alphabet_size(j))]
                     for j in range(model.n_coords)])


def loss_hamming_violations(kind, params, value, seed, pairs=20):
    """Random label pairs breaking ``loss >= Delta_min^2 * hamming``."""
    rng = Rng(seed)
    inst = generate(kind, params, value, rng.child(0))
    model = inst.model()
    truth = inst.ground_truth
    dm2 = model.delta_min_sq(truth.block)
    bad = 0
    for _ in range(pairs):
        z = _random_labels(model, rng)
        loss = model.loss(z, truth.labels, truth.block)
        bad += loss < dm2 * model.hamming(z, truth.labels) * (1 - 1e-12)
    return bad


def hungarian_mismatches(n_cases=200, seed=0):
    rng = Rng(seed)
    bad = 0
    for _ in range(n_cases):
        d = 1 + rng.integers(6)
        C = np.floor(rng.uniform((d, d)) * 20)
        _, total = hungarian_min(C)
        best = min(sum(C[i, s[i]] for i in range(d)) for s in itertools.permutations(range(d)))
        bad += not math.isclose(total, best, abs_tol=1e-9)
    return bad


def prox_violations(n_cases=100, seed=0):
    """Firm non-expansiveness of the SLOPE prox on random pairs."""
    rng = Rng(seed)
    bad = 0
    for _ in range(n_cases):
        m = 1 + rng.integers(6)
        w = np.sort(rng.uniform(m) * 2)[::-1]
        u, v = rng.standard_normal(m) * 2, rng.standard_normal(m) * 2
        pu, pv = slope_prox(u, w), slope_prox(v, w)
        bad += np.dot(pu - pv, pu - pv) > np.dot(pu - pv, u - v) + 1e-12
    return bad


def eig_residual(seed=0):
    rng = Rng(seed)
    A = rng.standard_normal((8, 8))
    A = A + A.T
    vals, vecs = sym_eig(A, top_r=8)
    B = rng.standard_normal((6, 10))
    U, s, V = truncated_svd(B, 6)
    return max(np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - A),
               np.linalg.norm(U @ np.diag(s) @ V.T - B))


def sweep_is_deterministic():
    spec = SweepSpec("gmm", {"p": 60, "k": 2, "d": 3}, (3.0,), replicates=3, seed=5)
    a, b = run_sweep(spec), run_sweep(spec)
    return a.to_dict() == b.to_dict()


def run_selftest(seeds=3):
    """Return ``[(name, passed, detail), ...]``."""
    out = []
    for kind, (params, value) in ORACLE_CASES.items():
        bad = rows = 0
        for seed in range(seeds):
            b, n = oracle_mismatches(kind, params, value, seed)
            bad, rows = bad + b, rows + n
        out.append((f"oracle:{kind}", bad == 0, f"{bad}/{rows} labelings differ"))
    for kind, (params, value) in LOSS_CASES.items():
        bad = sum(loss_hamming_violations(kind, params, value, seed) for seed in range(seeds))
        out.append((f"loss-hamming:{kind}", bad == 0, f"{bad} violating pairs"))
    bad = hungarian_mismatches()
    out.append(("hungarian", bad == 0, f"{bad} mismatches vs brute force"))
    bad = prox_violations()
    out.append(("slope-prox", bad == 0, f"{bad} non-expansiveness violations"))
    res = eig_residual()
    out.append(("eig-svd", res <= 1e-8, f"reconstruction residual {res:.2e}"))
    out.append(("determinism", sweep_is_deterministic(), "repeat sweep"))
    return out
