"""Command-line front end: ``discrete-recovery <model> --config sweep.json``.

A config is a single-level JSON object. The model's signal key (``delta``,
``beta``, ``snr`` or ``lambda``) takes a number or an ascending list.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

from .bench import KINDS, SweepSpec, rate_table, run_sweep, spec_to_dict
from .exceptions import ConfigError, ContractViolation

log = logging.getLogger("discrete_recovery")

COMMON_KEYS = {"kind", "replicates", "seed", "init", "flip_fraction", "t_max",
               "halt_on_fixed_point", "threads"}
INT_KEYS = {"p", "k", "d", "n", "s", "replicates", "seed", "t_max", "threads",
            "kmeans_restarts"}
FLOAT_KEYS = {"noise", "c_p", "penalty_A", "delta_floor", "flip_fraction"}

SUMMARY_FIELDS = ["value", "n_ok", "n_failed", "mean_error", "median_error", "stderr_error",
                  "ideal_error", "converged_fraction", "iteration_counts",
                  "mean_loss_trajectory"]


# --------------------------------------------------------------------------
# config


def _constraints(kind, P):
    """Return the first violated range constraint as a message, or None."""
    for key in ("p", "k", "d", "n", "s", "kmeans_restarts"):
        if key in P and P[key] < 1:
            return f"{key} must be >= 1"
    if P.get("noise", 1.0) < 0:
        return "noise must be >= 0"
    if kind == "gmm":
        if P["k"] > P["p"]:
            return "k must be ≤ p"
        if P["k"] > P["d"]:
            return "k must be ≤ d"
    if kind == "rank" and P["p"] < 2:
        return "p must be >= 2"
    if kind == "sign":
        if P["s"] > P["p"]:
            return "s must be ≤ p"
        if P.get("penalty_A", 1.5) <= 0:
            return "penalty_A must be > 0"
    if kind == "sync-zk" and P["k"] > P["p"]:
        return "k must be ≤ p"
    return None


def spec_from_dict(raw, kind=None):
    """Validate a flat config mapping and build a :class:`SweepSpec`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = kind or raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}")
    if raw.get("kind", kind) != kind:
        raise ConfigError(f"config is for {raw['kind']!r} but the subcommand is {kind!r}")
    K = KINDS[kind]
    allowed = COMMON_KEYS | set(K.required) | set(K.defaults) | {K.grid_key}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {', '.join(unknown)}")
    missing = [k for k in (*K.required, K.grid_key) if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys for {kind}: {', '.join(missing)}")
    for key, val in raw.items():
        is_int = isinstance(val, int) and not isinstance(val, bool)
        if key in INT_KEYS and not is_int and not (key == "t_max" and val is None):
            raise ConfigError(f"{key} must be an integer, got {val!r}")
        if key in FLOAT_KEYS and not (is_int or isinstance(val, float)):
            raise ConfigError(f"{key} must be a number, got {val!r}")
        if key == "halt_on_fixed_point" and not isinstance(val, bool):
            raise ConfigError(f"{key} must be true or false, got {val!r}")
        if key in ("kind", "init") and not isinstance(val, str):
            raise ConfigError(f"{key} must be a string, got {val!r}")
    grid = raw[K.grid_key]
    grid = grid if isinstance(grid, list) else [grid]
    if not grid or not all(isinstance(g, (int, float)) and not isinstance(g, bool)
                           for g in grid):
        raise ConfigError(f"{K.grid_key} must be a number or a non-empty list of numbers")
    if any(not math.isfinite(g) for g in grid):
        raise ConfigError(f"{K.grid_key} values must be finite")
    if grid != sorted(grid):
        raise ConfigError(f"{K.grid_key} values must be sorted ascending")
    params = {k: raw[k] for k in (*K.required, *K.defaults) if k in raw}
    problem = _constraints(kind, {**K.defaults, **params})
    if problem:
        raise ConfigError(problem)
    seed = raw.get("seed", 0)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        return SweepSpec(kind, params, tuple(grid),
                         replicates=raw.get("replicates", 1), seed=seed,
                         init=raw.get("init", "default"),
                         flip_fraction=float(raw.get("flip_fraction", 0.1)),
                         t_max=raw.get("t_max"),
                         halt_on_fixed_point=bool(raw.get("halt_on_fixed_point", True)),
                         threads=raw.get("threads", 1))
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path, kind=None):
    """Read a JSON sweep description from ``path``."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return spec_from_dict(raw, kind)


# --------------------------------------------------------------------------
# output


def fmt_float(x):
    """17 significant digits; enough for an exact round trip."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, list):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _json(v):
    # json.dumps would print floats with repr; keep the fixed 17-digit form
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return "null" if not math.isfinite(v) else fmt_float(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(x)}" for k, x in v.items()) + "}"
    return json.dumps(str(v))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def emit_report(report, fmt="csv", out_dir="out"):
    """Write ``summary.{csv,json}``, ``trajectories.csv`` and ``rate.csv``.

    Returns the list of written paths.
    """
    if fmt not in ("csv", "json"):
        raise ContractViolation(f"format must be csv or json, got {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ContractViolation(f"cannot create output directory {out_dir}: {exc.strerror}")
    paths = []
    summary = os.path.join(out_dir, f"summary.{fmt}")
    rows = [[getattr(pt, f) for f in SUMMARY_FIELDS] for pt in report.points]
    if fmt == "csv":
        _write_csv(summary, SUMMARY_FIELDS, rows)
    else:
        doc = {"spec": spec_to_dict(report.spec),
               "points": [dict(zip(SUMMARY_FIELDS, r)) for r in rows]}
        with open(summary, "w", encoding="utf-8", newline="") as fh:
            fh.write(_json(doc) + "\n")
    paths.append(summary)

    traj = os.path.join(out_dir, "trajectories.csv")
    trows = []
    for r in report.replicates:
        if r.failure is not None:
            continue
        for t, (loss, err) in enumerate(zip(r.losses, r.errors)):
            trows.append([r.grid_index, r.replicate, t, loss, err])
    _write_csv(traj, ["grid", "replicate", "iteration", "loss", "metric"], trows)
    paths.append(traj)

    rate = os.path.join(out_dir, "rate.csv")
    _write_csv(rate, ["value", "exponent", "mean_error", "ratio", "floored"],
               [[r.value, r.exponent, r.mean_error, r.ratio, r.floored]
                for r in rate_table(report)])
    paths.append(rate)
    return paths


# --------------------------------------------------------------------------
# entry point


def _setup_logging():
    level = {"debug": logging.DEBUG, "info": logging.INFO,
             "quiet": logging.ERROR}.get(os.environ.get("DR_LOG", "info").lower(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="discrete-recovery",
        description="Monte Carlo sweeps of iterative discrete structure recovery.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} sweep")
        sp.add_argument("--config", required=True, help="single-level JSON sweep file")
        sp.add_argument("--out", default="out", help="output directory (default ./out)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--replicates", type=int, help="override the replicate count")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of the summary file")
        sp.add_argument("--threads", type=int, help="worker threads (0 = one per CPU)")
    st = sub.add_parser("selftest", help="run the brute-force oracle and invariant checks")
    st.add_argument("--seeds", type=int, default=3, help="random instances per oracle check")
    return parser


def _override(spec, args):
    raw = spec_to_dict(spec)
    for key in ("seed", "replicates", "threads"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    return spec_from_dict(raw, spec.kind)


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest

        failed = 0
        for name, ok, detail in run_selftest(args.seeds):
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            failed += not ok
        print(f"{failed} check(s) failed" if failed else "all checks passed")
        return 1 if failed else 0
    try:
        spec = _override(parse_config(args.config, args.command), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    log.info("running %s: %d grid point(s) x %d replicate(s)", spec.kind, len(spec.grid),
             spec.replicates)
    report = run_sweep(spec)
    try:
        paths = emit_report(report, args.format, args.out)
    except ContractViolation as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 2
    key = spec.model_kind.grid_key
    print(f"{key:>12} {'mean_error':>12} {'ideal_error':>12} {'rate_ratio':>11}")
    for pt, row in zip(report.points, rate_table(report)):
        ratio = fmt_float(row.ratio)[:8] + (" (floor)" if row.floored else "")
        print(f"{pt.value:>12.6g} {pt.mean_error:>12.4e} {pt.ideal_error:>12.4e} {ratio:>11}")
    for path in paths:
        log.info("wrote %s", path)
    if report.failures:
        log.error("%d replicate(s) failed", len(report.failures))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
