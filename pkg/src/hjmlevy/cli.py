"""Command-line front end: ``hjm-levy <command> --config FILE``.

Commands
--------
classify        regime verdict, certificate and growth-gap table
exponent-table  J, J' and J'' on a logarithmic grid
simulate        per-seed jump-path summaries
solve           per-seed forward-rate fields and iteration diagnostics
explode-study   dominance of the blow-up comparison function across f0 levels and grids

Seeds are processed by a worker pool but results are gathered and written
in seed order, so output bytes do not depend on the number of workers.
Exit codes: 0 success, 2 config error, 3 numeric error, 4 regime mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache, partial
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import comparison_bundle, comparison_dominates
from .config import ExperimentConfig, load_config
from .errors import ConfigError, HJMLevyError, NumericOverflow, RegimeMismatch
from .exponent import ExponentEvaluator
from .measures import LevyMeasureSpec, VolatilitySpec, validate
from .regime import Verdict, bound_constant, classify, fit_lower_power
from .simulate import a_field, initial_curve, path_seed, simulate_path
from .solver import GridSpec, march, solve_fixed_point

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_REGIME = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# output helpers

def fmt(x) -> str:
    """Cell text: ``%.12g`` for floats, empty for NaN/None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else "%.12g" % x
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_field(path: Path, times: np.ndarray, values: np.ndarray) -> None:
    """Square matrix with the row time in the first column; NaN cells stay empty."""
    header = ["t"] + ["T=" + fmt(float(T)) for T in times]
    write_csv(path, header, ([float(t)] + [float(v) for v in row] for t, row in zip(times, values)))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_manifest(out: Path, command: str, cfgs, seeds=None, aggregate=None) -> Path:
    files = {}
    for p in sorted(out.rglob("*.csv")):
        files[p.relative_to(out).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    doc = {
        "command": command,
        "version": __version__,
        "config": [c.resolved() for c in cfgs] if len(cfgs) > 1 else cfgs[0].resolved(),
        "seeds": seeds if seeds is not None else [],
        "aggregate": aggregate if aggregate is not None else {},
        "files": files,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# per-process caches (safe: keyed on frozen, hashable specs)

@lru_cache(maxsize=8)
def _evaluator(spec: LevyMeasureSpec, vol: VolatilitySpec) -> ExponentEvaluator:
    return ExponentEvaluator(validate(spec, vol))


@lru_cache(maxsize=16)
def _bundle(x: float, gamma: float, alpha: float, horizon: float, n: int):
    return comparison_bundle(x, x, gamma, alpha, GridSpec(horizon, n))


def _run_seeds(fn, indices, workers: int):
    if workers <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    chunk = max(1, len(indices) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=chunk))


def _comparison_params(cfg: ExperimentConfig, ev: ExponentEvaluator):
    """(alpha, gamma, beta) from the config, falling back to the power certificate."""
    c = cfg.comparison
    cert = None
    if c.alpha is None or c.gamma is None or c.beta is None:
        cert = fit_lower_power(ev)
        if cert is None:
            return None
    alpha = c.alpha if c.alpha is not None else cert.alpha
    gamma = c.gamma if c.gamma is not None else cert.gamma
    beta = c.beta if c.beta is not None else cert.beta
    return alpha, gamma, beta


# ---------------------------------------------------------------------------
# classify

def cmd_classify(cfgs: list[ExperimentConfig], out: Path) -> int:
    rows = []
    for k, cfg in enumerate(cfgs):
        ev = _evaluator(cfg.measure, cfg.volatility)
        rep = classify(ev.measure, cfg.volatility, cfg.horizon, ev, threshold=cfg.threshold)
        cert = rep.certificate
        k_sup = float(np.max(initial_curve(cfg.f0)(GridSpec(cfg.horizon, cfg.n).times)))
        c_bound = bound_constant(ev, k_sup, cfg.volatility, cfg.horizon)
        name = Path(cfg.source).stem if len(cfgs) > 1 else "gap"
        rows.append([
            Path(cfg.source).name, cfg.measure.kind.value, cfg.measure.rho, rep.verdict.value,
            None if cert is None else cert.alpha, None if cert is None else cert.gamma,
            None if cert is None else cert.beta, "" if cert is None else cert.source,
            rep.gap_max, rep.gap_argmax, k_sup, c_bound, "; ".join(rep.notes),
        ])
        gap_name = "gap.csv" if len(cfgs) == 1 else f"gap_{k:02d}_{name}.csv"
        write_csv(out / gap_name, ["z", "j_prime", "gap", "certificate_bound"], rep.rows())
        print(f"{cfg.source}: {rep.verdict.value}")
    write_csv(out / "classify.csv",
              ["config", "kind", "rho", "verdict", "alpha", "gamma", "beta", "certificate",
               "gap_max", "gap_argmax", "K", "bound_constant", "notes"], rows)
    write_manifest(out, "classify", cfgs, aggregate={"verdicts": [r[3] for r in rows]})
    return EXIT_OK


# ---------------------------------------------------------------------------
# exponent-table

def cmd_exponent_table(cfg: ExperimentConfig, out: Path) -> int:
    ev = _evaluator(cfg.measure, cfg.volatility)
    z = np.concatenate([[0.0], np.logspace(math.log10(cfg.z_min), math.log10(cfg.z_max),
                                          cfg.table_points)])
    ok = z <= ev.overflow_threshold
    cols = []
    for fn in (ev.j, ev.j_prime, ev.j_second):
        vals = np.full(z.shape, math.inf)
        vals[ok] = fn(z[ok])
        cols.append(vals)
    write_csv(out / "exponent_table.csv", ["z", "j", "j_prime", "j_second"], zip(z, *cols))
    write_manifest(out, "exponent-table", [cfg],
                   aggregate={"j_prime_0": float(cols[1][0]), "j_prime_limit": ev.j_prime_limit,
                              "overflow_threshold": ev.overflow_threshold})
    print(f"wrote {z.size} rows to {out / 'exponent_table.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _simulate_seed(cfg: ExperimentConfig, index: int) -> dict:
    seed = path_seed(cfg.master_seed, index)
    m = validate(cfg.measure, cfg.volatility)
    rec = {"index": index, "seed": seed}
    try:
        path = simulate_path(m, cfg.horizon, cfg.eps, seed)
        a = a_field(path, cfg.f0, cfg.volatility, GridSpec(cfg.horizon, cfg.n))
        rec.update(status="ok", jumps=int(path.sizes.size), terminal_value=path.terminal_value(),
                   min_jump=float(path.sizes.min()) if path.sizes.size else math.nan,
                   max_jump=float(path.sizes.max()) if path.sizes.size else math.nan,
                   compensator_rate=path.compensator_rate, sup_a=a.sup_a, error="")
    except HJMLevyError as exc:
        rec.update(status="error", jumps=0, terminal_value=math.nan, min_jump=math.nan,
                   max_jump=math.nan, compensator_rate=math.nan, sup_a=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    return rec


def cmd_simulate(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    recs = _run_seeds(partial(_simulate_seed, cfg), list(range(cfg.seed_count)), workers)
    cols = ["index", "seed", "status", "jumps", "terminal_value", "min_jump", "max_jump",
            "compensator_rate", "sup_a", "error"]
    write_csv(out / "simulate.csv", cols, ([r[c] for c in cols] for r in recs))
    ok = [r for r in recs if r["status"] == "ok"]
    agg = {"paths": len(recs), "errors": len(recs) - len(ok),
           "mean_jumps": float(np.mean([r["jumps"] for r in ok])) if ok else math.nan,
           "mean_terminal_value": float(np.mean([r["terminal_value"] for r in ok])) if ok else math.nan}
    write_manifest(out, "simulate", [cfg], [{c: r[c] for c in cols} for r in recs], agg)
    print(f"simulated {len(recs)} paths, {agg['errors']} errors")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

def _solve_seed(cfg: ExperimentConfig, cmp_params, index: int) -> dict:
    seed = path_seed(cfg.master_seed, index)
    ev = _evaluator(cfg.measure, cfg.volatility)
    grid = GridSpec(cfg.horizon, cfg.n)
    rec = {"index": index, "seed": seed, "status": "error", "iterations": 0, "sup_a": math.nan,
           "sup_f": math.nan, "bound_c": math.nan, "jumps": 0, "reason": "", "dominates": None,
           "certified": None, "f_inner": math.nan, "h_inner": math.nan,
           "field": None, "history": []}
    try:
        path = simulate_path(ev.measure, cfg.horizon, cfg.eps, seed)
        a = a_field(path, cfg.f0, cfg.volatility, grid)
        rec.update(jumps=int(path.sizes.size), sup_a=a.sup_a)
        res = solve_fixed_point(a, ev, cfg.volatility, max_iter=cfg.max_iter, tol=cfg.tol,
                                ceiling=cfg.ceiling)
        c = bound_constant(ev, a.sup_a, cfg.volatility, cfg.horizon)
        rec.update(status="converged" if res.converged else "diverged", iterations=res.iterations,
                   sup_f=res.field.sup, bound_c=math.nan if c is None else c, reason=res.reason,
                   field=res.field.values, history=res.history)
        if cmp_params is not None:
            alpha, gamma, beta = cmp_params
            x = cfg.comparison.corner if cfg.comparison.corner is not None else cfg.horizon
            b = _bundle(x, gamma, alpha, cfg.horizon, cfg.n)
            rep = comparison_dominates(res.field, b, a, beta, cfg.comparison.deltas)
            rec.update(dominates=rep.dominates, certified=rep.certified,
                       f_inner=rep.f_inner, h_inner=rep.h_inner)
    except HJMLevyError as exc:
        rec["reason"] = f"{type(exc).__name__}: {exc}"
    return rec


def cmd_solve(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    ev = _evaluator(cfg.measure, cfg.volatility)
    cmp_params = _comparison_params(cfg, ev) if cfg.comparison.check else None
    recs = _run_seeds(partial(_solve_seed, cfg, cmp_params), list(range(cfg.seed_count)), workers)
    times = GridSpec(cfg.horizon, cfg.n).times
    for r in recs:
        if r["field"] is not None:
            write_field(out / "fields" / f"field_{r['index']:04d}.csv", times, r["field"])
            write_csv(out / "diagnostics" / f"iterations_{r['index']:04d}.csv",
                      ["iter", "sup", "delta"], r["history"])
    cols = ["index", "seed", "status", "iterations", "jumps", "sup_a", "sup_f", "bound_c",
            "dominates", "certified", "f_inner", "h_inner", "reason"]
    write_csv(out / "summary.csv", cols, ([r[c] for c in cols] for r in recs))
    counts = {s: sum(r["status"] == s for r in recs) for s in ("converged", "diverged", "error")}
    agg = {"seeds": len(recs), **counts,
           "converged_frequency": counts["converged"] / len(recs),
           "bound_respected": all(r["sup_f"] <= r["bound_c"] * (1 + 1e-9)
                                  for r in recs if r["status"] == "converged"),
           "comparison": None if cmp_params is None else dict(zip(("alpha", "gamma", "beta"), cmp_params))}
    if cmp_params is not None:
        agg["dominance_frequency"] = sum(bool(r["dominates"]) for r in recs) / len(recs)
    seeds = [{c: r[c] for c in cols} for r in recs]
    write_manifest(out, "solve", [cfg], seeds, agg)
    print(f"solved {len(recs)} seeds: {counts['converged']} converged, "
          f"{counts['diverged']} diverged, {counts['error']} errors")
    return EXIT_OK


# ---------------------------------------------------------------------------
# explode-study

def _explode_seed(cfg: ExperimentConfig, params, index: int) -> list[dict]:
    alpha, gamma, beta = params
    seed = path_seed(cfg.master_seed, index)
    ev = _evaluator(cfg.measure, cfg.volatility)
    x = cfg.comparison.corner if cfg.comparison.corner is not None else cfg.horizon
    rows = []
    try:
        path = simulate_path(ev.measure, cfg.horizon, cfg.eps, seed)
    except HJMLevyError as exc:
        return [{"index": index, "seed": seed, "f0": f0, "n": n, "status": "error",
                 "error": f"{type(exc).__name__}: {exc}"}
                for f0 in cfg.f0_levels for n in cfg.grid_sizes]
    for n in cfg.grid_sizes:
        grid = GridSpec(cfg.horizon, n)
        bundle = _bundle(x, gamma, alpha, cfg.horizon, n)
        try:
            unit = a_field(path, 1.0, cfg.volatility, grid)
        except HJMLevyError as exc:
            rows.extend({"index": index, "seed": seed, "f0": f0, "n": n, "status": "error",
                         "error": f"{type(exc).__name__}: {exc}"} for f0 in cfg.f0_levels)
            continue
        for f0 in cfg.f0_levels:
            a = unit.scaled(f0)
            f = march(a, ev, cfg.volatility)
            rep = comparison_dominates(f, bundle, a, beta, cfg.comparison.deltas)
            rows.append({"index": index, "seed": seed, "f0": f0, "n": n, "status": "ok",
                         "exploded": f.exploded, "dominates": rep.dominates,
                         "certified": rep.certified, "hypothesis_margin": rep.hypothesis_margin,
                         "smallest_delta": rep.smallest_verified_delta,
                         "implied_constant": rep.implied_constant,
                         "f_inner": rep.f_inner, "h_inner": rep.h_inner, "sup_a": a.sup_a,
                         "error": ""})
    order = {(f0, n): k for k, (f0, n) in
             enumerate((f0, n) for f0 in cfg.f0_levels for n in cfg.grid_sizes)}
    return sorted(rows, key=lambda r: order[(r["f0"], r["n"])])


def summarise_study(rows: list[dict], levels, sizes) -> list[dict]:
    out = []
    for f0 in levels:
        for n in sizes:
            sel = [r for r in rows if r["f0"] == f0 and r["n"] == n]
            ok = [r for r in sel if r["status"] == "ok"]
            f_in = np.array([r["f_inner"] for r in ok]) if ok else np.array([math.nan])
            out.append({
                "f0": f0, "n": n, "seeds": len(sel), "errors": len(sel) - len(ok),
                "dominance_frequency": sum(r["dominates"] for r in ok) / len(sel) if sel else math.nan,
                "certified_frequency": sum(r["certified"] for r in ok) / len(sel) if sel else math.nan,
                "exploded_frequency": sum(r["exploded"] for r in ok) / len(sel) if sel else math.nan,
                "median_f_inner": float(np.median(f_in)),
                "max_f_inner": float(np.max(f_in)),
                "h_inner": ok[0]["h_inner"] if ok else math.nan,
            })
    return out


def cmd_explode_study(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    ev = _evaluator(cfg.measure, cfg.volatility)
    rep = classify(ev.measure, cfg.volatility, cfg.horizon, ev, threshold=cfg.threshold)
    if rep.verdict is not Verdict.NON_EXISTENCE:
        raise RegimeMismatch(f"explode-study needs a NonExistence configuration, "
                             f"classifier says {rep.verdict.value}")
    params = _comparison_params(cfg, ev)
    if params is None:
        raise RegimeMismatch("no power certificate available for the comparison function")
    per_seed = _run_seeds(partial(_explode_seed, cfg, params), list(range(cfg.seed_count)), workers)
    rows = [r for block in per_seed for r in block]
    cols = ["index", "seed", "f0", "n", "status", "exploded", "dominates", "certified",
            "hypothesis_margin", "smallest_delta", "implied_constant", "f_inner", "h_inner",
            "sup_a", "error"]
    write_csv(out / "explode.csv", cols, ([r.get(c) for c in cols] for r in rows))
    summary = summarise_study(rows, cfg.f0_levels, cfg.grid_sizes)
    scols = list(summary[0].keys())
    write_csv(out / "explode_summary.csv", scols, ([s[c] for c in scols] for s in summary))
    finest = max(cfg.grid_sizes)
    freq = {repr(s["f0"]): s["dominance_frequency"] for s in summary if s["n"] == finest}
    agg = {"alpha": params[0], "gamma": params[1], "beta": params[2],
           "dominance_frequency_finest_grid": freq, "summary": summary}
    write_manifest(out, "explode-study", [cfg], aggregate=agg)
    for s in summary:
        print(f"f0={s['f0']:g} n={s['n']}: dominance {s['dominance_frequency']:.3f}, "
              f"exploded {s['exploded_frequency']:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjm-levy", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("classify", "exponent-table", "simulate", "solve", "explode-study"):
        sp = sub.add_parser(name)
        if name == "classify":
            sp.add_argument("--config", action="append", required=True, metavar="PATH",
                            help="config file; repeat to classify several")
        else:
            sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR", help="output directory (default from config)")
        sp.add_argument("--seeds", type=int, metavar="N", help="override the seed count")
        sp.add_argument("--master-seed", type=int, metavar="U64", help="override the master seed")
        sp.add_argument("--workers", type=int, metavar="N",
                        help="worker processes (default $HJM_WORKERS or 1)")
    return p


def _workers(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("HJM_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HJM_WORKERS={env!r} is not an integer", source="<environment>") from None
    return 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = _workers(args.workers)
        paths = args.config if isinstance(args.config, list) else [args.config]
        cfgs = [load_config(p).with_overrides(seeds=args.seeds, master_seed=args.master_seed,
                                              out_dir=args.out) for p in paths]
        out = Path(cfgs[0].out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "classify":
            return cmd_classify(cfgs, out)
        cfg = cfgs[0]
        if args.command == "exponent-table":
            return cmd_exponent_table(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, workers)
        if args.command == "solve":
            return cmd_solve(cfg, out, workers)
        return cmd_explode_study(cfg, out, workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (HJMLevyError, ArithmeticError) as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
