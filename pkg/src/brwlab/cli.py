"""Command-line front door: verification, simulation, and exact-table commands.

Every command resolves its parameters into a config dict that is embedded in
the JSON report, so a report is reproducible from itself. Exit codes:
0 = all checks passed, 1 = violations found, 2 = usage error, 3 = a resource
cap was exceeded.

Worker count only schedules fixed work blocks and is deliberately excluded
from the report config: for a fixed seed the report bytes are identical at
any worker count.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict

import numpy as np

from .brw import (
    DEFAULT_POPULATION_CAP,
    batch_coupled_summaries,
    batch_site_counts,
    batch_tagged_summaries,
    batch_visited_counts,
    coupled_simulate,
    coupling_violations,
    simulate,
)
from .errors import InvariantViolationError, ResourceCapError, UsageError
from .exact_dist import (
    DEFAULT_CAPS,
    ExactCaps,
    ProcessParams,
    descendant_pmf,
    duad_pairs,
    joint_pmf_on_subset,
    mass_gap,
    verify_monotonicity_exact,
    visited_pmf,
)
from .lattice import Point, build_trapezoid
from .percolation import DEFAULT_ENUM_BUDGET, enumerate_verify_B, sample_verify_B, simulate_embedded
from .stats_mc import EmpiricalDist, RandomStreamSpec, chi_square_equality, dominance_check, stream

SCHEMA_VERSION = 1

# stream-index lanes keeping independent sampling arms on disjoint streams
LANE_A = 0
LANE_B = 2**32
LANE_BOOT = 2**33

VERIFY_TARGETS = ("proposition", "criterion", "A", "Aprime", "B", "embed", "coupling")


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """Expand 'start:stop:step' into an inclusive grid (values rounded to 1e-10)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(x) for x in parts)
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"bad grid {text!r}: need step > 0 and stop >= start")
    values = []
    k = 0
    while True:
        v = round(start + k * step, 10)
        if v > stop + 1e-12:
            break
        values.append(v)
        k += 1
    return values


def _resolve_ps(args: argparse.Namespace) -> list[float]:
    if args.p_grid is not None:
        return parse_grid(args.p_grid)
    if args.p is not None:
        return [args.p]
    raise UsageError("one of --p or --p-grid is required")


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _site_key(site: tuple[int, ...]) -> str:
    return ",".join(str(c) for c in site)


def _pool_map(fn, items, workers: int) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _blocks_of(total: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(size, total - lo)) for lo in range(0, total, size)]


def build_report(
    command: str,
    config: dict,
    results: dict,
    violations: list,
    wall_seconds: float | None,
) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "results": results,
        "violations": violations,
        "timing": None if wall_seconds is None else {"wall_seconds": wall_seconds},
    }


def write_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# verify: proposition / criterion (exact and Monte Carlo)
# ---------------------------------------------------------------------------


def _monotonicity_one_p(args: tuple) -> dict:
    p, t_max, d, mode, tol = args
    rep = verify_monotonicity_exact(t_max, ProcessParams(p, d), mode, tol)
    checks = [
        {
            "t": c.t,
            "z": list(c.z),
            "w": list(c.w),
            "relation": c.relation,
            "gap": c.gap,
            "ok": c.ok,
        }
        for c in rep.pairs
    ]
    return {"p": p, "checks": checks}


def run_monotonicity_exact(cfg: dict, mode: str, workers: int = 1) -> tuple[dict, list]:
    ps, t_max, d, tol = cfg["p_values"], cfg["t"], cfg["d"], cfg["tol"]
    per_p = _pool_map(
        _monotonicity_one_p, [(p, t_max, d, mode, tol) for p in ps], workers
    )
    violations = []
    checked = 0
    for block in per_p:
        for c in block["checks"]:
            checked += 1
            if not c["ok"]:
                violations.append({"p": block["p"], **c})
    results = {"mode": mode, "pairs_checked": checked, "per_p": per_p}
    if checked > 64:  # keep reports small on big sweeps: summary counts per p
        results["per_p"] = [
            {
                "p": blk["p"],
                "pairs_checked": len(blk["checks"]),
                "max_gap": max(c["gap"] for c in blk["checks"]),
            }
            for blk in per_p
        ]
    else:  # small run: include the CDF tables behind each pair
        for blk in results["per_p"]:
            params = ProcessParams(blk["p"], d)
            for c in blk["checks"]:
                c["cdf_z"] = descendant_pmf(c["t"], tuple(c["z"]), params).cdf().tolist()
                c["cdf_w"] = descendant_pmf(c["t"], tuple(c["w"]), params).cdf().tolist()
    return results, violations


def _counts_at(grid: np.ndarray, t: int, site: tuple[int, ...]) -> np.ndarray:
    idx = tuple(t + c for c in site)
    return grid[(slice(None),) + idx]


def run_proposition_mc(cfg: dict) -> tuple[dict, list]:
    """Two independent sampling arms per p; one-sided dominance bands for
    strictly ordered duads, two-sample equality for equal-modulus duads.
    Band level and significance are Bonferroni-adjusted across all tests."""
    ps, t, d, reps, seed = cfg["p_values"], cfg["t"], cfg["d"], cfg["reps"], cfg["seed"]
    band, alpha = cfg["band"], cfg["alpha"]
    pairs = duad_pairs(t, d)
    n_tests = len(ps) * len(pairs)
    if n_tests == 0:
        return {"mode": "mc", "tests": []}, []
    adj_level = 1.0 - (1.0 - band) / n_tests
    adj_alpha = alpha / n_tests
    tests = []
    violations = []
    test_index = 0
    for pi, p in enumerate(ps):
        params = ProcessParams(p, d)
        start = (0,) * d
        grid_a = batch_site_counts(start, t, params, reps, seed, stream_offset=LANE_A + 2 * pi)
        grid_b = batch_site_counts(start, t, params, reps, seed, stream_offset=LANE_B + 2 * pi)
        for z, w, relation in pairs:
            emp_z = EmpiricalDist.from_samples(_counts_at(grid_a, t, z))
            emp_w = EmpiricalDist.from_samples(_counts_at(grid_b, t, w))
            if relation == "dominates":
                res = dominance_check(
                    emp_z,
                    emp_w,
                    level=adj_level,
                    rng=stream(RandomStreamSpec(seed, LANE_BOOT + test_index)),
                )
            else:
                res = chi_square_equality(emp_z, emp_w, alpha=adj_alpha)
            entry = {
                "p": p,
                "t": t,
                "z": list(z),
                "w": list(w),
                "relation": relation,
                **asdict(res),
            }
            tests.append(entry)
            if res.reject:
                violations.append(entry)
            test_index += 1
    results = {
        "mode": "mc",
        "reps_per_arm": reps,
        "n_tests": n_tests,
        "band_level_adjusted": adj_level,
        "alpha_adjusted": adj_alpha,
        "tests": tests,
    }
    return results, violations


# ---------------------------------------------------------------------------
# verify: A and A' (exact and Monte Carlo)
# ---------------------------------------------------------------------------


def _subsets_up_to(t: int, max_size: int = 2) -> list[tuple[int, ...]]:
    import itertools

    sites = range(t + 1)
    out = [(c,) for c in sites]
    if max_size >= 2:
        out.extend(itertools.combinations(sites, 2))
    return out


def _a_one_p(args: tuple) -> dict:
    p, t_max, tol = args
    params = ProcessParams(p, 1)
    checks = []
    for t in range(0, t_max + 1):
        for subset in _subsets_up_to(t):
            a = joint_pmf_on_subset(t, -1, subset, False, params)
            b = joint_pmf_on_subset(t, 1, subset, True, params)
            gap = mass_gap(a, b)
            checks.append(
                {"t": t, "subset": list(subset), "gap": gap, "ok": gap <= tol}
            )
    return {"p": p, "checks": checks}


def _aprime_one_p(args: tuple) -> dict:
    p, t_max, tol = args
    params = ProcessParams(p, 1)
    checks = []
    for t in range(0, t_max + 1):
        for z in range(-1 - t, 2 + t):
            if (z + 1 + t) % 2:
                continue
            a = visited_pmf(t, 1, z, True, params)
            b = visited_pmf(t, -1, z, True, params)
            gap = mass_gap(a, b)
            checks.append({"t": t, "z": z, "gap": gap, "ok": gap <= tol})
    return {"p": p, "checks": checks}


def _equality_sweep(cfg: dict, one_p, workers: int) -> tuple[dict, list]:
    per_p = _pool_map(
        one_p, [(p, cfg["t"], cfg["tol"]) for p in cfg["p_values"]], workers
    )
    violations = []
    checked = 0
    max_gap = 0.0
    for blk in per_p:
        for c in blk["checks"]:
            checked += 1
            max_gap = max(max_gap, c["gap"])
            if not c["ok"]:
                violations.append({"p": blk["p"], **c})
    results = {
        "mode": "exact",
        "checks": checked,
        "max_gap": max_gap,
        "per_p": [
            {"p": blk["p"], "checks": len(blk["checks"]),
             "max_gap": max(c["gap"] for c in blk["checks"]) if blk["checks"] else 0.0}
            for blk in per_p
        ],
    }
    return results, violations


def run_aprime_mc(cfg: dict) -> tuple[dict, list]:
    """Chi-square equality of visited-lineage counts at every feasible site,
    sampled from +1 and from -1 on independent arms."""
    ps, t, reps, seed, alpha = (
        cfg["p_values"], cfg["t"], cfg["reps"], cfg["seed"], cfg["alpha"],
    )
    sites = [z for z in range(-1 - t, 2 + t) if (z + 1 + t) % 2 == 0]
    n_tests = len(ps) * len(sites)
    adj_alpha = alpha / max(n_tests, 1)
    tests = []
    violations = []
    for pi, p in enumerate(ps):
        params = ProcessParams(p, 1)
        plus = batch_visited_counts(1, t, params, reps, seed, stream_offset=LANE_A + 2 * pi)
        minus = batch_visited_counts(-1, t, params, reps, seed, stream_offset=LANE_B + 2 * pi)
        zero = t + 1
        for z in sites:
            res = chi_square_equality(
                EmpiricalDist.from_samples(plus[:, zero + z]),
                EmpiricalDist.from_samples(minus[:, zero + z]),
                alpha=adj_alpha,
            )
            entry = {"p": p, "t": t, "z": z, **asdict(res)}
            tests.append(entry)
            if res.reject:
                violations.append(entry)
    results = {
        "mode": "mc",
        "reps_per_arm": reps,
        "n_tests": n_tests,
        "alpha_adjusted": adj_alpha,
        "tests": tests,
    }
    return results, violations


# ---------------------------------------------------------------------------
# verify: B, embedded equivalence, coupling
# ---------------------------------------------------------------------------


def run_verify_b(cfg: dict, workers: int) -> tuple[dict, list]:
    n = cfg["n"]
    ms = cfg["m_values"]
    violations = []
    if cfg["mode"] == "exhaustive":
        sweeps = []
        for m in ms:
            rep = enumerate_verify_B(n, m, budget=cfg["budget"], workers=workers)
            sweeps.append(
                {
                    "n": rep.n,
                    "m": rep.m,
                    "bond_count": rep.bond_count,
                    "configs_checked": rep.configs_checked,
                    "strata": rep.strata,
                }
            )
            violations.extend({"m": m, **v} for v in rep.violations)
        results = {"mode": "exhaustive", "sweeps": sweeps}
        return results, violations
    # randomized tier: per-configuration checks on sampled configurations
    sweeps = []
    for mi, m in enumerate(ms):
        for pi, p in enumerate(cfg["p_values"]):
            rng = stream(RandomStreamSpec(cfg["seed"], LANE_A + mi * 1024 + pi))
            rep = sample_verify_B(n, m, cfg["reps"], p, rng)
            sweeps.append(
                {
                    "n": rep.n,
                    "m": rep.m,
                    "p": p,
                    "bond_count": rep.bond_count,
                    "configs_checked": rep.configs_checked,
                }
            )
            violations.extend({"m": m, "p": p, **v} for v in rep.violations)
    results = {"mode": "mc", "sweeps": sweeps}
    return results, violations


def _embed_block(args: tuple) -> tuple[int, list]:
    seed, first_index, count, n, p = args
    trap = build_trapezoid(n)
    ok = 0
    problems = []
    for r in range(first_index, first_index + count):
        rng = stream(RandomStreamSpec(seed, r))
        try:
            simulate_embedded(Point(1, 0), n, p, rng, trap=trap)
            ok += 1
        except InvariantViolationError as exc:
            problems.append({"replicate": r, "error": str(exc)})
    return ok, problems


def run_verify_embed(cfg: dict, workers: int) -> tuple[dict, list]:
    n, reps, seed = cfg["n"], cfg["reps"], cfg["seed"]
    results = {"n": n, "reps": reps, "per_p": []}
    violations = []
    block = 512
    for pi, p in enumerate(cfg["p_values"]):
        base = pi * reps
        tasks = [(seed, base + lo, cnt, n, p) for lo, cnt in _blocks_of(reps, block)]
        parts = _pool_map(_embed_block, tasks, workers)
        ok = sum(part[0] for part in parts)
        for part in parts:
            violations.extend({"p": p, **v} for v in part[1])
        results["per_p"].append({"p": p, "runs_ok": ok})
    return results, violations


def _coupling_block(args: tuple) -> tuple[int, list]:
    seed, first_index, count, t, p, cap = args
    params = ProcessParams(p, 1)
    ok = 0
    problems = []
    for r in range(first_index, first_index + count):
        rng = stream(RandomStreamSpec(seed, r))
        minus, plus = coupled_simulate(t, params, rng, cap)
        probs = coupling_violations(minus, plus)
        if probs:
            problems.append({"replicate": r, "problems": probs[:5]})
        else:
            ok += 1
    return ok, problems


def run_verify_coupling(cfg: dict, workers: int) -> tuple[dict, list]:
    t, reps, seed = cfg["t"], cfg["reps"], cfg["seed"]
    cap = cfg["population_cap"]
    results = {"t": t, "reps": reps, "per_p": [], "marginal": []}
    violations = []
    block = 512
    for pi, p in enumerate(cfg["p_values"]):
        base = pi * reps
        tasks = [(seed, base + lo, cnt, t, p, cap) for lo, cnt in _blocks_of(reps, block)]
        parts = _pool_map(_coupling_block, tasks, workers)
        ok = sum(part[0] for part in parts)
        for part in parts:
            violations.extend({"p": p, **v} for v in part[1])
        results["per_p"].append({"p": p, "pathwise_ok_runs": ok})
    m_reps = cfg["marginal_reps"]
    if m_reps > 0:
        stats = ("total", "at_plus1", "at_zero")
        n_tests = len(cfg["p_values"]) * len(stats)
        adj_alpha = cfg["alpha"] / n_tests
        for pi, p in enumerate(cfg["p_values"]):
            params = ProcessParams(p, 1)
            constructed = batch_coupled_summaries(
                t, params, m_reps, seed, cap=cap, stream_offset=LANE_A + 2 * pi
            )
            direct = batch_tagged_summaries(
                1, t, params, m_reps, seed, cap=cap, stream_offset=LANE_B + 2 * pi
            )
            for stat in stats:
                res = chi_square_equality(
                    EmpiricalDist.from_samples(constructed[stat]),
                    EmpiricalDist.from_samples(direct[stat]),
                    alpha=adj_alpha,
                )
                entry = {"p": p, "statistic_name": stat, **asdict(res)}
                results["marginal"].append(entry)
                if res.reject:
                    violations.append(entry)
    return results, violations


# ---------------------------------------------------------------------------
# simulate commands
# ---------------------------------------------------------------------------


def _population_json(rep: int, time_index: int, counts: dict) -> str:
    items = sorted(counts.items())
    payload = {
        "rep": rep,
        "time": time_index,
        "counts": {_site_key(site if isinstance(site, tuple) else (site,)): int(n)
                   for site, n in items},
    }
    return json.dumps(payload)


def run_simulate_brw(cfg: dict, out_path: str | None, summary_path: str | None) -> tuple[dict, list]:
    params = ProcessParams(cfg["p_values"][0], cfg["d"])
    start = cfg["start"] if cfg["start"] is not None else (0,) * params.d
    lines = []
    summary_rows = []
    final_counts: dict = {}
    for r in range(cfg["reps"]):
        rng = stream(RandomStreamSpec(cfg["seed"], r))
        traj = simulate(start, cfg["t"], params, rng, cap=cfg["population_cap"])
        for pop in traj:
            lines.append(_population_json(r, pop.time, pop.counts))
            summary_rows.append(
                [r, pop.time, pop.total(), len([s for s, n in pop.counts.items() if n > 0])]
            )
        if r == 0:
            final_counts = {_site_key(s): n for s, n in sorted(traj[-1].counts.items())}
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
    if summary_path:
        with open(summary_path, "w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rep", "time", "total", "occupied"])
            writer.writerows(summary_rows)
    results = {
        "reps": cfg["reps"],
        "t": cfg["t"],
        "final_counts_rep0": final_counts,
        "trajectories": out_path,
        "summary": summary_path,
    }
    return results, []


def run_simulate_embedded(cfg: dict, out_path: str | None, summary_path: str | None) -> tuple[dict, list]:
    n = cfg["n"]
    source = Point(*cfg["source"])
    trap = build_trapezoid(n)
    p = cfg["p_values"][0]
    lines = []
    summary_rows = []
    final_counts: dict = {}
    violations: list = []
    for r in range(cfg["reps"]):
        rng = stream(RandomStreamSpec(cfg["seed"], r))
        try:
            run = simulate_embedded(source, n, p, rng, trap=trap)
        except InvariantViolationError as exc:
            violations.append({"replicate": r, "error": str(exc)})
            continue
        lines.append(json.dumps({"rep": r, "config": run.config.to_hex()}))
        for offset, counts in enumerate(run.trajectory):
            k = source.k + offset
            lines.append(_population_json(r, k, counts))
            summary_rows.append([r, k, sum(counts.values()), len(counts)])
        if r == 0:
            final_counts = {str(y): c for y, c in sorted(run.trajectory[-1].items())}
    if out_path:
        with open(out_path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
    if summary_path:
        with open(summary_path, "w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rep", "time", "total", "occupied"])
            writer.writerows(summary_rows)
    results = {
        "reps": cfg["reps"],
        "n": n,
        "final_counts_rep0": final_counts,
        "trajectories": out_path,
        "summary": summary_path,
    }
    return results, violations


# ---------------------------------------------------------------------------
# exact tables
# ---------------------------------------------------------------------------


def _write_pmf_csv(path: str | None, pmf) -> None:
    rows = [["value", "probability"]]
    rows += [[k, v] for k, v in pmf.as_dict().items()]
    rows.append(["truncated_mass", pmf.truncated_mass])
    _write_csv(path, rows)


def _write_csv(path: str | None, rows: list) -> None:
    if path:
        fh = open(path, "w", newline="\n")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


def run_exact(args: argparse.Namespace) -> int:
    p = args.p if args.p is not None else None
    if p is None:
        raise UsageError("exact tables need --p")
    caps = ExactCaps(
        max_time=DEFAULT_CAPS.max_time,
        max_support=DEFAULT_CAPS.max_support,
        truncation=args.truncation,
    )
    params = ProcessParams(p, args.d)
    if args.what == "pmf":
        if args.t is None or args.z is None:
            raise UsageError("exact pmf needs --t and --z")
        pmf = descendant_pmf(args.t, _parse_ints(args.z), params, caps)
        _write_pmf_csv(args.out, pmf)
    elif args.what == "visited":
        if args.t is None or args.z is None or args.start is None:
            raise UsageError("exact visited needs --t, --z and --start")
        z = _parse_ints(args.z)
        start = _parse_ints(args.start)
        pmf = visited_pmf(args.t, start[0], z[0], args.require_visit, params, caps)
        _write_pmf_csv(args.out, pmf)
    else:  # joint
        if args.t is None or args.subset is None or args.start is None:
            raise UsageError("exact joint needs --t, --subset and --start")
        subset = _parse_ints(args.subset)
        start = _parse_ints(args.start)
        jp = joint_pmf_on_subset(
            args.t, start[0], subset, args.require_visit, params, caps
        )
        rows = [[f"count_at_{c}" for c in jp.sites] + ["probability"]]
        rows += [list(vec) + [prob] for vec, prob in jp.as_dict().items()]
        rows.append(["truncated_mass"] + [""] * (len(jp.sites) - 1) + [jp.truncated_mass])
        _write_csv(args.out, rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=float, help="birth / bond probability")
    parser.add_argument(
        "--p-grid",
        help="probability grid start:stop:step, inclusive (e.g. 0.05:0.95:0.05)",
    )
    parser.add_argument("--t", type=int, help="time horizon (generations)")
    parser.add_argument("--n", type=int, help="trapezoid horizon")
    parser.add_argument("--m", type=int, help="dissection time for B (default: all 1..n)")
    parser.add_argument("--d", type=int, default=1, help="lattice dimension (default 1)")
    parser.add_argument("--z", help="site, comma-separated coordinates (e.g. 0 or 1,0)")
    parser.add_argument("--start", help="start site (e.g. -1)")
    parser.add_argument("--subset", help="site subset for joint laws, e.g. 0,2")
    parser.add_argument("--source", default="1,0", help="space-time source y,k (default 1,0)")
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    parser.add_argument("--reps", type=int, default=1, help="replicates (default 1)")
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    parser.add_argument("--tol", type=float, default=1e-12, help="exact-check tolerance")
    parser.add_argument("--alpha", type=float, default=1e-3, help="test significance")
    parser.add_argument("--band", type=float, default=0.99, help="bootstrap band level")
    parser.add_argument("--out", help="output path (JSON report / CSV / JSONL)")
    parser.add_argument("--summary-out", help="summary CSV path for simulate")
    parser.add_argument(
        "--mode", choices=("exact", "mc", "exhaustive"), help="verification mode"
    )
    parser.add_argument("--budget", type=int, default=DEFAULT_ENUM_BUDGET,
                        help="max configurations for exhaustive sweeps")
    parser.add_argument("--marginal-reps", type=int, default=0,
                        help="samples per arm for the coupling marginal-law test")
    parser.add_argument("--population-cap", type=int, default=DEFAULT_POPULATION_CAP)
    parser.add_argument("--truncation", type=float, default=DEFAULT_CAPS.truncation,
                        help="probability mass droppable per exact operation")
    parser.add_argument("--require-visit", action="store_true",
                        help="count only particles whose lineage visited site 0")
    parser.add_argument("--timing", action="store_true",
                        help="include wall-clock timing in the report (off by default "
                             "so reports are byte-identical across runs)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brwlab",
        description="Verification lab for branching random walks and oriented percolation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification target, write a JSON report")
    v.add_argument("target", choices=VERIFY_TARGETS)
    _add_common(v)

    s = sub.add_parser("simulate", help="simulate trajectories, write JSONL + CSV")
    s.add_argument("process", choices=("brw", "embedded"))
    _add_common(s)

    e = sub.add_parser("exact", help="emit an exact distribution table as CSV")
    e.add_argument("what", choices=("pmf", "visited", "joint"))
    _add_common(e)

    return parser


def _verify_config(args: argparse.Namespace) -> dict:
    cfg: dict = {
        "target": args.target,
        "seed": args.seed,
        "tol": args.tol,
        "alpha": args.alpha,
        "band": args.band,
        "reps": args.reps,
        "d": args.d,
        "population_cap": args.population_cap,
        "marginal_reps": args.marginal_reps,
    }
    if args.target in ("proposition", "criterion", "A", "Aprime", "coupling"):
        cfg["p_values"] = _resolve_ps(args)
        if args.t is None:
            raise UsageError(f"verify {args.target} needs --t")
        cfg["t"] = args.t
    if args.target == "embed":
        cfg["p_values"] = _resolve_ps(args)
        if args.n is None:
            raise UsageError("verify embed needs --n")
        cfg["n"] = args.n
    if args.target == "B":
        if args.n is None:
            raise UsageError("verify B needs --n")
        cfg["n"] = args.n
        ms = [args.m] if args.m is not None else list(range(1, args.n + 1))
        if any(m > args.n or m < 0 for m in ms):
            raise UsageError("--m must lie in 0..n")
        cfg["m_values"] = ms
        cfg["budget"] = args.budget
        cfg["mode"] = args.mode or "exhaustive"
        if cfg["mode"] == "mc":
            cfg["p_values"] = _resolve_ps(args)
        elif cfg["mode"] != "exhaustive":
            raise UsageError("verify B supports --mode exhaustive or mc")
    elif args.target in ("proposition", "Aprime"):
        cfg["mode"] = args.mode or "exact"
        if cfg["mode"] == "exhaustive":
            raise UsageError(f"verify {args.target} supports --mode exact or mc")
        if cfg["mode"] == "mc" and args.reps < 2:
            raise UsageError("Monte Carlo verification needs --reps >= 2")
    elif args.target in ("criterion", "A"):
        cfg["mode"] = args.mode or "exact"
        if cfg["mode"] != "exact":
            raise UsageError(f"verify {args.target} is exact-only")
    return cfg


def run_verify(args: argparse.Namespace) -> int:
    cfg = _verify_config(args)
    target = args.target
    started = time.perf_counter()
    if target == "proposition":
        if cfg["mode"] == "exact":
            results, violations = run_monotonicity_exact(cfg, "duads", args.workers)
        else:
            results, violations = run_proposition_mc(cfg)
    elif target == "criterion":
        results, violations = run_monotonicity_exact(cfg, "full_preorder", args.workers)
    elif target == "A":
        results, violations = _equality_sweep(cfg, _a_one_p, args.workers)
    elif target == "Aprime":
        if cfg["mode"] == "exact":
            results, violations = _equality_sweep(cfg, _aprime_one_p, args.workers)
        else:
            results, violations = run_aprime_mc(cfg)
    elif target == "B":
        results, violations = run_verify_b(cfg, args.workers)
    elif target == "embed":
        results, violations = run_verify_embed(cfg, args.workers)
    else:
        results, violations = run_verify_coupling(cfg, args.workers)
    elapsed = time.perf_counter() - started
    report = build_report(
        f"verify {target}", cfg, results, violations,
        elapsed if args.timing else None,
    )
    write_report(report, args.out)
    status = "PASS" if not violations else f"FAIL ({len(violations)} violation(s))"
    _say(f"verify {target}: {status} [{elapsed:.2f}s]")
    return 0 if not violations else 1


def run_simulate(args: argparse.Namespace) -> int:
    cfg: dict = {
        "process": args.process,
        "seed": args.seed,
        "reps": args.reps,
        "d": args.d,
        "population_cap": args.population_cap,
        "p_values": _resolve_ps(args),
    }
    started = time.perf_counter()
    if args.process == "brw":
        if args.t is None:
            raise UsageError("simulate brw needs --t")
        cfg["t"] = args.t
        cfg["start"] = _parse_ints(args.start) if args.start else None
        results, violations = run_simulate_brw(cfg, args.out, args.summary_out)
    else:
        if args.n is None:
            raise UsageError("simulate embedded needs --n")
        cfg["n"] = args.n
        cfg["source"] = _parse_ints(args.source)
        results, violations = run_simulate_embedded(cfg, args.out, args.summary_out)
    elapsed = time.perf_counter() - started
    if args.out:
        report = build_report(
            f"simulate {args.process}", cfg, results, violations,
            elapsed if args.timing else None,
        )
        write_report(report, args.out + ".report.json")
    _say(f"simulate {args.process}: done [{elapsed:.2f}s]")
    return 0 if not violations else 1


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            code = run_verify(args)
        elif args.command == "simulate":
            code = run_simulate(args)
        else:
            code = run_exact(args)
    except UsageError as exc:
        _say(f"usage error: {exc}")
        return 2
    except ResourceCapError as exc:
        _say(f"resource cap exceeded: {exc}")
        return 3
    return code


if __name__ == "__main__":
    sys.exit(main())
