"""``ltearp`` command line: analytic, simulate, sweep, breaking-point, compare, validate.

Exit codes: 0 success, 1 invalid scenario or arguments, 2 runtime error,
3 no breaking-point bracket in the search range.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import yaml

from . import analytic, harness, sim
from .config import ScenarioError, scenario_from_dict

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_NO_BRACKET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_scenario_flags(p: argparse.ArgumentParser, rate: bool = True) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--scenario", type=Path, help="YAML scenario file")
    g.add_argument("--bandwidth", type=float, choices=(1.4, 5.0, 10.0, 20.0), help="system bandwidth in MHz")
    g.add_argument("--delta-rao", type=int, help="subframes between RAOs")
    g.add_argument("--payload-bytes", type=int, help="report size in bytes")
    g.add_argument("--signaling", choices=("short", "full"))
    g.add_argument("--m", type=int, help="max retransmissions")
    g.add_argument("--limit-mask", help="comma-separated enabled bottlenecks, e.g. prach,pusch")
    g.add_argument("--pdcch-mode", choices=("raw_cce", "format1_messages"))
    g.add_argument("--pusch-mode", choices=("normalized", "verbatim"))
    if rate:
        r = g.add_mutually_exclusive_group()
        r.add_argument("--rate-per-s", type=float, help="new arrivals per second")
        r.add_argument("--rate-per-subframe", type=float, help="new arrivals per subframe")


def _add_run_flags(p: argparse.ArgumentParser, seeds: bool = True) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--seed", type=int, default=1, help="first seed")
    if seeds:
        g.add_argument("--seeds", type=int, default=1, help="replications, seeds seed..seed+n-1")
    g.add_argument("--duration", type=int, default=harness.DEFAULT_DURATION, help="subframes per run")
    g.add_argument("--warmup", type=int, help="subframes excluded from counts (default 10%% of duration)")
    g.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="write machine-readable output here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltearp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analytic", help="solve the analytic model at one arrival rate")
    _add_scenario_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("simulate", help="run the simulator at one arrival rate")
    _add_scenario_flags(p)
    _add_run_flags(p)
    _add_output_flags(p)
    p.add_argument("--trace", type=Path, help="write a per-event trace (first seed only)")

    p = sub.add_parser("sweep", help="outage versus arrival rate")
    _add_scenario_flags(p, rate=False)
    _add_run_flags(p)
    _add_output_flags(p)
    p.add_argument("--min-rate-per-s", type=float, default=50.0)
    p.add_argument("--max-rate-per-s", type=float, default=50_000.0)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--engines", default="analytic", help="comma-separated: analytic, simulation")

    p = sub.add_parser("breaking-point", help="arrival rate where outage first exceeds 10%%")
    _add_scenario_flags(p, rate=False)
    _add_run_flags(p)
    _add_output_flags(p)
    p.add_argument("--engine", choices=harness.ENGINES, default="analytic")
    p.add_argument("--lo-per-s", type=float, default=1.0)
    p.add_argument("--hi-per-s", type=float, default=100_000.0)
    p.add_argument("--iterations", type=int, default=20)

    p = sub.add_parser("compare", help="analytic against simulated outage")
    _add_scenario_flags(p, rate=False)
    _add_run_flags(p)
    _add_output_flags(p)
    p.add_argument("--rates-per-s", required=True, help="comma-separated arrival rates")

    p = sub.add_parser("validate", help="check closed forms against the brute-force oracles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="fewer samples")
    _add_output_flags(p)
    return parser


def scenario_from_args(args) -> "harness.ScenarioSpec":
    raw: dict = {}
    if args.scenario is not None:
        loaded = yaml.safe_load(args.scenario.read_text()) or {}
        if not isinstance(loaded, dict):
            raise ScenarioError("<file>", f"{args.scenario} must hold a flat mapping")
        raw.update(loaded)
    overrides = {
        "bandwidth_mhz": args.bandwidth,
        "delta_rao": args.delta_rao,
        "b_data": args.payload_bytes,
        "signaling": args.signaling,
        "m": args.m,
        "pdcch_capacity_mode": args.pdcch_mode,
        "pusch_capacity_mode": args.pusch_mode,
    }
    if args.bandwidth is not None:
        # bandwidth-derived defaults must follow the new bandwidth
        for key in ("n_ulrb", "n_dlrb", "n_cce"):
            raw.pop(key, None)
        if args.delta_rao is None:
            raw.pop("delta_rao", None)
    if args.limit_mask is not None:
        overrides["limit_mask"] = [c.strip() for c in args.limit_mask.split(",") if c.strip()]
    rate_s = getattr(args, "rate_per_s", None)
    rate_sf = getattr(args, "rate_per_subframe", None)
    if rate_s is not None or rate_sf is not None:
        for key in ("lambda_i", "rate_per_s", "n_devices", "report_interval_s"):
            raw.pop(key, None)
        overrides["lambda_i"] = rate_sf if rate_sf is not None else rate_s / 1000.0
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if any(k in overrides and overrides[k] is not None for k in ("bandwidth_mhz", "delta_rao", "b_data", "signaling", "limit_mask")):
        raw.pop("scenario_id", None)
    return scenario_from_dict(raw)


def _emit(args, text_csv: str | None, payload) -> None:
    if args.out is None:
        return
    if args.format == "json":
        args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        args.out.write_text(text_csv if text_csv is not None else "")


def cmd_analytic(args) -> int:
    spec = scenario_from_args(args)
    res = analytic.solve_total_rate(spec)
    record = {"scenario_id": spec.scenario_id, **dataclasses.asdict(res), "lambda_r": res.lambda_r}
    for key, value in record.items():
        print(f"{key:>14}: {value}")
    _emit(args, harness.rows_to_csv([harness.analytic_row(spec, res)]), record)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = scenario_from_args(args)
    seeds = harness.seeds_for(args.seed, args.seeds)
    results = []
    if args.trace is not None:
        with open(args.trace, "w") as fh:
            results.append(sim.run(spec, seeds[0], args.duration, args.warmup, trace=fh))
        seeds_left = seeds[1:]
    else:
        seeds_left = seeds
    results += harness.simulate_many([(spec, s) for s in seeds_left], args.duration, args.warmup, args.jobs)
    for r in results:
        print(
            f"seed {r.rng_seed}: outage {r.outage_fraction:.5f} "
            f"({r.drops} drops / {r.successes} successes), mean MSG1 {r.mean_msg1:.3f}"
        )
    print(f"pooled outage: {harness.pooled_outage(results):.5f}")
    rows = [harness.sim_row(spec, r) for r in results]
    _emit(args, harness.rows_to_csv(rows), [dataclasses.asdict(r) for r in results])
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = scenario_from_args(args)
    engines = frozenset(e.strip() for e in args.engines.split(",") if e.strip())
    sweep = harness.SweepSpec(
        base=spec,
        lambda_min=args.min_rate_per_s / 1000.0,
        lambda_max=args.max_rate_per_s / 1000.0,
        points=args.points,
        spacing=args.spacing,
        engines=engines,
        seeds=args.seeds,
        base_seed=args.seed,
        duration=args.duration,
        warmup=args.warmup,
    )
    try:
        sweep.validate()
    except ValueError as exc:
        raise ScenarioError("sweep", str(exc)) from exc
    rows = harness.run_sweep(sweep, jobs=args.jobs)
    summary = harness.summarize(rows)
    for line in summary:
        print(f"{line['lambda_i_per_subframe'] * 1000:12.2f} /s  {line['engine']:<10}  outage {line['p_outage']:.5f}")
    _emit(args, harness.rows_to_csv(rows), rows)
    return EXIT_OK


def cmd_breaking_point(args) -> int:
    spec = scenario_from_args(args)
    bp = harness.breaking_point(
        spec,
        engine=args.engine,
        lo=args.lo_per_s / 1000.0,
        hi=args.hi_per_s / 1000.0,
        iterations=args.iterations,
        seeds=harness.seeds_for(args.seed, args.seeds),
        duration=args.duration,
        warmup=args.warmup,
        jobs=args.jobs,
    )
    lo, hi = bp.bracket_per_s
    print(f"{spec.scenario_id} [{bp.engine}]: breaking point {bp.rate_per_s:.2f} arrivals/s ({bp.rate_per_subframe:.6f} /subframe)")
    print(f"bracket [{lo:.3f}, {hi:.3f}] arrivals/s, outage {bp.p_below:.4f} -> {bp.p_above:.4f}")
    record = {"scenario_id": spec.scenario_id, **dataclasses.asdict(bp)}
    header = "scenario_id,engine,rate_per_s,rate_per_subframe,bracket_lo_per_s,bracket_hi_per_s,p_below,p_above,seeds\n"
    line = ",".join(
        [spec.scenario_id, bp.engine, repr(bp.rate_per_s), repr(bp.rate_per_subframe), repr(lo), repr(hi),
         repr(bp.p_below), repr(bp.p_above), " ".join(map(str, bp.seeds))]
    )
    _emit(args, header + line + "\n", record)
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = scenario_from_args(args)
    try:
        rates = [float(x) / 1000.0 for x in args.rates_per_s.split(",") if x.strip()]
    except ValueError as exc:
        raise ScenarioError("rates-per-s", str(exc)) from exc
    rows = harness.compare(spec, rates, harness.seeds_for(args.seed, args.seeds), args.duration, args.warmup, args.jobs)
    print(harness.format_comparison(rows))
    lines = ["scenario_id,lambda_i_per_s,analytic_outage,simulated_outage,abs_diff,seeds"]
    for r in rows:
        lines.append(
            f"{spec.scenario_id},{r.lambda_i_per_s!r},{r.analytic_outage!r},{r.simulated_outage!r},{r.abs_diff!r},"
            + " ".join(map(str, r.seeds))
        )
    _emit(args, "\n".join(lines) + "\n", json.loads(harness.comparison_json(spec, rows)))
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = harness.validate(seed=args.seed, quick=args.quick)
    print(harness.format_checks(checks))
    csv_text = "check,passed,detail\n" + "".join(f"{c.name},{int(c.passed)},\"{c.detail}\"\n" for c in checks)
    _emit(args, csv_text, [dataclasses.asdict(c) for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_RUNTIME


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "breaking-point": cmd_breaking_point,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except harness.BracketNotFound as exc:
        print(f"no breaking point: {exc}", file=sys.stderr)
        return EXIT_NO_BRACKET
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
