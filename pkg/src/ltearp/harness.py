"""Sweeps, breaking-point search and analytic-vs-simulation comparison."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analytic, oracles, sim
from .config import ScenarioSpec

OUTAGE_THRESHOLD = 0.1
DEFAULT_DURATION = 200_000
ENGINES = ("analytic", "simulation")

CSV_COLUMNS = (
    "scenario_id",
    "engine",
    "seed",
    "lambda_i_per_s",
    "lambda_i_per_subframe",
    "lambda_t",
    "p_c",
    "p_e",
    "p_f",
    "p_outage",
    "n_tx",
    "rho_pdcch",
    "rho_pdsch",
    "rho_pusch",
    "outage_fraction_sim",
    "successes",
    "drops",
    "duration_subframes",
)


class BracketNotFound(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioSpec
    lambda_min: float  # per subframe
    lambda_max: float
    points: int = 20
    spacing: str = "log"
    engines: frozenset[str] = frozenset({"analytic"})
    seeds: int = 1
    base_seed: int = 1
    duration: int = DEFAULT_DURATION
    warmup: int | None = None

    def validate(self) -> "SweepSpec":
        if not self.engines:
            raise ValueError("engines: at least one engine is required")
        if set(self.engines) - set(ENGINES):
            raise ValueError(f"engines: unknown {sorted(set(self.engines) - set(ENGINES))}")
        if not 0 < self.lambda_min < self.lambda_max:
            raise ValueError("rate range: need 0 < min < max")
        if self.points < 2:
            raise ValueError("points: need at least 2")
        if self.seeds < 1:
            raise ValueError("seeds: need at least 1")
        if self.spacing not in ("log", "linear"):
            raise ValueError("spacing: must be log or linear")
        return self

    def rates(self) -> list[float]:
        if self.spacing == "log":
            grid = np.geomspace(self.lambda_min, self.lambda_max, self.points)
        else:
            grid = np.linspace(self.lambda_min, self.lambda_max, self.points)
        return [float(x) for x in grid]


@dataclass
class BreakingPoint:
    rate_per_s: float
    rate_per_subframe: float
    bracket: tuple[float, float]  # per subframe
    p_below: float
    p_above: float
    engine: str
    iterations: int
    seeds: list[int] = field(default_factory=list)

    @property
    def bracket_per_s(self) -> tuple[float, float]:
        return (self.bracket[0] * 1000.0, self.bracket[1] * 1000.0)


# ---------------------------------------------------------------------------
# single points


def seeds_for(base_seed: int, count: int) -> list[int]:
    return [base_seed + k for k in range(count)]


def _sim_job(args) -> sim.SimResult:
    spec, seed, duration, warmup = args
    return sim.run(spec, seed, duration, warmup)


def simulate_many(
    specs_and_seeds: Sequence[tuple[ScenarioSpec, int]],
    duration: int,
    warmup: int | None = None,
    jobs: int = 1,
) -> list[sim.SimResult]:
    """Run simulations, in parallel when ``jobs > 1``; output order matches input."""
    work = [(spec, seed, duration, warmup) for spec, seed in specs_and_seeds]
    if jobs <= 1 or len(work) <= 1:
        return [_sim_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sim_job, work))


def pooled_outage(results: Iterable[sim.SimResult]) -> float:
    drops = succ = 0
    for r in results:
        drops += r.drops
        succ += r.successes
    return drops / (drops + succ) if drops + succ else 0.0


def analytic_row(spec: ScenarioSpec, res: analytic.AnalyticResult) -> dict:
    lam = spec.traffic.lambda_i
    return {
        "scenario_id": spec.scenario_id,
        "engine": "analytic",
        "seed": "",
        "lambda_i_per_s": lam * 1000.0,
        "lambda_i_per_subframe": lam,
        "lambda_t": res.lambda_t,
        "p_c": res.p_c,
        "p_e": res.p_e,
        "p_f": res.p_f,
        "p_outage": res.p_outage,
        "n_tx": res.n_tx,
        "rho_pdcch": res.rho_pdcch,
        "rho_pdsch": res.rho_pdsch,
        "rho_pusch": res.rho_pusch,
        "outage_fraction_sim": "",
        "successes": "",
        "drops": "",
        "duration_subframes": "",
    }


def sim_row(spec: ScenarioSpec, res: sim.SimResult) -> dict:
    lam = spec.traffic.lambda_i
    row = {c: "" for c in CSV_COLUMNS}
    row.update(
        scenario_id=spec.scenario_id,
        engine="simulation",
        seed=res.rng_seed,
        lambda_i_per_s=lam * 1000.0,
        lambda_i_per_subframe=lam,
        outage_fraction_sim=res.outage_fraction,
        successes=res.successes,
        drops=res.drops,
        duration_subframes=res.duration_subframes,
    )
    return row


def _row_key(row: dict):
    seed = row["seed"]
    return (float(row["lambda_i_per_subframe"]), row["engine"], -1 if seed == "" else int(seed))


# ---------------------------------------------------------------------------
# sweeps and CSV


def run_sweep(sweep: SweepSpec, jobs: int = 1) -> list[dict]:
    sweep.validate()
    rows = []
    sim_work = []
    for lam in sweep.rates():
        spec = sweep.base.with_rate(lam)
        if "analytic" in sweep.engines:
            rows.append(analytic_row(spec, analytic.solve_total_rate(spec)))
        if "simulation" in sweep.engines:
            sim_work += [(spec, s) for s in seeds_for(sweep.base_seed, sweep.seeds)]
    for (spec, _), res in zip(sim_work, simulate_many(sim_work, sweep.duration, sweep.warmup, jobs)):
        rows.append(sim_row(spec, res))
    rows.sort(key=_row_key)
    return rows


def _fmt(value) -> str:
    if value == "" or value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=_row_key):
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path: str | Path) -> list[dict]:
    """Rows with numeric columns parsed back; empty cells stay ''."""
    out = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key in CSV_COLUMNS:
                val = raw[key]
                if key in ("scenario_id", "engine") or val == "":
                    row[key] = val
                elif key in ("seed", "successes", "drops", "duration_subframes"):
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            out.append(row)
    return out


def summarize(rows: Sequence[dict]) -> list[dict]:
    """One line per (rate, engine): analytic outage or pooled simulated outage."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((float(row["lambda_i_per_subframe"]), row["engine"]), []).append(row)
    out = []
    for (lam, engine), grp in sorted(groups.items()):
        if engine == "analytic":
            out.append({"lambda_i_per_subframe": lam, "engine": engine, "p_outage": float(grp[0]["p_outage"])})
        else:
            drops = sum(int(r["drops"]) for r in grp)
            succ = sum(int(r["successes"]) for r in grp)
            out.append(
                {
                    "lambda_i_per_subframe": lam,
                    "engine": engine,
                    "p_outage": drops / (drops + succ) if drops + succ else 0.0,
                    "seeds": sorted(int(r["seed"]) for r in grp),
                }
            )
    return out


# ---------------------------------------------------------------------------
# breaking point


def _outage_fn(spec: ScenarioSpec, engine: str, seeds: list[int], duration: int, warmup, jobs: int):
    if engine == "analytic":
        return lambda lam: analytic.solve_total_rate(spec.with_rate(lam)).p_outage
    if engine == "simulation":

        def f(lam: float) -> float:
            s = spec.with_rate(lam)
            return pooled_outage(simulate_many([(s, seed) for seed in seeds], duration, warmup, jobs))

        return f
    raise ValueError(f"unknown engine {engine!r}")


def breaking_point(
    spec: ScenarioSpec,
    engine: str = "analytic",
    lo: float = 1e-3,
    hi: float = 100.0,
    iterations: int = 20,
    seeds: Sequence[int] = (1,),
    duration: int = DEFAULT_DURATION,
    warmup: int | None = None,
    jobs: int = 1,
    threshold: float = OUTAGE_THRESHOLD,
) -> BreakingPoint:
    """Geometric bisection for the rate (per subframe) where outage first exceeds ``threshold``.

    Raises :class:`BracketNotFound` unless outage(lo) <= threshold < outage(hi).
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    outage = _outage_fn(spec, engine, list(seeds), duration, warmup, jobs)
    p_lo, p_hi = outage(lo), outage(hi)
    if p_lo > threshold:
        raise BracketNotFound(f"outage {p_lo:.3g} already above {threshold} at {lo * 1000:g} arrivals/s")
    if p_hi <= threshold:
        raise BracketNotFound(f"outage stays at or below {threshold} up to {hi * 1000:g} arrivals/s")
    done = 0
    for done in range(1, iterations + 1):
        mid = math.sqrt(lo * hi)
        p_mid = outage(mid)
        if p_mid > threshold:
            hi, p_hi = mid, p_mid
        else:
            lo, p_lo = mid, p_mid
    est = math.sqrt(lo * hi)
    return BreakingPoint(
        rate_per_s=est * 1000.0,
        rate_per_subframe=est,
        bracket=(lo, hi),
        p_below=p_lo,
        p_above=p_hi,
        engine=engine,
        iterations=done,
        seeds=list(seeds) if engine == "simulation" else [],
    )


# ---------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonRow:
    lambda_i_per_s: float
    analytic_outage: float
    simulated_outage: float
    abs_diff: float
    seeds: list[int]
    per_seed: list[float]


def compare(
    spec: ScenarioSpec,
    rates_per_subframe: Sequence[float],
    seeds: Sequence[int],
    duration: int = DEFAULT_DURATION,
    warmup: int | None = None,
    jobs: int = 1,
) -> list[ComparisonRow]:
    rows = []
    for lam in sorted(rates_per_subframe):
        s = spec.with_rate(lam)
        a = analytic.solve_total_rate(s).p_outage
        results = simulate_many([(s, seed) for seed in seeds], duration, warmup, jobs)
        simulated = pooled_outage(results)
        rows.append(
            ComparisonRow(lam * 1000.0, a, simulated, abs(a - simulated), list(seeds), [r.outage_fraction for r in results])
        )
    return rows


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    lines = [f"{'arrivals/s':>12} {'analytic':>10} {'simulated':>10} {'|diff|':>8}"]
    for r in rows:
        lines.append(f"{r.lambda_i_per_s:12.1f} {r.analytic_outage:10.4f} {r.simulated_outage:10.4f} {r.abs_diff:8.4f}")
    return "\n".join(lines)


def comparison_json(spec: ScenarioSpec, rows: Sequence[ComparisonRow]) -> str:
    return json.dumps({"scenario_id": spec.scenario_id, "rows": [asdict(r) for r in rows]}, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# oracle validation


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def validate(seed: int = 0, quick: bool = False) -> list[Check]:
    """Every oracle-vs-closed-form comparison the model relies on."""
    checks = []

    # preamble contention: Jensen bound direction and activated/singleton rates
    trials = 4000 if quick else 20_000
    d, dr = 54, 5
    for load in (5, 7, 10, 15, 20, 30, 40, 60, 80, 120):
        lam_t = load / dr
        est = oracles.mc_preamble(lam_t, d, dr, trials=trials, seed=seed)
        bound = analytic.collision_probability(lam_t, d, dr)
        ok = est.estimate <= bound + 3 * est.stderr
        checks.append(Check(f"jensen_bound load={load}", ok, f"mc={est.estimate:.5f}±{est.stderr:.5f} bound={bound:.5f}"))
        lam_a, lam_s = analytic.preamble_rates(lam_t, d, dr)
        ok_a = abs(est.activated_per_rao - lam_a * dr) <= 0.02 * lam_a * dr + 0.05
        ok_s = abs(est.singletons_per_rao - lam_s * dr) <= 0.02 * lam_s * dr + 0.05
        checks.append(
            Check(
                f"preamble_rates load={load}",
                ok_a and ok_s,
                f"activated mc={est.activated_per_rao:.3f} model={lam_a * dr:.3f}; "
                f"singletons mc={est.singletons_per_rao:.3f} model={lam_s * dr:.3f}",
            )
        )

    # impatient queue
    span = 2e5 if quick else 1e6
    for mu in (3, 13, 21):
        for t_d in (10, 40):
            for rho in (0.3, 0.6, 0.9):
                est = oracles.impatient_queue(rho * mu, mu, t_d, duration=span / mu, seed=seed)
                p = analytic.queue_loss(analytic.ChannelLoad(rho * mu, mu, t_d))
                ok = abs(est.estimate - p) <= max(0.1 * p, 0.005)
                checks.append(Check(f"queue_loss mu={mu} td={t_d} rho={rho}", ok, f"sim={est.estimate:.5f} formula={p:.5f}"))

    # Markov chain closed form vs numeric solve
    grid = (0.0, 0.3, 0.9)
    worst = 0.0
    worst_outage = 0.0
    for m in (0, 2, 9):
        for w_c in (4, 20):
            for p_c in grid:
                for p_e in grid:
                    for p_on in (0.05, 0.5, 1.0):
                        worst = max(worst, markov_max_error(p_c, p_e, p_on, m, w_c))
                        st = analytic.markov_steady_state(p_c, p_e, p_on, m, w_c)
                        pf = analytic.one_shot_failure(p_c, p_e)
                        worst_outage = max(worst_outage, abs(st.outage - pf ** (m + 1)))
    checks.append(Check("markov closed form vs numeric", worst <= 1e-10, f"max |diff| = {worst:.2e}"))
    checks.append(Check("markov outage identity", worst_outage <= 1e-12, f"max |diff| = {worst_outage:.2e}"))
    return checks


def markov_max_error(p_c: float, p_e: float, p_on: float, m: int, w_c: int) -> float:
    closed = analytic.markov_steady_state(p_c, p_e, p_on, m, w_c)
    numeric = oracles.markov_numeric(p_c, p_e, p_on, m, w_c)
    pairs = [
        (closed.b_off, numeric["off"]),
        (closed.b_connect, numeric["connect"]),
        (closed.b_drop, numeric["drop"]),
        (closed.b_00, numeric[(0, 0)]),
    ]
    pairs += [(closed.b_cr[i], numeric[("CR", i)]) for i in range(m + 1)]
    pairs += [(closed.b_backoff[i - 1, k], numeric[(i, k)]) for i in range(1, m + 1) for k in range(w_c)]
    return max(abs(a - b) for a, b in pairs)


def format_checks(checks: Sequence[Check]) -> str:
    width = max(len(c.name) for c in checks)
    return "\n".join(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}" for c in checks)
