"""Closed-form outage model of the LTE access reservation procedure.

The one-shot part combines preamble collisions on the PRACH with deadline
losses in three impatient-customer queues (PDCCH, PDSCH, PUSCH). The
retransmission part is a Bianchi-style Markov chain over MSG1 attempts and
backoff counters; its stationary law gives outage = p_f ** (m + 1) and the
mean number of transmissions, which feeds back into the total attempt rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ScenarioSpec, pdcch_capacity, pusch_capacity

OVERLOAD_EPS = 1e-6
DAMPING = 0.5
REL_TOL = 1e-9
MAX_ITER = 10_000

# per-channel deadlines in subframes
T_D_PDCCH = 10
T_D_PDSCH = 40
T_D_PUSCH = 40


@dataclass(frozen=True)
class ChannelLoad:
    lam: float
    mu: float
    t_d: float

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass
class AnalyticResult:
    lambda_i: float
    lambda_t: float
    lambda_a: float
    lambda_s: float
    p_c: float
    p_e: float
    p_f: float
    p_q_pdcch: float
    p_q_pdsch: float
    p_q_pusch: float
    rho_pdcch: float
    rho_pdsch: float
    rho_pusch: float
    p_outage: float
    n_tx: float
    b_off: float
    b_connect: float
    b_drop: float
    converged: bool
    iterations: int

    @property
    def lambda_r(self) -> float:
        """Retransmission rate, lambda_T - lambda_I."""
        return self.lambda_t - self.lambda_i


def collision_probability(lambda_t: float, d: int, delta_rao: float) -> float:
    """Jensen upper bound on the preamble collision probability."""
    expo = lambda_t * delta_rao - 1.0
    if expo <= 0.0:
        return 0.0
    return min(1.0, max(0.0, 1.0 - (1.0 - 1.0 / d) ** expo))


def preamble_rates(lambda_t: float, d: int, delta_rao: float) -> tuple[float, float]:
    """Activated and singleton preamble rates (per subframe)."""
    lam_pre = lambda_t * delta_rao / d
    scale = d / delta_rao
    lambda_a = -math.expm1(-lam_pre) * scale
    lambda_s = lam_pre * math.exp(-lam_pre) * scale
    return lambda_a, lambda_s


def _mm1_impatient(rho: float, mu: float, tau: float) -> float:
    omega = math.exp(-mu * (1.0 - rho) * tau)
    return (1.0 - rho) * rho * omega / (1.0 - rho * rho * omega)


def queue_loss(load: ChannelLoad, eps: float = OVERLOAD_EPS) -> float:
    """Fraction of requests lost by an M/M/1 queue whose customers give up.

    Requests that cannot start service within ``t_d - 1/mu`` of arrival are
    lost. For rho >= 1 - eps the formula is replaced by
    max(1 - 1/rho, formula at 1 - eps).
    """
    if load.mu <= 0:
        raise ValueError(f"service rate must be positive, got {load.mu}")
    tau = load.t_d - 1.0 / load.mu
    if tau < 0:
        raise ValueError(f"deadline {load.t_d} shorter than mean service time {1.0 / load.mu}")
    if load.lam <= 0:
        return 0.0
    rho = load.rho
    if rho < 1.0 - eps:
        return _mm1_impatient(rho, load.mu, tau)
    p = max(1.0 - 1.0 / rho, _mm1_impatient(1.0 - eps, load.mu, tau))
    return min(p, math.nextafter(1.0, 0.0))


def channel_loads(
    lambda_t: float, lambda_a: float, lambda_s: float, spec: ScenarioSpec
) -> tuple[ChannelLoad, ChannelLoad, ChannelLoad]:
    """PDCCH, PDSCH and PUSCH demand per subframe.

    PDCCH counts messages, PDSCH and PUSCH count resource blocks. Short
    signaling keeps only RAR, RRC request, RRC complete and data.
    """
    cell, cat = spec.cell, spec.catalog
    rb = cat.rbs
    dr = cell.delta_rao
    b_data = spec.traffic.b_data

    rar_grants = -math.expm1(-lambda_t * dr) / dr
    data_grants = math.ceil(b_data / (cat.n_frag * cat.b_rb))
    # ceil() is taken of the RB rate itself, so any positive load costs at least 1 RB
    rar_rbs = math.ceil(lambda_a * cat.b_rar / cat.b_rb)

    if cat.mode == "full":
        lam_pdcch = rar_grants + lambda_s * (6 + data_grants)
        lam_pdsch = rar_rbs + lambda_s * (rb(cat.b_conn) + rb(cat.b_r_dl) + rb(cat.b_s_cmd))
        lam_pusch = lambda_a * rb(cat.b_req) + lambda_s * (
            rb(cat.b_comp) + rb(cat.b_r_ul) + rb(cat.b_s_comp) + rb(b_data)
        )
    else:
        lam_pdcch = rar_grants + lambda_s * (1 + data_grants)
        lam_pdsch = rar_rbs
        lam_pusch = lambda_a * rb(cat.b_req) + lambda_s * (rb(cat.b_comp) + rb(b_data))

    def masked(channel: str, lam: float) -> float:
        return lam if spec.limits(channel) else 0.0

    return (
        ChannelLoad(masked("pdcch", lam_pdcch), pdcch_capacity(cell), T_D_PDCCH),
        ChannelLoad(masked("pdsch", lam_pdsch), cell.n_dlrb, T_D_PDSCH),
        ChannelLoad(masked("pusch", lam_pusch), pusch_capacity(cell), T_D_PUSCH),
    )


def grant_failure(loads: tuple[ChannelLoad, ...]) -> float:
    survive = 1.0
    for load in loads:
        survive *= 1.0 - queue_loss(load)
    return 1.0 - survive


def one_shot_failure(p_c: float, p_e: float) -> float:
    return 1.0 - (1.0 - p_c) * (1.0 - p_e)


def outage_probability(p_f: float, m: int) -> float:
    return p_f ** (m + 1)


def expected_transmissions(p_f: float, m: int) -> float:
    """Mean MSG1 transmissions, 1 + p_f + ... + p_f**m."""
    if p_f >= 1.0:
        return float(m + 1)
    if p_f < 1e-3:
        return sum(p_f**i for i in range(m + 1))
    return (1.0 - p_f ** (m + 1)) / (1.0 - p_f)


@dataclass
class MarkovState:
    """Stationary distribution of the retransmission chain.

    ``b_backoff[i - 1, k]`` holds b_{i,k} for 1 <= i <= m; ``b_cr[i]`` holds
    b_{CR(i)} for 0 <= i <= m.
    """

    b_off: float
    b_connect: float
    b_drop: float
    b_00: float
    b_cr: np.ndarray
    b_backoff: np.ndarray = field(repr=False)

    def total(self) -> float:
        return self.b_off + self.b_connect + self.b_drop + self.b_00 + self.b_cr.sum() + self.b_backoff.sum()

    @property
    def outage(self) -> float:
        denom = self.b_drop + self.b_connect
        return self.b_drop / denom if denom > 0 else 0.0


def markov_steady_state(p_c: float, p_e: float, p_on: float, m: int, w_c: int) -> MarkovState:
    q = p_e * (1.0 - p_c) + p_c  # one-attempt failure, equal to p_f
    if p_on <= 0.0:
        return MarkovState(1.0, 0.0, 0.0, 0.0, np.zeros(m + 1), np.zeros((m, w_c)))

    if q < 1.0 - 1e-3:
        num = 2.0 * (1.0 - p_e) * (1.0 - p_c)
        den = (
            2.0 * (1.0 + 2.0 * p_on) * (1.0 - p_e) * (1.0 - p_c)
            + (w_c + 1) * p_on * q * (1.0 - q**m)
            + 2.0 * (1.0 - p_c) * p_on * (1.0 - q ** (m + 1))
        )
        b_off = num / den
    else:
        # near q = 1 the closed form cancels (0/0 at q = 1); sum the geometric series instead
        s0 = float(np.sum(q ** np.arange(m + 1)))
        b_off = 1.0 / (1.0 + 2.0 * p_on + p_on * (w_c + 1) / 2.0 * (s0 - 1.0) + (1.0 - p_c) * p_on * s0)

    b_00 = p_on * b_off
    powers = q ** np.arange(m + 1)
    b_cr = (1.0 - p_c) * powers * b_00
    ramp = (w_c - np.arange(w_c)) / w_c
    b_backoff = np.outer(powers[1:], ramp) * b_00
    b_connect = (1.0 - q ** (m + 1)) * b_00
    b_drop = q ** (m + 1) * b_00
    return MarkovState(b_off, b_connect, b_drop, b_00, b_cr, b_backoff)


def solve_fixed_point(
    lambda_i: float,
    failure_at: Callable[[float], float],
    m: int,
    alpha: float = DAMPING,
    rel_tol: float = REL_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[float, bool, int]:
    """Damped iteration of lambda_T = lambda_I * N_TX(p_f(lambda_T))."""
    lam = lambda_i
    for it in range(1, max_iter + 1):
        target = lambda_i * expected_transmissions(failure_at(lam), m)
        new = (1.0 - alpha) * lam + alpha * target
        if abs(new - lam) <= rel_tol * new:
            return new, True, it
        lam = new
    return lam, False, max_iter


def _one_shot(lambda_t: float, spec: ScenarioSpec):
    cell = spec.cell
    lambda_a, lambda_s = preamble_rates(lambda_t, cell.d, cell.delta_rao)
    p_c = collision_probability(lambda_t, cell.d, cell.delta_rao) if spec.limits("prach") else 0.0
    loads = channel_loads(lambda_t, lambda_a, lambda_s, spec)
    p_q = tuple(queue_loss(ld) for ld in loads)
    p_e = 1.0 - (1.0 - p_q[0]) * (1.0 - p_q[1]) * (1.0 - p_q[2])
    return lambda_a, lambda_s, p_c, p_e, loads, p_q


def solve_total_rate(spec: ScenarioSpec) -> AnalyticResult:
    lambda_i = spec.traffic.lambda_i
    m = spec.cell.m

    def failure_at(lam: float) -> float:
        _, _, p_c, p_e, _, _ = _one_shot(lam, spec)
        return one_shot_failure(p_c, p_e)

    lambda_t, converged, iterations = solve_fixed_point(lambda_i, failure_at, m)
    lambda_a, lambda_s, p_c, p_e, loads, p_q = _one_shot(lambda_t, spec)
    p_f = one_shot_failure(p_c, p_e)
    chain = markov_steady_state(p_c, p_e, -math.expm1(-lambda_i), m, spec.cell.w_c)
    return AnalyticResult(
        lambda_i=lambda_i,
        lambda_t=lambda_t,
        lambda_a=lambda_a,
        lambda_s=lambda_s,
        p_c=p_c,
        p_e=p_e,
        p_f=p_f,
        p_q_pdcch=p_q[0],
        p_q_pdsch=p_q[1],
        p_q_pusch=p_q[2],
        rho_pdcch=loads[0].rho,
        rho_pdsch=loads[1].rho,
        rho_pusch=loads[2].rho,
        p_outage=outage_probability(p_f, m),
        n_tx=expected_transmissions(p_f, m),
        b_off=chain.b_off,
        b_connect=chain.b_connect,
        b_drop=chain.b_drop,
        converged=converged,
        iterations=iterations,
    )
