"""Brute-force reference computations used to check the closed forms.

Nothing here imports from :mod:`ltearp.analytic`; each oracle rebuilds its
quantity from first principles (sampling, event simulation, or a dense
linear solve).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_TRIALS = 1000


@dataclass(frozen=True)
class OracleEstimate:
    estimate: float
    stderr: float
    trials: int
    seed: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.estimate - value) <= k * self.stderr


@dataclass(frozen=True)
class PreambleEstimate(OracleEstimate):
    """Collision estimate plus mean activated/singleton preambles per RAO."""

    activated_per_rao: float = 0.0
    singletons_per_rao: float = 0.0


class SingularChainError(RuntimeError):
    pass


def _mean_and_stderr(samples: np.ndarray) -> tuple[float, float]:
    n = samples.size
    if n == 0:
        return 0.0, 0.0
    mean = float(samples.mean())
    if n == 1:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(n))


def mc_preamble(lambda_t: float, d: int, delta_rao: float, trials: int = 20_000, seed: int = 0) -> PreambleEstimate:
    """Monte-Carlo preamble contention in one RAO.

    Each trial draws N ~ Poisson(lambda_t * delta_rao) contenders and
    assigns preambles uniformly. The collision estimate is the mean, over
    trials with at least one contender, of the fraction of contenders whose
    preamble was also picked by someone else.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(lambda_t * delta_rao, size=trials)
    fractions = []
    activated = np.empty(trials)
    singletons = np.empty(trials)
    for t, n in enumerate(counts):
        if n == 0:
            activated[t] = singletons[t] = 0
            continue
        per_preamble = np.bincount(rng.integers(0, d, size=n), minlength=d)
        activated[t] = np.count_nonzero(per_preamble)
        singletons[t] = np.count_nonzero(per_preamble == 1)
        fractions.append((n - singletons[t]) / n)
    est, se = _mean_and_stderr(np.asarray(fractions, dtype=float))
    return PreambleEstimate(
        estimate=est,
        stderr=se,
        trials=trials,
        seed=seed,
        activated_per_rao=float(activated.mean()),
        singletons_per_rao=float(singletons.mean()),
    )


def impatient_queue(
    lam: float,
    mu: float,
    t_d: float,
    duration: float | None = None,
    seed: int = 0,
    semantics: str = "waiting",
    batches: int = 20,
) -> OracleEstimate:
    """Event simulation of a FIFO M/M/1 queue with a hard deadline.

    ``semantics="waiting"``: a customer is lost unless service starts within
    ``t_d - 1/mu`` of arrival. ``semantics="sojourn"``: a customer is lost
    unless service completes within ``t_d``; one cut off mid-service holds
    the server until its deadline. The standard error comes from
    ``batches`` equal-length batch means.
    """
    if semantics not in ("waiting", "sojourn"):
        raise ValueError(f"unknown semantics {semantics!r}")
    if duration is None:
        duration = 1e6 / mu
    if duration * mu < 1e5:
        raise ValueError("duration must cover at least 1e5 mean service times")
    if lam <= 0:
        return OracleEstimate(0.0, 0.0, 0, seed)

    rng = np.random.default_rng(seed)
    n = int(rng.poisson(lam * duration))
    gaps = rng.exponential(1.0 / lam, size=n).tolist()
    services = rng.exponential(1.0 / mu, size=n).tolist()
    patience = t_d - 1.0 / mu
    lost = np.zeros(n, dtype=bool)

    work = 0.0  # unfinished work seen by the next arrival
    for j in range(n):
        work -= gaps[j]
        if work < 0.0:
            work = 0.0
        if semantics == "waiting":
            if work > patience:
                lost[j] = True
            else:
                work += services[j]
        else:
            if work + services[j] > t_d:
                lost[j] = True
                if work < t_d:
                    work = t_d
            else:
                work += services[j]

    if n < batches:
        return OracleEstimate(float(lost.mean()) if n else 0.0, 0.0, n, seed)
    batch_means = np.array([b.mean() for b in np.array_split(lost, batches)])
    return OracleEstimate(float(lost.mean()), float(batch_means.std(ddof=1) / math.sqrt(batches)), n, seed)


def markov_state_index(m: int, w_c: int) -> dict[object, int]:
    """Index of every chain state: off, connect, drop, (i, k) and ("CR", i)."""
    idx: dict[object, int] = {"off": 0, "connect": 1, "drop": 2, (0, 0): 3}
    for i in range(1, m + 1):
        for k in range(w_c):
            idx[(i, k)] = len(idx)
    for i in range(m + 1):
        idx[("CR", i)] = len(idx)
    return idx


def markov_transition_matrix(p_c: float, p_e: float, p_on: float, m: int, w_c: int) -> np.ndarray:
    idx = markov_state_index(m, w_c)
    P = np.zeros((len(idx), len(idx)))

    P[idx["off"], idx[(0, 0)]] += p_on
    P[idx["off"], idx["off"]] += 1.0 - p_on
    P[idx["connect"], idx["off"]] = 1.0
    P[idx["drop"], idx["off"]] = 1.0
    for i in range(m + 1):
        head = idx[(i, 0)]
        cr = idx[("CR", i)]
        P[head, cr] += 1.0 - p_c
        P[cr, idx["connect"]] += 1.0 - p_e
        if i < m:
            for k in range(w_c):
                P[head, idx[(i + 1, k)]] += p_c / w_c
                P[cr, idx[(i + 1, k)]] += p_e / w_c
        else:
            P[head, idx["drop"]] += p_c
            P[cr, idx["drop"]] += p_e
        if i >= 1:
            for k in range(1, w_c):
                P[idx[(i, k)], idx[(i, k - 1)]] = 1.0
    return P


def markov_numeric(p_c: float, p_e: float, p_on: float, m: int, w_c: int) -> dict[object, float]:
    """Stationary distribution of the explicit transition matrix."""
    P = markov_transition_matrix(p_c, p_e, p_on, m, w_c)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    if np.linalg.matrix_rank(A) < n:
        raise SingularChainError("transition matrix has no unique stationary distribution")
    pi = np.linalg.solve(A, b)
    idx = markov_state_index(m, w_c)
    return {state: float(pi[j]) for state, j in idx.items()}
