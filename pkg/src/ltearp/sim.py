"""Subframe-stepped simulator of LTE random access plus the follow-up exchange.

Every subframe:

1. Poisson(lambda_I) new transactions start waiting for a RAO.
2. Timed events due this subframe fire (requests become ready, deadlines
   expire, backoffs end).
3. In a RAO subframe every waiting transaction sends MSG1 on a uniformly
   chosen preamble. The eNodeB sees only which preambles are active and
   answers them with one RAR (one PDCCH grant plus the RAR bytes on PDSCH).
4. PDCCH, PDSCH and PUSCH each serve their FIFO queue up to capacity.

Contenders that shared a preamble collide on MSG3 and hear nothing until the
contention timer runs out. Singletons get MSG4, then the post-ARP messages
of the signaling catalog, then the data report in fragments of at most
``n_frag`` RBs, one PDCCH grant per fragment. Any missed deadline or
collision sends the transaction into backoff for another MSG1, up to m + 1
in total; after that it is dropped.
"""

from __future__ import annotations

import enum
import math
import operator
from collections import deque
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np

from .config import PRACH_RBS, ScenarioSpec, pdcch_capacity

INF = math.inf
_by_id = operator.attrgetter("id")


class State(enum.Enum):
    AWAITING_RAO = "awaiting_rao"
    AWAITING_RAR = "awaiting_rar"
    AWAITING_MSG3_TX = "awaiting_msg3_tx"
    AWAITING_MSG4 = "awaiting_msg4"
    POST_ARP = "post_arp_step"
    DATA = "data_transfer"
    DONE = "done"
    DROPPED = "dropped"


class Transaction:
    __slots__ = (
        "id",
        "arrival",
        "state",
        "msg1_count",
        "msg1_time",
        "backoff_until",
        "chosen_preamble",
        "step",
        "bytes_remaining",
    )

    def __init__(self, tid: int, arrival: int):
        self.id = tid
        self.arrival = arrival
        self.state = State.AWAITING_RAO
        self.msg1_count = 0
        self.msg1_time = -1
        self.backoff_until = arrival
        self.chosen_preamble = -1
        self.step = 0
        self.bytes_remaining = 0


class Request:
    """A demand for ``units`` of one channel, valid up to subframe ``deadline``."""

    __slots__ = ("units", "left", "enqueued", "deadline", "on_done", "on_fail", "done", "dead")

    def __init__(self, units: int, enqueued: int, deadline: int, on_done: Callable, on_fail: Callable):
        self.units = units
        self.left = units
        self.enqueued = enqueued
        self.deadline = deadline
        self.on_done = on_done
        self.on_fail = on_fail
        self.done = False
        self.dead = False


class ChannelQueue:
    def __init__(self, name: str, capacity: float):
        self.name = name
        self.capacity = capacity
        self.fifo: deque[Request] = deque()
        self.served_units = 0
        self.expired = 0
        self.capacity_offered = 0.0
        self.max_served_in_subframe = 0

    def serve(self, now: int, capacity: float, measure: bool) -> None:
        budget = capacity
        fifo = self.fifo
        served = 0
        while fifo and budget > 0:
            req = fifo[0]
            if req.dead:
                fifo.popleft()
                continue
            assert req.deadline >= now, "request served after its deadline"
            take = req.left if req.left <= budget else int(budget)
            req.left -= take
            budget -= take
            served += take
            if req.left == 0:
                fifo.popleft()
                req.done = True
                req.on_done(now)
        assert served <= capacity, "channel served beyond capacity"
        if measure:
            self.served_units += served
            self.capacity_offered += capacity
            if served > self.max_served_in_subframe:
                self.max_served_in_subframe = served


@dataclass
class ChannelStats:
    served_units: int
    expired_requests: int
    mean_utilization: float | None


@dataclass
class SimResult:
    successes: int
    drops: int
    outage_fraction: float
    channels: dict[str, ChannelStats]
    latency_percentiles: dict[str, float]
    msg1_transmission_histogram: list[int]
    rng_seed: int
    duration_subframes: int
    warmup_subframes: int
    created: int = 0
    in_flight: int = 0
    total_done: int = 0
    total_dropped: int = 0
    max_msg1_count: int = 0

    @property
    def mean_msg1(self) -> float:
        n = sum(self.msg1_transmission_histogram)
        if n == 0:
            return 0.0
        return sum((i + 1) * c for i, c in enumerate(self.msg1_transmission_histogram)) / n


@dataclass
class _Step:
    uplink: bool
    rbs: int
    first: bool = True


def exchange_steps(spec: ScenarioSpec) -> list[_Step]:
    """Post-MSG4 steps: signaling messages, then data fragments."""
    cat = spec.catalog
    if cat.mode == "full":
        msgs = [
            (True, cat.b_comp),
            (False, cat.b_s_cmd),
            (True, cat.b_s_comp),
            (False, cat.b_r_dl),
            (True, cat.b_r_ul),
        ]
    else:
        msgs = [(True, cat.b_comp)]
    steps = [_Step(up, cat.rbs(nbytes)) for up, nbytes in msgs]
    total = cat.rbs(spec.traffic.b_data)
    first = True
    while total > 0:
        frag = min(total, cat.n_frag)
        steps.append(_Step(True, frag, first))
        first = False
        total -= frag
    return steps


class Simulator:
    def __init__(
        self,
        spec: ScenarioSpec,
        seed: int,
        duration: int,
        warmup: int | None = None,
        trace: TextIO | None = None,
    ):
        if warmup is None:
            warmup = duration // 10
        if not duration > warmup >= 0:
            raise ValueError("need duration > warmup >= 0")
        self.spec = spec
        self.cell = spec.cell
        self.cat = spec.catalog
        self.seed = seed
        self.duration = duration
        self.warmup = warmup
        self.trace = trace
        self.rng = np.random.default_rng(seed)
        self._backoffs: list[int] = []

        cell = spec.cell
        self.pdcch = ChannelQueue("pdcch", pdcch_capacity(cell) if spec.limits("pdcch") else INF)
        self.pdsch = ChannelQueue("pdsch", cell.n_dlrb if spec.limits("pdsch") else INF)
        self.pusch = ChannelQueue("pusch", cell.n_ulrb if spec.limits("pusch") else INF)
        self.prach_limited = spec.limits("prach")
        self.steps = exchange_steps(spec)
        self.first_data_step = 1 if spec.catalog.mode == "short" else 5

        self.now = 0
        self.calendar: dict[int, list] = {}
        self.resume: dict[int, list[Transaction]] = {}
        self.waiting: list[Transaction] = []
        self.next_id = 0
        self.max_tx = cell.m + 1

        self.successes = 0
        self.drops = 0
        self.total_done = 0
        self.total_dropped = 0
        self.latencies: list[int] = []
        self.hist = [0] * self.max_tx
        self.max_msg1_seen = 0

    # -- bookkeeping -------------------------------------------------------

    def _log(self, event: str, tid: int | str) -> None:
        if self.trace is not None:
            self.trace.write(f"{self.now} {event} {tid}\n")

    def _at(self, t: int, fn: Callable, arg) -> None:
        bucket = self.calendar.get(t)
        if bucket is None:
            self.calendar[t] = [(fn, arg)]
        else:
            bucket.append((fn, arg))

    def _submit(self, chan: ChannelQueue, units: int, ready: int, deadline: int, on_done, on_fail) -> None:
        req = Request(units, ready, deadline, on_done, on_fail)
        if ready <= self.now:
            chan.fifo.append(req)
        else:
            self._at(ready, self._enqueue, (chan, req))
        self._at(deadline + 1, self._expire, (chan, req))

    def _enqueue(self, arg) -> None:
        chan, req = arg
        if not req.dead:
            chan.fifo.append(req)

    def _expire(self, arg) -> None:
        chan, req = arg
        if req.done or req.dead:
            return
        req.dead = True
        if self.now >= self.warmup:
            chan.expired += 1
        req.on_fail(self.now)

    def _downlink(self, pdsch_rbs: int, ready: int, deadline: int, on_done, on_fail) -> None:
        """PDCCH grant, then the PDSCH payload in the same or a later subframe."""

        def granted(t: int) -> None:
            if pdsch_rbs > 0:
                self._submit(self.pdsch, pdsch_rbs, t, deadline, on_done, on_fail)
            else:
                on_done(t)

        self._submit(self.pdcch, 1, ready, deadline, granted, on_fail)

    def _uplink(self, pusch_rbs: int, ready: int, deadline: int, on_done, on_fail) -> None:
        """PDCCH uplink grant, then the PUSCH transmission proc_ue later."""

        def granted(t: int) -> None:
            self._submit(self.pusch, pusch_rbs, t + self.cell.proc_ue, deadline, on_done, on_fail)

        self._submit(self.pdcch, 1, ready, deadline, granted, on_fail)

    # -- transaction life cycle -------------------------------------------

    def _fail(self, tx: Transaction) -> None:
        if self.trace is not None:
            self._log("fail", tx.id)
        if tx.msg1_count < self.max_tx:
            tx.state = State.AWAITING_RAO
            if not self._backoffs:
                self._backoffs = self.rng.integers(0, self.cell.w_c, size=4096).tolist()
            until = self.now + self._backoffs.pop()
            tx.backoff_until = until
            if until <= self.now:
                self.waiting.append(tx)
            else:
                bucket = self.resume.get(until)
                if bucket is None:
                    self.resume[until] = [tx]
                else:
                    bucket.append(tx)
        else:
            tx.state = State.DROPPED
            self.total_dropped += 1
            if self.trace is not None:
                self._log("drop", tx.id)
            if tx.arrival >= self.warmup:
                self.drops += 1
                self.hist[tx.msg1_count - 1] += 1

    def _finish(self, tx: Transaction) -> None:
        tx.state = State.DONE
        self.total_done += 1
        if self.trace is not None:
            self._log("done", tx.id)
        if tx.arrival >= self.warmup:
            self.successes += 1
            self.hist[tx.msg1_count - 1] += 1
            self.latencies.append(self.now - tx.arrival)

    def _rao(self) -> None:
        contenders = self.waiting
        if not contenders:
            return
        self.waiting = []
        contenders.sort(key=_by_id)
        t = self.now
        cell = self.cell
        n = len(contenders)
        if self.prach_limited:
            picks = self.rng.integers(0, cell.d, size=n).tolist()
        else:
            picks = range(n)
        groups: dict[int, list[Transaction]] = {}
        for tx, p in zip(contenders, picks):
            tx.msg1_count += 1
            if tx.msg1_count > self.max_msg1_seen:
                self.max_msg1_seen = tx.msg1_count
            tx.msg1_time = t
            tx.chosen_preamble = p
            tx.state = State.AWAITING_RAR
            group = groups.get(p)
            if group is None:
                groups[p] = [tx]
            else:
                group.append(tx)
            if self.trace is not None:
                self._log("msg1", tx.id)
        ordered = [groups[p] for p in sorted(groups)]
        rar_deadline = t + cell.t_rar
        crt_deadline = t + cell.t_crt

        def fail_all(_t: int) -> None:
            for group in ordered:
                for tx in group:
                    self._fail(tx)

        def rar_delivered(s: int) -> None:
            if self.trace is not None:
                self._log("rar", f"rao@{t}")
            for group in ordered:
                for tx in group:
                    tx.state = State.AWAITING_MSG3_TX
                self._submit(
                    self.pusch,
                    self.cat.rbs(self.cat.b_req),
                    s + cell.proc_ue,
                    crt_deadline,
                    self._msg3_handler(group, crt_deadline),
                    self._group_fail(group),
                )

        rar_rbs = self.cat.rbs(len(ordered) * self.cat.b_rar)
        self._downlink(rar_rbs, t + cell.proc_enb, rar_deadline, rar_delivered, fail_all)

    def _group_fail(self, group: list[Transaction]):
        def fail(_t: int) -> None:
            for tx in group:
                self._fail(tx)

        return fail

    def _msg3_handler(self, group: list[Transaction], crt_deadline: int):
        def received(s: int) -> None:
            for tx in group:
                tx.state = State.AWAITING_MSG4
            if len(group) > 1:
                # collided MSG3: nobody is answered, the contention timer decides
                if self.trace is not None:
                    self._log("msg3_collision", group[0].id)
                self._at(crt_deadline + 1, self._group_timeout, group)
                return
            tx = group[0]
            self._downlink(
                self.cat.rbs(self.cat.b_conn),
                s + self.cell.proc_enb,
                crt_deadline,
                lambda u, tx=tx: self._start_step(tx, 0, u),
                lambda u, tx=tx: self._fail(tx),
            )

        return received

    def _group_timeout(self, group: list[Transaction]) -> None:
        for tx in group:
            self._fail(tx)

    def _start_step(self, tx: Transaction, k: int, prev_done: int) -> None:
        if k == len(self.steps):
            self._finish(tx)
            return
        step = self.steps[k]
        tx.step = k
        if k == 0 and self.trace is not None:
            self._log("msg4", tx.id)
        if step.first:
            start = prev_done + (self.cell.proc_ue if step.uplink else self.cell.proc_enb)
        else:
            start = prev_done
        tx.state = State.DATA if k >= self.first_data_step else State.POST_ARP
        deadline = start + self.cell.t_other

        def next_step(u: int) -> None:
            self._start_step(tx, k + 1, u)

        def failed(_u: int) -> None:
            self._fail(tx)

        if step.uplink:
            self._uplink(step.rbs, start, deadline, next_step, failed)
        else:
            self._downlink(step.rbs, start, deadline, next_step, failed)

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimResult:
        cell = self.cell
        arrivals = self.rng.poisson(self.spec.traffic.lambda_i, size=self.duration).tolist()
        pusch_base = self.pusch.capacity
        pusch_rao = max(0, pusch_base - PRACH_RBS) if pusch_base != INF else INF
        for t in range(self.duration):
            self.now = t
            for _ in range(arrivals[t]):
                tx = Transaction(self.next_id, t)
                self.next_id += 1
                self.waiting.append(tx)
            back = self.resume.pop(t, None)
            if back:
                self.waiting.extend(back)
            events = self.calendar.pop(t, None)
            if events:
                for fn, arg in events:
                    fn(arg)
            is_rao = t % cell.delta_rao == 0
            if is_rao:
                self._rao()
            measure = t >= self.warmup
            self.pdcch.serve(t, self.pdcch.capacity, measure)
            self.pdsch.serve(t, self.pdsch.capacity, measure)
            self.pusch.serve(t, pusch_rao if is_rao else pusch_base, measure)
        return self._result()

    def _result(self) -> SimResult:
        finished = self.successes + self.drops
        lat = np.asarray(self.latencies, dtype=float)
        pct = {}
        if lat.size:
            for q in (50, 90, 99):
                pct[f"p{q}"] = float(np.percentile(lat, q))
            pct["mean"] = float(lat.mean())
        channels = {}
        for ch in (self.pdcch, self.pdsch, self.pusch):
            util = ch.served_units / ch.capacity_offered if ch.capacity_offered not in (0, INF) else None
            channels[ch.name] = ChannelStats(ch.served_units, ch.expired, util)
        return SimResult(
            successes=self.successes,
            drops=self.drops,
            outage_fraction=self.drops / finished if finished else 0.0,
            channels=channels,
            latency_percentiles=pct,
            msg1_transmission_histogram=list(self.hist),
            rng_seed=self.seed,
            duration_subframes=self.duration,
            warmup_subframes=self.warmup,
            created=self.next_id,
            in_flight=self.next_id - self.total_done - self.total_dropped,
            total_done=self.total_done,
            total_dropped=self.total_dropped,
            max_msg1_count=self.max_msg1_seen,
        )


def run(
    spec: ScenarioSpec,
    seed: int,
    duration: int,
    warmup: int | None = None,
    trace: TextIO | None = None,
) -> SimResult:
    """Run one seeded simulation; identical arguments give identical results."""
    return Simulator(spec, seed, duration, warmup, trace).run()
