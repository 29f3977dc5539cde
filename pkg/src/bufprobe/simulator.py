"""Discrete-event model of a device with a hysteresis drop-tail buffer.

The buffer accepts arrivals while they fit under the upper limit. The first
arrival that does not fit is dropped and switches the buffer into a dropping
state in which every arrival is discarded until the occupancy has drained to
the lower limit. Packets are served FIFO at a (possibly piecewise-constant)
output rate. With ``lower_limit == upper_limit`` this reduces to a plain
tail-drop FIFO.

All event times are integer ticks (0.1 us). When an arrival and a departure
share a tick the departure is processed first.
"""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import ConfigurationError, InvariantViolation, SimulationHorizonError
from .model import (
    TICKS_PER_US,
    BufferConfig,
    Capture,
    CapturePoint,
    PacketRecord,
    RateProfile,
    Unit,
    round_half_up,
    service_ticks,
    us_to_ticks,
)


@dataclass(frozen=True)
class SimResult:
    in_capture: Capture
    out_capture: Capture
    dest_capture: Capture
    drops: tuple  # (seq, ticks)
    occupancy_trace: tuple  # (ticks, occupancy in config unit) after every change
    arrival_occupancy: dict = field(default_factory=dict, repr=False)
    """Occupancy in packets right after each accepted arrival, keyed by seq."""

    @property
    def overflowed(self) -> bool:
        return bool(self.drops)

    def max_occupancy(self) -> int:
        return max((o for _, o in self.occupancy_trace), default=0)

    def drop_runs(self) -> list:
        """Lengths of runs of consecutive dropped seqs, in arrival order."""
        dropped = {s for s, _ in self.drops}
        runs, cur = [], 0
        for r in self.in_capture:
            if r.seq in dropped:
                cur += 1
            elif cur:
                runs.append(cur)
                cur = 0
        if cur:
            runs.append(cur)
        return runs


def apply_rate_profile(profile: RateProfile, size_bytes, service_start_us) -> Fraction:
    """Exact departure time (us) of a packet whose service starts at ``service_start_us``.

    Integrates the piecewise-constant rate until ``size_bytes * 8`` bits have
    been sent.
    """
    if size_bytes <= 0:
        raise ConfigurationError("packet size must be positive")
    remaining = Fraction(size_bytes * 8 * 10**6)  # bit-microseconds per bps
    t = Fraction(service_start_us)
    period = Fraction(profile.period_us) if profile.period_us is not None else None
    end = Fraction(profile.end_us) if profile.end_us is not None else None
    starts = [s for s, _ in profile.segments]
    while True:
        if end is not None and t >= end:
            raise SimulationHorizonError(
                f"rate profile ends at {float(end)} us before service completes"
            )
        if period is None:
            base, local = Fraction(0), t
        else:
            base = (t // period) * period
            local = t - base
        idx = max(i for i, s in enumerate(starts) if s <= local)
        rate = profile.segments[idx][1]
        if idx + 1 < len(starts):
            seg_end = base + starts[idx + 1]
        elif period is not None:
            seg_end = base + period
        else:
            seg_end = None
        if end is not None and (seg_end is None or seg_end > end):
            seg_end = end
        if seg_end is None or remaining <= rate * (seg_end - t):
            return t + remaining / rate
        remaining -= rate * (seg_end - t)
        t = seg_end


class _Server:
    """Computes departure ticks; caches service times for constant profiles."""

    def __init__(self, profile: RateProfile):
        self.profile = profile
        self._cache = {}

    def departure(self, start: int, size: int) -> int:
        if self.profile.is_constant:
            st = self._cache.get(size)
            if st is None:
                st = max(1, round_half_up(service_ticks(size, self.profile.segments[0][1])))
                self._cache[size] = st
            return start + st
        exact = apply_rate_profile(self.profile, size, Fraction(start, TICKS_PER_US))
        return max(start + 1, round_half_up(exact * TICKS_PER_US))


def simulate(schedule: Sequence[PacketRecord], config: BufferConfig, experiment_id=None) -> SimResult:
    """Run ``schedule`` (arrivals at the device input) through the buffer."""
    for prev, cur in zip(schedule, schedule[1:]):
        if cur.ticks <= prev.ticks:
            raise ConfigurationError(f"schedule times must be strictly increasing (seq {cur.seq})")
    if config.unit is Unit.BYTES:
        too_big = [r.seq for r in schedule if r.size_bytes > config.upper_limit]
        if too_big:
            raise ConfigurationError(
                f"packet seq {too_big[0]} is larger than the {config.upper_limit} B buffer"
            )

    server = _Server(config.output)
    ul, ll = config.upper_limit, config.lower_limit
    queue = deque()  # PacketRecord of accepted, not yet departed packets
    occupancy = 0
    next_departure = None
    dropping = False
    out, drops, trace, arrival_occ = [], [], [], {}

    def drain(until):
        nonlocal occupancy, next_departure
        while queue and next_departure <= until:
            head = queue.popleft()
            out.append(PacketRecord(head.seq, next_departure, head.size_bytes))
            occupancy -= config.cost(head.size_bytes)
            trace.append((next_departure, occupancy))
            if queue:
                next_departure = server.departure(next_departure, queue[0].size_bytes)
            else:
                next_departure = None

    for pkt in schedule:
        drain(pkt.ticks)
        cost = config.cost(pkt.size_bytes)
        if dropping and occupancy <= ll:
            dropping = False
        if not dropping and occupancy + cost <= ul:
            queue.append(pkt)
            occupancy += cost
            trace.append((pkt.ticks, occupancy))
            arrival_occ[pkt.seq] = len(queue)
            if len(queue) == 1:
                next_departure = server.departure(pkt.ticks, pkt.size_bytes)
        else:
            dropping = True
            drops.append((pkt.seq, pkt.ticks))
    if queue:
        drain(float("inf"))

    in_cap = Capture(CapturePoint.SUT_IN, tuple(schedule), experiment_id)
    out_cap = Capture(CapturePoint.SUT_OUT, tuple(out), experiment_id)
    dest_cap = out_cap.shifted(us_to_ticks(config.propagation_delay_us), CapturePoint.DESTINATION)
    return SimResult(in_cap, out_cap, dest_cap, tuple(drops), tuple(trace), arrival_occ)


def classic_droptail(schedule: Sequence[PacketRecord], config: BufferConfig) -> SimResult:
    """Plain tail-drop FIFO: hysteresis with the lower limit pinned to the upper."""
    if config.lower_limit != config.upper_limit:
        config = dataclasses.replace(config, lower_limit=config.upper_limit)
    return simulate(schedule, config)


def verify_invariants(result: SimResult, config: BufferConfig) -> None:
    """Re-derive the buffer state from the captures and check the model's invariants.

    Occupancy is reconstructed independently of the event loop by sweeping
    the in/out captures, so this doubles as an oracle for the simulator.
    Raises :class:`InvariantViolation` on the first failure.
    """
    ins, outs = result.in_capture.records, result.out_capture.records
    dropped = {s for s, _ in result.drops}
    if len(ins) != len(outs) + len(result.drops):
        raise InvariantViolation("conservation: |in| != |out| + |drops|")
    out_seqs = [r.seq for r in outs]
    if dropped & set(out_seqs) or len(dropped) != len(result.drops):
        raise InvariantViolation("a seq is both dropped and delivered, or dropped twice")
    accepted_order = [r.seq for r in ins if r.seq not in dropped]
    if accepted_order != out_seqs:
        raise InvariantViolation("FIFO: departure order differs from acceptance order")
    for prev, cur in zip(outs, outs[1:]):
        if cur.ticks < prev.ticks:
            raise InvariantViolation("out timestamps decrease")
    if any(o > config.upper_limit for _, o in result.occupancy_trace):
        raise InvariantViolation("occupancy exceeds the upper limit")

    # Sweep: departures at a tick are applied before arrivals at that tick.
    in_by_seq = result.in_capture.by_seq
    events = [(r.ticks, 0, r.seq, r.size_bytes) for r in outs]
    events += [(r.ticks, 1, r.seq, r.size_bytes) for r in ins]
    events.sort()
    occ, pkts = 0, 0
    in_drop_run, min_since_drop, occ_at_last_arrival = False, None, None
    for ticks, kind, seq, size in events:
        cost = config.cost(size)
        if kind == 0:
            occ -= cost
            pkts -= 1
            if in_drop_run:
                min_since_drop = min(min_since_drop, occ)
            continue
        if seq in dropped:
            if in_drop_run and occ_at_last_arrival is not None and occ > occ_at_last_arrival:
                raise InvariantViolation(f"occupancy grew inside a drop run (seq {seq})")
            if not in_drop_run:
                in_drop_run, min_since_drop = True, occ
            occ_at_last_arrival = occ
            continue
        if in_drop_run:
            if min_since_drop > config.lower_limit:
                raise InvariantViolation(
                    f"hysteresis: seq {seq} accepted before occupancy reached the lower limit"
                )
            in_drop_run = False
        occ += cost
        pkts += 1
        occ_at_last_arrival = occ
        if occ > config.upper_limit:
            raise InvariantViolation(f"occupancy {occ} > upper limit at seq {seq}")
        if result.arrival_occupancy and result.arrival_occupancy.get(seq) != pkts:
            raise InvariantViolation(f"recorded occupancy for seq {seq} disagrees with the captures")

    # Work conservation: each departure starts when the server frees up.
    server = _Server(config.output)
    prev_dep = None
    for r in outs:
        start = in_by_seq[r.seq].ticks if prev_dep is None else max(in_by_seq[r.seq].ticks, prev_dep)
        if r.ticks != server.departure(start, r.size_bytes):
            raise InvariantViolation(f"work conservation: seq {r.seq} departs at an unexpected time")
        prev_dep = r.ticks
