"""Physical-access analysis from captures taken on both sides of the device.

Every departed packet is matched to its arrival by sequence number. The
number of departures falling in ``(arrival, departure]`` of a packet equals
the number of packets that were queued when it arrived, itself included.
The upper limit is the largest such count; the lower limit is read from the
first packet accepted after each run of drops.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InconsistentCaptureError, NoEstimateError, UnderflowError
from .model import TICKS_PER_S, TICKS_PER_US, Capture
from .report import MethodEstimate


class Phase(str, enum.Enum):
    FILLING = "filling"
    POST_DROP = "post-drop"


@dataclass(frozen=True)
class MatchedPacket:
    seq: int
    arrival_ticks: int
    departure_ticks: Optional[int]
    size_bytes: int

    @property
    def dropped(self) -> bool:
        return self.departure_ticks is None

    @property
    def delay_us(self) -> Optional[float]:
        if self.departure_ticks is None:
            return None
        return (self.departure_ticks - self.arrival_ticks) / TICKS_PER_US


@dataclass(frozen=True)
class OccupancySample:
    seq: int
    occupancy_pkts: int
    phase: Phase
    arrival_ticks: int = 0
    occupancy_bytes: int = 0


def match_captures(in_cap: Capture, out_cap: Capture) -> list:
    """One :class:`MatchedPacket` per in-capture record, in arrival order."""
    in_seqs = in_cap.by_seq
    for r in out_cap:
        if r.seq not in in_seqs:
            raise InconsistentCaptureError(f"seq {r.seq} left the device but never entered it")
    out_by_seq = out_cap.by_seq
    matched = []
    for r in in_cap:
        dep = out_by_seq.get(r.seq)
        if dep is not None and dep.ticks < r.ticks:
            raise InconsistentCaptureError(f"seq {r.seq} departs before it arrives")
        matched.append(MatchedPacket(r.seq, r.ticks, None if dep is None else dep.ticks, r.size_bytes))
    return matched


class _DepartureIndex:
    """Sorted departure times with cumulative bytes, for interval counting."""

    def __init__(self, matched: Sequence[MatchedPacket]):
        departed = sorted((m.departure_ticks, m.size_bytes) for m in matched if not m.dropped)
        self.ticks = np.array([d for d, _ in departed], dtype=np.int64)
        self.cum_bytes = np.concatenate(([0], np.cumsum([s for _, s in departed], dtype=np.int64)))

    def count(self, lo, hi):
        """Packets and bytes departing in ``(lo, hi]``."""
        i = np.searchsorted(self.ticks, lo, side="right")
        j = np.searchsorted(self.ticks, hi, side="right")
        return j - i, self.cum_bytes[j] - self.cum_bytes[i]


def _samples(matched: Sequence[MatchedPacket]) -> list:
    index = _DepartureIndex(matched)
    out, after_drop = [], False
    for m in matched:
        if m.dropped:
            after_drop = True
            continue
        pkts, nbytes = index.count(m.arrival_ticks, m.departure_ticks)
        phase = Phase.POST_DROP if after_drop else Phase.FILLING
        out.append(OccupancySample(m.seq, int(pkts), phase, m.arrival_ticks, int(nbytes)))
        after_drop = False
    return out


def occupancy_samples(matched: Sequence[MatchedPacket]) -> list:
    """Occupancy samples for every departed packet, in arrival order."""
    return _samples(matched)


def occupancy_for(seq: int, matched: Sequence[MatchedPacket]) -> OccupancySample:
    pos = next((i for i, m in enumerate(matched) if m.seq == seq), None)
    if pos is None:
        raise InconsistentCaptureError(f"seq {seq} is not in the in-capture")
    m = matched[pos]
    if m.dropped:
        raise NoEstimateError(f"seq {seq} was dropped; it has no occupancy sample")
    pkts, nbytes = _DepartureIndex(matched).count(m.arrival_ticks, m.departure_ticks)
    post_drop = pos > 0 and matched[pos - 1].dropped
    phase = Phase.POST_DROP if post_drop else Phase.FILLING
    return OccupancySample(seq, int(pkts), phase, m.arrival_ticks, int(nbytes))


def limits_from_occupancy(samples: Sequence[OccupancySample]) -> tuple:
    """``(lower_limit, upper_limit)`` in packets.

    The lower limit is the smallest occupancy seen by the first packet
    accepted after each drop run, not counting that packet itself. When
    every re-accepted packet refills the buffer straight back to the upper
    limit there is no observable hysteresis (a lower limit of UL and of UL-1
    produce identical traces), and the classic tail-drop reading ``ll = ul``
    is returned.
    """
    if not samples:
        raise UnderflowError("no departed packets to sample")
    post = [s.occupancy_pkts for s in samples if s.phase is Phase.POST_DROP]
    if not post:
        raise UnderflowError(
            "no drop epoch observed; raise the input rate or the packet count"
        )
    ul = max(s.occupancy_pkts for s in samples)
    ll = min(post) - 1
    if ll == ul - 1 and all(o == ul for o in post):
        ll = ul
    return ll, ul


def mean_occupancy(samples: Sequence[OccupancySample], per_phase: bool = False):
    """Average occupancy, over the whole run or per fill phase.

    With ``per_phase`` a list of means is returned, one for each stretch of
    accepted packets between drop runs.
    """
    if not samples:
        raise NoEstimateError("no samples")
    if not per_phase:
        return float(np.mean([s.occupancy_pkts for s in samples]))
    return [float(np.mean([s.occupancy_pkts for s in ph])) for ph in _phases(samples)]


def _phases(samples):
    phases, cur = [], []
    for s in samples:
        if s.phase is Phase.POST_DROP and cur:
            phases.append(cur)
            cur = []
        cur.append(s)
    if cur:
        phases.append(cur)
    return phases


def fill_rate(matched: Sequence[MatchedPacket]) -> float:
    """Net filling rate ``R_in - R_out`` in bits/s over the longest fill phase."""
    phases = [p for p in _phases(_samples(matched)) if len(p) >= 2]
    if not phases:
        raise NoEstimateError("no filling phase with at least two accepted packets")
    longest = max(phases, key=len)
    first, last = longest[0], longest[-1]
    dt = last.arrival_ticks - first.arrival_ticks
    dbytes = last.occupancy_bytes - first.occupancy_bytes
    if dt <= 0 or dbytes <= 0:
        raise NoEstimateError("the queue does not grow: input rate does not exceed output rate")
    return dbytes * 8 * TICKS_PER_S / dt


def _span_rate(ticks: Sequence[int], sizes: Sequence[int]) -> Optional[float]:
    if len(ticks) < 2 or ticks[-1] == ticks[0]:
        return None
    return sum(sizes[1:]) * 8 * TICKS_PER_S / (ticks[-1] - ticks[0])


def analyze_physical(in_cap: Capture, out_cap: Capture) -> MethodEstimate:
    """Method 1 summary: limits in packets plus input/output rates."""
    matched = match_captures(in_cap, out_cap)
    ll, ul = limits_from_occupancy(_samples(matched))
    r_in = _span_rate([r.ticks for r in in_cap], [r.size_bytes for r in in_cap])
    r_out = _span_rate([r.ticks for r in out_cap], [r.size_bytes for r in out_cap])
    return MethodEstimate(ll=ll, ul=ul, unit="packets", r_in_bps=r_in, r_out_bps=r_out)
