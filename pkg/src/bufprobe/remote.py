"""Remote analysis from the destination capture alone.

A flood faster than the bottleneck keeps the buffer busy, so the spacing
of received packets gives the output rate. Sequence gaps mark the packets
the buffer discarded; counting sent packets (received + missing) over a
receive window gives the input rate. The time until the first gap becomes
visible is the time to fill the buffer plus the time for the last accepted
packet to cross it, which yields the buffer size::

    T_r = L / (R_in - R_out) + L / R_out
    L   = T_r / (1 / (R_in - R_out) + 1 / R_out)

The lower limit comes from the steady-state drop cycles: while the buffer
drains from the upper to the lower limit at ``R_out``, ``m`` arrivals at
``R_in`` are discarded, so ``UL - LL ~ m * R_out / R_in + 1/2``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    FillRateError,
    NoEstimateError,
    PartialWindowError,
    ReorderingError,
    UnderflowError,
)
from .model import TICKS_PER_S, TICKS_PER_US, Capture, round_half_up
from .report import MethodEstimate

# Interarrival above this multiple of the median is treated as link idle time.
IDLE_FACTOR = 4
# Steady-state epochs whose loss count exceeds this multiple of the median are
# discarded as rate-switch artifacts.
ANOMALOUS_M_FACTOR = 3
# The first departure of a drop run comes on average half a service time
# after the run starts, so m * R_out / R_in undercounts the drain by 1/2.
DRAIN_OFFSET_PKTS = Fraction(1, 2)


@dataclass(frozen=True)
class LossEpoch:
    first_lost_seq: int
    m_lost: int
    t_last_before_ticks: int
    t_first_after_ticks: Optional[int] = None  # None for a trailing, open epoch

    @property
    def closed(self) -> bool:
        return self.t_first_after_ticks is not None

    @property
    def t_last_before_us(self) -> float:
        return self.t_last_before_ticks / TICKS_PER_US

    @property
    def t_first_after_us(self) -> Optional[float]:
        if self.t_first_after_ticks is None:
            return None
        return self.t_first_after_ticks / TICKS_PER_US

    @property
    def first_after_seq(self) -> int:
        return self.first_lost_seq + self.m_lost


@dataclass(frozen=True)
class TrMeasurement:
    """Time from flood start until the first loss is visible at the output.

    Only the sum of fill and empty times is observable; :meth:`split` gives
    the decomposition implied by a pair of rates.
    """

    t_r_us: Fraction

    def split(self, r_in_bps, r_out_bps) -> tuple:
        """``(T_fill, T_empty)`` in microseconds for the given rates."""
        if r_in_bps <= r_out_bps:
            raise FillRateError("input rate must exceed output rate")
        r_in, r_out = Fraction(r_in_bps), Fraction(r_out_bps)
        inv_fill, inv_empty = 1 / (r_in - r_out), 1 / r_out
        t_fill = self.t_r_us * inv_fill / (inv_fill + inv_empty)
        return t_fill, self.t_r_us - t_fill


@dataclass(frozen=True)
class RemoteEstimate:
    r_out_bps: float
    r_in_bps: float
    l_buffer_bytes: float
    ul_pkts: int
    ll_pkts: int
    packet_size_bytes: int = 0
    t_r_us: float = 0.0
    epochs: tuple = ()

    def to_method_estimate(self) -> MethodEstimate:
        return MethodEstimate(ll=self.ll_pkts, ul=self.ul_pkts, unit="packets",
                              r_in_bps=self.r_in_bps, r_out_bps=self.r_out_bps)


def _check_order(dest: Capture) -> None:
    seqs = dest.seqs
    for a, b in zip(seqs, seqs[1:]):
        if b <= a:
            raise ReorderingError(f"seq {b} received after seq {a}; reordered paths are not supported")


def flood_packet_size(dest: Capture) -> int:
    """Most common packet size in the capture (the flood's packet size)."""
    if not len(dest):
        raise NoEstimateError("empty capture")
    return Counter(r.size_bytes for r in dest).most_common(1)[0][0]


def detect_loss_epochs(dest: Capture, sent_count: Optional[int] = None) -> list:
    """Maximal runs of missing sequence numbers.

    When ``sent_count`` is given and the last packets never arrived, a final
    open epoch (``t_first_after_ticks=None``) reports them.
    """
    _check_order(dest)
    recs = dest.records
    epochs = []
    for prev, cur in zip(recs, recs[1:]):
        if cur.seq > prev.seq + 1:
            epochs.append(LossEpoch(prev.seq + 1, cur.seq - prev.seq - 1, prev.ticks, cur.ticks))
    if sent_count is not None and recs and sent_count > recs[-1].seq + 1:
        last = recs[-1]
        epochs.append(LossEpoch(last.seq + 1, sent_count - last.seq - 1, last.ticks, None))
    return epochs


def _bursts(dest: Capture) -> list:
    """Split the capture into runs without idle gaps, as index ranges."""
    t = dest.ticks_array()
    if t.size < 2:
        return [(0, t.size)]
    ia = np.diff(t)
    limit = IDLE_FACTOR * float(np.median(ia))
    cuts = np.nonzero(ia > limit)[0] + 1
    edges = [0, *cuts.tolist(), t.size]
    return list(zip(edges, edges[1:]))


def estimate_r_out(dest: Capture) -> float:
    """Output rate in bits/s from back-to-back receptions.

    Uses the longest stretch of receptions without idle time, over which the
    buffer was never empty.
    """
    if len(dest) < 2:
        raise NoEstimateError("need at least two receptions to estimate the output rate")
    lo, hi = max(_bursts(dest), key=lambda b: b[1] - b[0])
    if hi - lo < 2:
        raise NoEstimateError("no burst with two or more back-to-back receptions")
    recs = dest.records[lo:hi]
    span = recs[-1].ticks - recs[0].ticks
    if span <= 0:
        raise NoEstimateError("receptions share a timestamp")
    bits = 8 * sum(r.size_bytes for r in recs[1:])
    return bits * TICKS_PER_S / span


def input_rate(n: int, m: int, t_us, packet_size_bytes) -> float:
    """``(n + m) * packet_size * 8 / t`` in bits/s, ``t`` in microseconds."""
    if t_us <= 0:
        raise NoEstimateError("window duration must be positive")
    return (n + m) * packet_size_bytes * 8 * 1e6 / float(t_us)


def default_window(dest: Capture, epochs: Optional[Sequence[LossEpoch]] = None) -> tuple:
    """Receive window ``(start_seq, end_seq)`` for input-rate estimation.

    Both ends are the first packets accepted after a drop run, where the
    buffer holds the same backlog, so the window lasts as long at the
    destination as it did at the source.
    """
    if epochs is None:
        epochs = detect_loss_epochs(dest)
    closed = [e for e in epochs if e.closed]
    if not closed:
        raise UnderflowError("no overflow observed: no complete loss epoch")
    if len(closed) == 1:
        return dest.records[0].seq, closed[0].first_after_seq
    return closed[0].first_after_seq, closed[-1].first_after_seq


def estimate_r_in(dest: Capture, window: Optional[tuple] = None,
                  sent_count: Optional[int] = None) -> float:
    """Input rate from sent-packet counts over a receive window.

    ``window`` is ``(start_seq, end_seq)``; ``n`` counts receptions in
    ``[start, end)`` and ``m`` the missing seqs there. ``end_seq`` must have
    been received, otherwise the loss count of the window is unknown.
    """
    _check_order(dest)
    if window is None:
        window = default_window(dest, detect_loss_epochs(dest, sent_count))
    start, end = window
    by_seq = dest.by_seq
    if end not in by_seq:
        raise PartialWindowError(f"window end seq {end} was not received; lost count is unknown")
    if start not in by_seq:
        raise PartialWindowError(f"window start seq {start} was not received")
    if end <= start:
        raise NoEstimateError("window must span at least one packet")
    n = sum(1 for s in dest.seqs if start <= s < end)
    m = (end - start) - n
    t_us = Fraction(by_seq[end].ticks - by_seq[start].ticks, TICKS_PER_US)
    return input_rate(n, m, t_us, flood_packet_size(dest))


def measure_tr(dest: Capture, r_out_bps: Optional[float] = None) -> TrMeasurement:
    """Fill-plus-empty time of the first overflow.

    Measured from the first reception to the last reception before the first
    gap, plus one service time for the first packet's own crossing.
    """
    epochs = [e for e in detect_loss_epochs(dest) if e.closed]
    if not epochs:
        raise UnderflowError("no overflow observed: no loss in the capture")
    if r_out_bps is None:
        r_out_bps = estimate_r_out(dest)
    size = flood_packet_size(dest)
    service_us = Fraction(size * 8 * 10**6) / Fraction(r_out_bps)
    elapsed = Fraction(epochs[0].t_last_before_ticks - dest.records[0].ticks, TICKS_PER_US)
    return TrMeasurement(elapsed + service_us)


def tr_from_buffer(l_bytes, r_in_Bps, r_out_Bps):
    """Fill-plus-empty time (s) of an ``l_bytes`` buffer; rates in bytes/s."""
    return l_bytes / (r_in_Bps - r_out_Bps) + l_bytes / r_out_Bps


def buffer_from_tr(t_r_s, r_in_Bps, r_out_Bps):
    """Inverse of :func:`tr_from_buffer`. Exact when given Fractions."""
    if r_in_Bps <= r_out_Bps:
        raise FillRateError("input rate must exceed output rate, or the buffer never overflows")
    return t_r_s / (1 / (r_in_Bps - r_out_Bps) + 1 / r_out_Bps)


def estimate_buffer(tr: TrMeasurement, r_in_bps, r_out_bps, packet_size_bytes) -> tuple:
    """``(L_buffer in bytes, upper limit in packets)``."""
    if r_in_bps <= r_out_bps:
        raise FillRateError("input rate must exceed output rate, or the buffer never overflows")
    l_bytes = buffer_from_tr(Fraction(tr.t_r_us) / 10**6,
                             Fraction(r_in_bps) / 8, Fraction(r_out_bps) / 8)
    return l_bytes, round_half_up(l_bytes / packet_size_bytes)


def steady_epochs(epochs: Sequence[LossEpoch]) -> list:
    """Closed epochs after the first, without rate-switch outliers."""
    steady = [e for e in epochs if e.closed and e.m_lost > 0][1:]
    if not steady:
        return []
    median = float(np.median([e.m_lost for e in steady]))
    return [e for e in steady if e.m_lost <= ANOMALOUS_M_FACTOR * median]


def estimate_lower_limit(epochs: Sequence[LossEpoch], r_in_bps, r_out_bps,
                         ul_pkts: int, packet_size_bytes: int) -> int:
    """Lower limit in packets from the drain that happens during each drop run."""
    steady = steady_epochs(epochs)
    if not steady:
        raise NoEstimateError("need a complete drop cycle after the first overflow")
    ratio = Fraction(r_out_bps) / Fraction(r_in_bps)
    drained = [Fraction(e.m_lost * packet_size_bytes) * ratio / packet_size_bytes for e in steady]
    drain_pkts = round_half_up(sum(drained) / len(drained) + DRAIN_OFFSET_PKTS)
    if drain_pkts <= 1:
        # Re-admission as soon as one slot frees: plain tail drop, ll == ul.
        return ul_pkts
    return max(0, ul_pkts - drain_pkts)


def analyze_remote(dest: Capture, sent_count: Optional[int] = None) -> RemoteEstimate:
    """Full remote characterization of the bottleneck buffer."""
    epochs = detect_loss_epochs(dest, sent_count)
    if not any(e.closed for e in epochs):
        raise UnderflowError("no overflow observed")
    size = flood_packet_size(dest)
    r_out = estimate_r_out(dest)
    r_in = estimate_r_in(dest, default_window(dest, epochs))
    if r_in <= r_out:
        raise FillRateError(
            f"estimated input rate {r_in:.0f} bps does not exceed output rate {r_out:.0f} bps"
        )
    tr = measure_tr(dest, r_out)
    l_bytes, ul = estimate_buffer(tr, r_in, r_out, size)
    ll = estimate_lower_limit(epochs, r_in, r_out, ul, size)
    return RemoteEstimate(
        r_out_bps=r_out,
        r_in_bps=r_in,
        l_buffer_bytes=float(l_bytes),
        ul_pkts=ul,
        ll_pkts=min(ll, ul),
        packet_size_bytes=size,
        t_r_us=float(tr.t_r_us),
        epochs=tuple(epochs),
    )
