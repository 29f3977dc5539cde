"""Shared value types and rate/time arithmetic.

Time is kept as integer *ticks* of 0.1 microseconds wherever it is stored
(packet timestamps, schedules, traces). Intermediate quantities that are not
on the tick grid, such as the 213.33 us gap of an 800 B packet at 30 Mbps,
are carried as :class:`fractions.Fraction` and rounded to the grid only when
a timestamp is produced.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, InconsistentCaptureError

TICKS_PER_US = 10
TICKS_PER_S = 10_000_000


def round_half_up(x) -> int:
    """Nearest integer, ties towards +inf. Exact for int, Fraction and Decimal."""
    if isinstance(x, float):
        return math.floor(x + 0.5)
    return math.floor(Fraction(x) + Fraction(1, 2))


def us_to_ticks(us) -> int:
    return round_half_up(Fraction(us) * TICKS_PER_US)


def ticks_to_us(ticks: int) -> float:
    return ticks / TICKS_PER_US


def _as_fraction(x) -> Fraction:
    # Fraction(float) is exact, so 5.5e6 and 10.88e6 stay exact integers.
    return x if isinstance(x, Fraction) else Fraction(x)


class CapturePoint(str, enum.Enum):
    SOURCE = "source"
    SUT_IN = "sut_in"
    SUT_OUT = "sut_out"
    DESTINATION = "destination"


class Unit(str, enum.Enum):
    PACKETS = "packets"
    BYTES = "bytes"


@dataclass(frozen=True, order=True)
class PacketRecord:
    """One observed (or scheduled) packet.

    ``ticks`` is the timestamp in tenths of a microsecond since the start of
    the experiment; use :attr:`timestamp_us` for microseconds.
    """

    seq: int
    ticks: int
    size_bytes: int

    def __post_init__(self):
        if self.seq < 0:
            raise DomainError(f"seq must be >= 0, got {self.seq}")
        if self.ticks < 0:
            raise DomainError(f"timestamp must be >= 0, got {self.ticks} ticks")
        if self.size_bytes <= 0:
            raise DomainError(f"size_bytes must be > 0, got {self.size_bytes}")

    @classmethod
    def at_us(cls, seq: int, timestamp_us, size_bytes: int) -> "PacketRecord":
        return cls(seq, us_to_ticks(timestamp_us), size_bytes)

    @property
    def timestamp_us(self) -> float:
        return self.ticks / TICKS_PER_US


@dataclass(frozen=True)
class Capture:
    """Ordered packet observations taken at one measurement point."""

    point: CapturePoint
    records: tuple = ()
    experiment_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "point", CapturePoint(self.point))
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        for prev, cur in zip(recs, recs[1:]):
            if cur.ticks < prev.ticks:
                raise InconsistentCaptureError(
                    f"timestamps decrease at seq {cur.seq} in {self.point.value} capture"
                )
        if len({r.seq for r in recs}) != len(recs):
            raise InconsistentCaptureError(f"duplicate seq in {self.point.value} capture")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @cached_property
    def by_seq(self) -> dict:
        return {r.seq: r for r in self.records}

    @property
    def seqs(self) -> list:
        return [r.seq for r in self.records]

    def ticks_array(self) -> np.ndarray:
        return np.fromiter((r.ticks for r in self.records), dtype=np.int64, count=len(self.records))

    def shifted(self, ticks: int, point: CapturePoint) -> "Capture":
        return Capture(
            point,
            tuple(PacketRecord(r.seq, r.ticks + ticks, r.size_bytes) for r in self.records),
            self.experiment_id,
        )


def rate_to_gap(packet_size_bytes, rate_bps) -> float:
    """Inter-packet gap in microseconds for a given packet size and bit rate."""
    if packet_size_bytes <= 0 or rate_bps <= 0:
        raise DomainError("packet size and rate must be positive")
    return packet_size_bytes * 8 * 1e6 / rate_bps


def gap_to_rate(packet_size_bytes, gap_us) -> float:
    """Bit rate in bits/s implied by one packet every ``gap_us`` microseconds."""
    if packet_size_bytes <= 0 or gap_us <= 0:
        raise DomainError("packet size and gap must be positive")
    return packet_size_bytes * 8 * 1e6 / gap_us


def service_ticks(size_bytes, rate_bps) -> Fraction:
    """Exact transmission time of ``size_bytes`` at ``rate_bps``, in ticks."""
    return Fraction(size_bytes * 8 * TICKS_PER_S) / _as_fraction(rate_bps)


@dataclass(frozen=True)
class FlowSpec:
    packet_size_bytes: int
    input_rate_bps: float
    packet_count: int
    start_time_us: float = 0

    def __post_init__(self):
        if self.packet_size_bytes <= 0 or self.input_rate_bps <= 0:
            raise ConfigurationError("flood packet size and input rate must be positive")
        if self.packet_count < 1:
            raise ConfigurationError("flood packet_count must be >= 1")
        if self.start_time_us < 0:
            raise ConfigurationError("flood start_time_us must be >= 0")

    @property
    def gap_ticks(self) -> Fraction:
        return service_ticks(self.packet_size_bytes, self.input_rate_bps)

    @property
    def gap_us(self) -> float:
        return rate_to_gap(self.packet_size_bytes, self.input_rate_bps)


def build_schedule(flow: FlowSpec) -> list:
    """Send times for a constant-rate flood, as ``PacketRecord`` values.

    Each time is rounded to the tick grid independently, so rounding never
    accumulates along the flood.
    """
    start = _as_fraction(flow.start_time_us) * TICKS_PER_US
    gap = flow.gap_ticks
    return [
        PacketRecord(k, round_half_up(start + k * gap), flow.packet_size_bytes)
        for k in range(flow.packet_count)
    ]


@dataclass(frozen=True)
class RateProfile:
    """Piecewise-constant output rate.

    ``segments`` is a sequence of ``(start_time_us, rate_bps)`` pairs. When
    ``period_us`` is set the pattern repeats with that period; otherwise the
    last rate holds until ``end_us`` (forever if ``end_us`` is None).
    """

    segments: tuple
    period_us: Optional[float] = None
    end_us: Optional[float] = None

    def __post_init__(self):
        segs = tuple((_as_fraction(t), _as_fraction(r)) for t, r in self.segments)
        if not segs:
            raise ConfigurationError("rate profile needs at least one segment")
        if segs[0][0] != 0:
            raise ConfigurationError("first rate segment must start at 0")
        if any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise ConfigurationError("rate segment start times must be strictly increasing")
        if any(r <= 0 for _, r in segs):
            raise ConfigurationError("rates must be positive")
        if self.period_us is not None and _as_fraction(self.period_us) <= segs[-1][0]:
            raise ConfigurationError("period must exceed the last segment start")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, rate_bps) -> "RateProfile":
        return cls(((0, rate_bps),))

    @classmethod
    def oscillating(cls, low_bps, high_bps, half_period_us, start_high=True) -> "RateProfile":
        first, second = (high_bps, low_bps) if start_high else (low_bps, high_bps)
        return cls(((0, first), (half_period_us, second)), period_us=2 * half_period_us)

    @property
    def is_constant(self) -> bool:
        return len(self.segments) == 1 and self.end_us is None

    @property
    def rates(self) -> list:
        return [float(r) for _, r in self.segments]

    def rate_at(self, t_us) -> Fraction:
        t = _as_fraction(t_us)
        if self.period_us is not None:
            t = t % _as_fraction(self.period_us)
        starts = [s for s, _ in self.segments]
        return self.segments[bisect.bisect_right(starts, t) - 1][1]

    def mean_rate(self) -> float:
        """Time-averaged rate over one period (or the first rate if aperiodic)."""
        if self.period_us is None:
            return float(self.segments[0][1])
        period = _as_fraction(self.period_us)
        bounds = [s for s, _ in self.segments] + [period]
        total = sum((b - a) * r for (a, r), b in zip(self.segments, bounds[1:]))
        return float(total / period)


@dataclass(frozen=True)
class BufferConfig:
    """Ground-truth model of the device under test."""

    unit: Unit
    upper_limit: int
    lower_limit: int
    output: RateProfile
    propagation_delay_us: float = 0

    def __post_init__(self):
        object.__setattr__(self, "unit", Unit(self.unit))
        if not 0 < self.lower_limit <= self.upper_limit:
            raise ConfigurationError(
                f"need 0 < lower_limit <= upper_limit, got {self.lower_limit}/{self.upper_limit}"
            )
        if self.propagation_delay_us < 0:
            raise ConfigurationError("propagation_delay_us must be >= 0")

    def cost(self, size_bytes: int) -> int:
        return 1 if self.unit is Unit.PACKETS else size_bytes


@dataclass(frozen=True)
class CaptureMetrics:
    loss_count: int
    mean_delay_us: float
    jitter_us: float
    interarrival_stats: tuple  # (min, mean, max) in us
    goodput_bps: float
    delays_us: tuple = field(default=(), repr=False)


def compute_metrics(sent: Capture, received: Capture) -> CaptureMetrics:
    """Loss, one-way delay, jitter, interarrival and goodput between two points.

    Jitter is the mean absolute difference between consecutive delays.
    """
    sent_by_seq = sent.by_seq
    missing = [r.seq for r in received if r.seq not in sent_by_seq]
    if missing:
        raise InconsistentCaptureError(f"received seq {missing[0]} was never sent")

    delays = np.array([r.ticks - sent_by_seq[r.seq].ticks for r in received], dtype=float)
    delays /= TICKS_PER_US
    mean_delay = float(delays.mean()) if delays.size else 0.0
    jitter = float(np.abs(np.diff(delays)).mean()) if delays.size > 1 else 0.0

    t = received.ticks_array()
    if t.size > 1:
        ia = np.diff(t) / TICKS_PER_US
        ia_stats = (float(ia.min()), float(ia.mean()), float(ia.max()))
    else:
        ia_stats = (0.0, 0.0, 0.0)

    span_ticks = int(t[-1] - t[0]) if t.size > 1 else 0
    if span_ticks > 0:
        bits = 8 * sum(r.size_bytes for r in received)
        goodput = bits * TICKS_PER_S / span_ticks
    else:
        goodput = 0.0

    return CaptureMetrics(
        loss_count=len(sent) - len(received),
        mean_delay_us=mean_delay,
        jitter_us=jitter,
        interarrival_stats=ia_stats,
        goodput_bps=float(goodput),
        delays_us=tuple(delays.tolist()),
    )


def capture_from_schedule(schedule: Sequence[PacketRecord], experiment_id=None) -> Capture:
    return Capture(CapturePoint.SOURCE, tuple(schedule), experiment_id)


def total_bytes(records: Iterable[PacketRecord]) -> int:
    return sum(r.size_bytes for r in records)
