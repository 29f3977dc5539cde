"""Experiment configuration, multi-size runs and unit inference."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .captureio import read_capture
from .errors import ConfigurationError, InsufficientDataError, NoEstimateError
from .model import BufferConfig, Capture, FlowSpec, RateProfile, Unit, build_schedule
from .occupancy import analyze_physical
from .remote import analyze_remote
from .report import CharacterizationReport, GroundTruth, MethodEstimate
from .simulator import SimResult, simulate

DEFAULT_PACKET_SIZES = (1500, 800, 200)
UNIT_RATIO_TOLERANCE = 1.10
MAX_AUTO_PACKETS = 200_000


@dataclass
class ExperimentConfig:
    floods: list
    buffer: Optional[BufferConfig] = None
    seed: str = "default"
    output_dir: str = "out"
    experiment_id: str = "experiment"
    packet_sizes: tuple = DEFAULT_PACKET_SIZES
    captures: list = field(default_factory=list)

    def __post_init__(self):
        if not self.floods and not self.captures:
            raise ConfigurationError("config lists no floods")
        for f in self.floods:
            if f.packet_size_bytes not in self.packet_sizes:
                raise ConfigurationError(
                    f"flood packet size {f.packet_size_bytes} not in declared sizes {list(self.packet_sizes)}"
                )


def suggest_packet_count(buffer: BufferConfig, packet_size: int, input_rate_bps: float,
                         cycles: int = 6) -> int:
    """Flood length that overflows the buffer and then runs ``cycles`` drop cycles."""
    per_pkt = 1 if buffer.unit is Unit.PACKETS else packet_size
    cap = max(1, buffer.upper_limit // per_pkt)
    drain = max(1, (buffer.upper_limit - buffer.lower_limit) // per_pkt)
    r = input_rate_bps / buffer.output.mean_rate()
    if r <= 1.0:
        return 10 * cap + 100
    fill = cap * r / (r - 1)
    cycle = drain * r + drain * r / (r - 1)
    n = 1.5 * (fill + cycles * cycle) + cap + 50
    return min(MAX_AUTO_PACKETS, int(math.ceil(n)))


def flood_tag(flood: FlowSpec) -> str:
    mbps = f"{flood.input_rate_bps / 1e6:g}".replace(".", "p")
    return f"s{flood.packet_size_bytes}_r{mbps}M"


# ---------------------------------------------------------------- config I/O

def _profile_from(doc) -> RateProfile:
    if isinstance(doc, (int, float)):
        return RateProfile.constant(doc)
    if "rate_bps" in doc:
        return RateProfile.constant(doc["rate_bps"])
    if "oscillate" in doc:
        o = doc["oscillate"]
        return RateProfile.oscillating(o["low_bps"], o["high_bps"], o["half_period_us"],
                                       o.get("start_high", True))
    return RateProfile([tuple(s) for s in doc["segments"]], doc.get("period_us"), doc.get("end_us"))


def _buffer_from(doc) -> BufferConfig:
    try:
        return BufferConfig(
            unit=Unit(doc.get("unit", "packets")),
            upper_limit=int(doc["upper_limit"]),
            lower_limit=int(doc["lower_limit"]),
            output=_profile_from(doc["output"]),
            propagation_delay_us=doc.get("propagation_delay_us", 0),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad buffer block: missing or invalid {exc}") from None
    except ValueError as exc:
        raise ConfigurationError(f"bad buffer block: {exc}") from None


def _flood(doc, buffer) -> FlowSpec:
    size = int(doc["packet_size_bytes"])
    rate = doc["input_rate_bps"]
    count = doc.get("packet_count")
    if count is None:
        if buffer is None:
            raise ConfigurationError("packet_count is required without a buffer block")
        count = suggest_packet_count(buffer, size, rate)
    return FlowSpec(size, rate, int(count), doc.get("start_time_us", 0))


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    buffer = _buffer_from(doc["buffer"]) if doc.get("buffer") else None
    try:
        floods = [_flood(f, buffer) for f in doc.get("floods", [])]
        matrix = doc.get("matrix")
        if matrix:
            for size in matrix["packet_sizes"]:
                for rate in matrix["input_rates_bps"]:
                    floods.append(_flood({"packet_size_bytes": size, "input_rate_bps": rate,
                                          "packet_count": matrix.get("packet_count")}, buffer))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"bad flood entry: missing or invalid {exc}") from None
    sizes = tuple(doc.get("packet_sizes", DEFAULT_PACKET_SIZES))
    return ExperimentConfig(
        floods=floods,
        buffer=buffer,
        seed=str(doc.get("seed", "default")),
        output_dir=doc.get("output_dir", "out"),
        experiment_id=doc.get("experiment_id", "experiment"),
        packet_sizes=sizes,
        captures=list(doc.get("captures", [])),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(doc)


# ---------------------------------------------------------------- analysis

def infer_unit(estimates: dict) -> str:
    """Decide whether capacity is counted in packets or bytes.

    ``estimates`` maps packet size (bytes) to the upper limit measured in
    packets with that size. Equal packet counts across sizes mean a packet
    buffer; equal byte totals mean a byte buffer.
    """
    if len(estimates) < 2:
        raise InsufficientDataError("unit inference needs estimates for at least two packet sizes")
    counts = [float(v) for v in estimates.values()]
    if min(counts) > 0 and max(counts) / min(counts) <= UNIT_RATIO_TOLERANCE:
        return Unit.PACKETS.value
    totals = [float(v) * size for size, v in estimates.items()]
    if min(totals) > 0 and max(totals) / min(totals) <= UNIT_RATIO_TOLERANCE:
        return Unit.BYTES.value
    return "inconclusive"


@dataclass
class FloodRun:
    flood: FlowSpec
    sim: Optional[SimResult] = None
    method1: Optional[MethodEstimate] = None
    method2: Optional[MethodEstimate] = None


def analyze_flood(in_cap: Optional[Capture], out_cap: Optional[Capture],
                  dest_cap: Optional[Capture], sent_count: Optional[int] = None) -> dict:
    """Run whichever methods the available captures allow."""
    out = {}
    if in_cap is not None and out_cap is not None:
        out["method1"] = analyze_physical(in_cap, out_cap)
    if dest_cap is not None:
        out["method2"] = analyze_remote(dest_cap, sent_count).to_method_estimate()
    return out


def run_flood(buffer: BufferConfig, flood: FlowSpec, experiment_id=None) -> FloodRun:
    sim = simulate(build_schedule(flood), buffer, experiment_id)
    if not sim.overflowed:
        raise NoEstimateError(f"no overflow observed for flood {flood_tag(flood)}")
    methods = analyze_flood(sim.in_capture, sim.out_capture, sim.dest_capture, flood.packet_count)
    return FloodRun(flood, sim, methods["method1"], methods["method2"])


def _to_unit(est: MethodEstimate, unit: str, size: int) -> MethodEstimate:
    if unit != Unit.BYTES.value:
        return est
    return MethodEstimate(est.ll * size, est.ul * size, Unit.BYTES.value, est.r_in_bps, est.r_out_bps)


def build_report(per_size: dict, truth: Optional[GroundTruth], experiment_id=None,
                 notes=()) -> CharacterizationReport:
    """Aggregate per-size estimates into one report.

    ``per_size`` maps packet size to ``{"method1": est, "method2": est}``.
    Headline values come from the largest packet size.
    """
    if not per_size:
        raise NoEstimateError("no flood produced an estimate")
    unit = None
    if len(per_size) >= 2:
        uls = {size: (m.get("method1") or m["method2"]).ul for size, m in per_size.items()}
        unit = infer_unit(uls)
    shown = unit if unit in (Unit.PACKETS.value, Unit.BYTES.value) else None
    if shown is None and truth is not None:
        shown = truth.unit
    largest = max(per_size)
    headline = {name: _to_unit(est, shown, largest) for name, est in per_size[largest].items()}
    return CharacterizationReport(
        methods=headline,
        ground_truth=truth,
        unit_inference=unit,
        experiment_id=experiment_id,
        per_size=per_size if len(per_size) > 1 else {},
        notes=list(notes),
    )


def characterize(config: ExperimentConfig, runs_out: Optional[list] = None) -> CharacterizationReport:
    """Simulate (or load) every flood, analyze it, and build the consolidated report.

    Per packet size the flood with the highest input rate is kept. When
    ``runs_out`` is a list, the per-flood :class:`FloodRun` objects are
    appended to it.
    """
    per_size, best_rate = {}, {}
    notes = ["remote estimates characterize only the dominant bottleneck"]
    if config.buffer is not None:
        if not config.floods:
            raise ConfigurationError("config lists no floods")
        for flood in config.floods:
            run = run_flood(config.buffer, flood, config.experiment_id)
            if runs_out is not None:
                runs_out.append(run)
            size = flood.packet_size_bytes
            if flood.input_rate_bps > best_rate.get(size, -1):
                best_rate[size] = flood.input_rate_bps
                per_size[size] = {"method1": run.method1, "method2": run.method2}
        b = config.buffer
        truth = GroundTruth(b.lower_limit, b.upper_limit, b.unit.value)
    else:
        if not config.captures:
            raise ConfigurationError("config has neither a buffer block nor captures")
        for entry in config.captures:
            caps = {k: read_capture(entry[k]) if entry.get(k) else None
                    for k in ("in", "out", "destination")}
            methods = analyze_flood(caps["in"], caps["out"], caps["destination"], entry.get("sent_count"))
            ref = caps["destination"] or caps["in"]
            size = max(r.size_bytes for r in ref)
            rate = methods.get("method1", methods.get("method2")).r_in_bps or 0
            if rate > best_rate.get(size, -1):
                best_rate[size] = rate
                per_size[size] = methods
        truth = None
    return build_report(per_size, truth, config.experiment_id, notes)
