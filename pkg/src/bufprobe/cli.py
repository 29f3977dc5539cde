"""Command-line entry point: ``bufprobe <subcommand>``.

Exit codes: 0 success, 2 usage/config/input-file problems, 3 analysis
impossible (for example no overflow in the capture).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import captureio
from .errors import (
    CaptureFormatError,
    ConfigurationError,
    InconsistentCaptureError,
    NoEstimateError,
)
from .experiment import analyze_flood, characterize, flood_tag, load_config
from .model import Capture, CapturePoint, FlowSpec, build_schedule
from .report import CharacterizationReport, GroundTruth
from .simulator import simulate

EXIT_USAGE = 2
EXIT_ANALYSIS = 3


def _report_path(out_dir, fmt):
    return os.path.join(out_dir, f"report.{fmt}")


def _summary_line(report: CharacterizationReport) -> str:
    h = report.headline()
    return f"LL={h.ll} UL={h.ul} unit={report.unit_inference or h.unit}"


def cmd_gen_schedule(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        floods, out_dir, exp = cfg.floods, args.out or cfg.output_dir, cfg.experiment_id
    else:
        if not (args.size and args.rate and args.count):
            raise ConfigurationError("gen-schedule needs --config or all of --size/--rate/--count")
        floods = [FlowSpec(args.size, args.rate, args.count, args.start_us)]
        out_dir, exp = args.out or ".", None
    os.makedirs(out_dir, exist_ok=True)
    for flood in floods:
        path = os.path.join(out_dir, f"{flood_tag(flood)}_source.csv")
        captureio.write_capture(Capture(CapturePoint.SOURCE, build_schedule(flood), exp), path)
        print(f"{path}: {flood.packet_count} packets, gap {flood.gap_us:.1f} us")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if cfg.buffer is None:
        raise ConfigurationError("simulate needs a buffer block with the ground truth")
    out_dir = args.out or cfg.output_dir
    summary = []
    for flood in cfg.floods:
        tag = flood_tag(flood)
        d = os.path.join(out_dir, tag)
        os.makedirs(d, exist_ok=True)
        sim = simulate(build_schedule(flood), cfg.buffer, cfg.experiment_id)
        captureio.write_capture(sim.in_capture, os.path.join(d, "in.csv"))
        captureio.write_capture(sim.out_capture, os.path.join(d, "out.csv"))
        captureio.write_capture(sim.dest_capture, os.path.join(d, "destination.csv"))
        captureio.write_occupancy_trace(sim.occupancy_trace, os.path.join(d, "occupancy.csv"),
                                        cfg.buffer.unit.value)
        entry = {
            "flood": tag,
            "sent": len(sim.in_capture),
            "delivered": len(sim.out_capture),
            "dropped": len(sim.drops),
            "max_occupancy": sim.max_occupancy(),
            "overflow": sim.overflowed,
        }
        summary.append(entry)
        flag = "" if sim.overflowed else "  no overflow"
        print(f"{tag}: sent={entry['sent']} dropped={entry['dropped']} "
              f"max_occupancy={entry['max_occupancy']}{flag}")
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump({"experiment_id": cfg.experiment_id, "seed": cfg.seed, "floods": summary}, f, indent=2)
        f.write("\n")
    return 0


def _truth_from_args(args):
    if args.truth_ll is None and args.truth_ul is None:
        return None
    if args.truth_ll is None or args.truth_ul is None:
        raise ConfigurationError("--truth-ll and --truth-ul must be given together")
    return GroundTruth(args.truth_ll, args.truth_ul, args.truth_unit)


def cmd_analyze(args) -> int:
    truth = _truth_from_args(args)
    if args.mode == "physical":
        if not (args.in_capture and args.out_capture):
            raise ConfigurationError("physical mode needs --in-capture and --out-capture")
        methods = analyze_flood(captureio.read_capture(args.in_capture),
                                captureio.read_capture(args.out_capture), None)
    else:
        if not args.dest_capture:
            raise ConfigurationError("remote mode needs --dest-capture")
        methods = analyze_flood(None, None, captureio.read_capture(args.dest_capture), args.sent_count)
    notes = [] if args.mode == "physical" else [
        "remote estimates characterize only the dominant bottleneck"]
    report = CharacterizationReport(methods=methods, ground_truth=truth, notes=notes)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    captureio.write_report(report, _report_path(out_dir, args.format), args.format)
    print(_summary_line(report))
    return 0


def cmd_characterize(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or cfg.output_dir
    runs = []
    report = characterize(cfg, runs)
    for run in runs:
        d = os.path.join(out_dir, flood_tag(run.flood))
        os.makedirs(d, exist_ok=True)
        captureio.write_capture(run.sim.in_capture, os.path.join(d, "in.csv"))
        captureio.write_capture(run.sim.out_capture, os.path.join(d, "out.csv"))
        captureio.write_capture(run.sim.dest_capture, os.path.join(d, "destination.csv"))
    os.makedirs(out_dir, exist_ok=True)
    captureio.write_report(report, _report_path(out_dir, args.format), args.format)
    print(_summary_line(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bufprobe", description="Characterize a bottleneck buffer.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-schedule", help="write the send schedule of each flood")
    g.add_argument("--config")
    g.add_argument("--size", type=int, help="packet size in bytes")
    g.add_argument("--rate", type=float, help="input rate in bits/s")
    g.add_argument("--count", type=int, help="number of packets")
    g.add_argument("--start-us", type=float, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_schedule)

    s = sub.add_parser("simulate", help="run floods through the simulated device")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="estimate buffer limits from capture files")
    a.add_argument("--mode", choices=["physical", "remote"], required=True)
    a.add_argument("--in-capture")
    a.add_argument("--out-capture")
    a.add_argument("--dest-capture")
    a.add_argument("--sent-count", type=int)
    a.add_argument("--truth-ll", type=int)
    a.add_argument("--truth-ul", type=int)
    a.add_argument("--truth-unit", choices=["packets", "bytes"], default="packets")
    a.add_argument("--out")
    a.add_argument("--format", choices=["json", "csv"], default="json")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("characterize", help="simulate and analyze a whole experiment matrix")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.add_argument("--format", choices=["json", "csv"], default="json")
    c.set_defaults(func=cmd_characterize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoEstimateError as exc:
        print(f"bufprobe: analysis impossible: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (ConfigurationError, CaptureFormatError, InconsistentCaptureError, ValueError, OSError) as exc:
        print(f"bufprobe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
