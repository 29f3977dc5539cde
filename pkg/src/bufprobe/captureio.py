"""Capture CSV v1 and report JSON/CSV on disk.

Capture file layout::

    # bufprobe-capture v1 point=destination
    seq,timestamp_us,size_bytes
    7,1200.0,1500

An optional ``experiment=<id>`` token may follow the point label.
"""

from __future__ import annotations

import csv
import io
import json
import os
from decimal import Decimal, InvalidOperation

from .errors import CaptureFormatError, MonotonicityError, VersionError
from .model import TICKS_PER_US, Capture, CapturePoint, PacketRecord, round_half_up
from .report import CharacterizationReport

CAPTURE_MAGIC = "# bufprobe-capture"
OCCUPANCY_MAGIC = "# bufprobe-occupancy"
VERSION = "v1"
COLUMNS = "seq,timestamp_us,size_bytes"


def format_ticks(ticks: int) -> str:
    return f"{ticks // TICKS_PER_US}.{ticks % TICKS_PER_US}"


def _parse_ticks(text: str) -> int:
    value = Decimal(text)
    if not value.is_finite():
        raise InvalidOperation(text)
    return round_half_up(value * TICKS_PER_US)


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def capture_to_text(capture: Capture) -> str:
    header = f"{CAPTURE_MAGIC} {VERSION} point={capture.point.value}"
    if capture.experiment_id:
        header += f" experiment={capture.experiment_id}"
    lines = [header, COLUMNS]
    lines += [f"{r.seq},{format_ticks(r.ticks)},{r.size_bytes}" for r in capture.records]
    return "\n".join(lines) + "\n"


def write_capture(capture: Capture, path) -> None:
    _write_text(path, capture_to_text(capture))


def _parse_header(line: str, magic: str, path):
    if not line.startswith(magic):
        raise CaptureFormatError("missing capture header", path, 1)
    tokens = line[len(magic):].split()
    if not tokens:
        raise VersionError("header has no version", path, 1)
    if tokens[0] != VERSION:
        raise VersionError(f"unsupported version {tokens[0]!r}", path, 1)
    fields = {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise CaptureFormatError(f"bad header token {tok!r}", path, 1)
        fields[key] = value
    return fields


def capture_from_text(text: str, path=None) -> Capture:
    lines = text.splitlines()
    if not lines:
        raise CaptureFormatError("empty file", path, 1)
    fields = _parse_header(lines[0], CAPTURE_MAGIC, path)
    try:
        point = CapturePoint(fields.get("point", ""))
    except ValueError:
        raise CaptureFormatError(f"unknown point {fields.get('point')!r}", path, 1) from None
    if len(lines) < 2 or lines[1].strip() != COLUMNS:
        raise CaptureFormatError(f"expected column line {COLUMNS!r}", path, 2)

    records, seen, last_ticks = [], {}, None
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        if len(row) != 3:
            raise CaptureFormatError(f"expected 3 fields, got {len(row)}", path, lineno)
        try:
            rec = PacketRecord(int(row[0]), _parse_ticks(row[1]), int(row[2]))
        except (ValueError, InvalidOperation) as exc:
            raise CaptureFormatError(f"malformed row {','.join(row)!r}: {exc}", path, lineno) from None
        if rec.seq in seen:
            raise CaptureFormatError(
                f"duplicate seq {rec.seq} (first seen on line {seen[rec.seq]})", path, lineno
            )
        if last_ticks is not None and rec.ticks < last_ticks:
            raise MonotonicityError(f"timestamp decreases at seq {rec.seq}", path, lineno)
        seen[rec.seq] = lineno
        last_ticks = rec.ticks
        records.append(rec)
    return Capture(point, tuple(records), fields.get("experiment"))


def read_capture(path) -> Capture:
    with open(path, newline="") as f:
        text = f.read()
    return capture_from_text(text, path)


def write_occupancy_trace(trace, path, unit: str = "packets") -> None:
    lines = [f"{OCCUPANCY_MAGIC} {VERSION} unit={unit}", "timestamp_us,occupancy"]
    lines += [f"{format_ticks(t)},{o}" for t, o in trace]
    _write_text(path, "\n".join(lines) + "\n")


def read_occupancy_trace(path) -> list:
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    if not lines:
        raise CaptureFormatError("empty file", path, 1)
    _parse_header(lines[0], OCCUPANCY_MAGIC, path)
    out = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            t, o = line.split(",")
            out.append((_parse_ticks(t), int(o)))
        except (ValueError, InvalidOperation):
            raise CaptureFormatError(f"malformed row {line!r}", path, lineno) from None
    return out


def report_to_json(report: CharacterizationReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def report_to_csv(report: CharacterizationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "ll", "ul", "unit", "r_in_bps", "r_out_bps",
                "error_ll_percent", "error_ul_percent"])
    errors = report.error_percent() or {}
    for name, est in report.methods.items():
        d = est.to_dict()
        err = errors.get(name, {})
        w.writerow([name, d["ll"], d["ul"], d["unit"], _blank(d["r_in_bps"]),
                    _blank(d["r_out_bps"]), _blank(err.get("ll")), _blank(err.get("ul"))])
    return buf.getvalue()


def _blank(x):
    return "" if x is None else x


def write_report(report: CharacterizationReport, path, fmt: str = "json") -> None:
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    _write_text(path, text)
