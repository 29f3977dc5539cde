"""Characterization report types."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Optional


def error_percent(estimate, truth) -> float:
    """``100 * |estimate - truth| / truth`` rounded half-up to two decimals."""
    if truth == 0:
        raise ZeroDivisionError("ground truth of zero has no relative error")
    exact = Fraction(abs(Fraction(estimate) - Fraction(truth)) * 100) / Fraction(truth)
    value = Decimal(exact.numerator) / Decimal(exact.denominator)
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MethodEstimate:
    ll: int
    ul: int
    unit: str
    r_in_bps: Optional[float] = None
    r_out_bps: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "ll": self.ll,
            "ul": self.ul,
            "unit": self.unit,
            "r_in_bps": _rate(self.r_in_bps),
            "r_out_bps": _rate(self.r_out_bps),
        }


@dataclass(frozen=True)
class GroundTruth:
    ll: int
    ul: int
    unit: str = "packets"

    def to_dict(self) -> dict:
        return {"ll": self.ll, "ul": self.ul, "unit": self.unit}


@dataclass
class CharacterizationReport:
    """Estimates per method, with errors against ground truth when known.

    ``methods`` maps a method name (``"method1"``, ``"method2"``) to its
    estimate. ``per_size`` optionally nests the same structure per packet
    size for multi-size runs.
    """

    methods: dict = field(default_factory=dict)
    ground_truth: Optional[GroundTruth] = None
    unit_inference: Optional[str] = None
    experiment_id: Optional[str] = None
    per_size: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def error_percent(self) -> Optional[dict]:
        if self.ground_truth is None:
            return None
        out = {}
        for name, est in self.methods.items():
            out[name] = {
                "ll": error_percent(est.ll, self.ground_truth.ll),
                "ul": error_percent(est.ul, self.ground_truth.ul),
            }
        return out

    def to_dict(self) -> dict:
        doc = {"format": "bufprobe-report v1"}
        if self.experiment_id is not None:
            doc["experiment_id"] = self.experiment_id
        doc["methods"] = {name: est.to_dict() for name, est in self.methods.items()}
        if self.unit_inference is not None:
            doc["unit_inference"] = self.unit_inference
        if self.ground_truth is not None:
            doc["ground_truth"] = self.ground_truth.to_dict()
            doc["error_percent"] = self.error_percent()
        if self.per_size:
            doc["per_size"] = {
                str(size): {name: est.to_dict() for name, est in methods.items()}
                for size, methods in sorted(self.per_size.items(), reverse=True)
            }
        if self.notes:
            doc["notes"] = list(self.notes)
        return doc

    def headline(self, method: Optional[str] = None) -> MethodEstimate:
        if method is None:
            method = "method1" if "method1" in self.methods else next(iter(self.methods))
        return self.methods[method]


def _rate(x):
    return None if x is None else round(float(x))
