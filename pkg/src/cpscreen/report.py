"""Evaluation reports: per-target per-draw RMSE with aggregation.

Reports serialize to JSON with full float precision.  Failed cells are
``null`` (missing), never zero, so they cannot bias medians.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError


def _check_cell(v: float | None) -> float | None:
    if v is None:
        return None
    v = float(v)
    if not np.isfinite(v) or v < 0:
        raise InvalidInputError(f"RMSE cells must be finite and >= 0, got {v}")
    return v


def _mean_median(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(np.median(arr))


@dataclass(frozen=True)
class TargetReport:
    """RMSE of one method on one target, per draw (None = failed cell)."""

    target_id: str
    per_draw_rmse: tuple[float | None, ...]
    mean: float | None
    median: float | None

    @classmethod
    def from_cells(cls, target_id: str, cells) -> "TargetReport":
        cells = tuple(_check_cell(v) for v in cells)
        mean, median = _mean_median([v for v in cells if v is not None])
        return cls(target_id=target_id, per_draw_rmse=cells, mean=mean, median=median)


@dataclass(frozen=True)
class EvaluationReport:
    """All RMSE cells of one method, with pooled aggregate statistics."""

    method: str
    per_target: tuple[TargetReport, ...]
    aggregate_median: float | None
    aggregate_mean: float | None

    @classmethod
    def from_targets(cls, method: str, per_target) -> "EvaluationReport":
        per_target = tuple(per_target)
        pooled = [
            v for t in per_target for v in t.per_draw_rmse if v is not None
        ]
        mean, median = _mean_median(pooled)
        return cls(
            method=method,
            per_target=per_target,
            aggregate_median=median,
            aggregate_mean=mean,
        )

    @property
    def n_failed_cells(self) -> int:
        return sum(
            1 for t in self.per_target for v in t.per_draw_rmse if v is None
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "per_target": [
                {
                    "target_id": t.target_id,
                    "per_draw_rmse": list(t.per_draw_rmse),
                    "mean": t.mean,
                    "median": t.median,
                }
                for t in self.per_target
            ],
            "aggregate": {
                "median": self.aggregate_median,
                "mean": self.aggregate_mean,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvaluationReport":
        try:
            per_target = tuple(
                TargetReport(
                    target_id=t["target_id"],
                    per_draw_rmse=tuple(
                        None if v is None else _check_cell(v)
                        for v in t["per_draw_rmse"]
                    ),
                    mean=t["mean"],
                    median=t["median"],
                )
                for t in doc["per_target"]
            )
            return cls(
                method=doc["method"],
                per_target=per_target,
                aggregate_median=doc["aggregate"]["median"],
                aggregate_mean=doc["aggregate"]["mean"],
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"report document missing field: {exc}") from None


def save_report(report: EvaluationReport, path) -> None:
    """Write a report as JSON; NaN cells are rejected."""
    try:
        text = json.dumps(report.to_dict(), allow_nan=False, indent=2)
    except ValueError as exc:
        raise InvalidInputError(f"report contains non-finite values: {exc}") from None
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_report(path) -> EvaluationReport:
    """Load a report written by ``save_report``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad report file: {exc}") from None
    return EvaluationReport.from_dict(doc)


def summary_table(reports) -> str:
    """Aligned method-by-aggregate comparison table.

    Duplicate method names get ``#2``, ``#3`` ... suffixes so merged
    tables from several runs stay unambiguous.
    """
    reports = list(reports)
    seen: dict[str, int] = {}
    rows = []
    for r in reports:
        seen[r.method] = seen.get(r.method, 0) + 1
        name = r.method if seen[r.method] == 1 else f"{r.method}#{seen[r.method]}"
        fmt = lambda v: "-" if v is None else f"{v:.4f}"
        failed = r.n_failed_cells
        rows.append((name, fmt(r.aggregate_median), fmt(r.aggregate_mean),
                     str(failed) if failed else ""))
    headers = ("method", "median_rmse", "mean_rmse", "failed_cells")
    widths = [
        max(len(headers[j]), max((len(row[j]) for row in rows), default=0))
        for j in range(4)
    ]
    lines = ["  ".join(h.ljust(widths[j]) for j, h in enumerate(headers))]
    for row in rows:
        lines.append("  ".join(row[j].ljust(widths[j]) for j in range(4)).rstrip())
    return "\n".join(lines)
