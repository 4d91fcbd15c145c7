"""Calibration of predicted Laplace distributions against realized residuals.

Each residual is converted to a standard score (residual / predicted scale)
and pushed through the standard Laplace CDF. For a calibrated predictor
those CDF values are uniform, so the observed cumulative fraction at each
expected probability should match it. The report carries the resulting
(expected, observed) curve and a scalar summary: the mean absolute gap
between the two, reported here as ``ece``. That summary is an
artifact-defined convenience, not a standard metric.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._util import fmt_sig

__all__ = [
    "PredictionRecord",
    "CalibrationReport",
    "DEFAULT_GRID",
    "standard_score",
    "laplace_cdf",
    "laplace_quantile",
    "calibration_report",
    "report_to_csv",
    "records_from_csv",
]

DEFAULT_GRID: tuple[float, ...] = tuple(i / 100.0 for i in range(1, 100))


@dataclass(frozen=True)
class PredictionRecord:
    """One residual (label minus predicted location) with its predicted scale."""

    residual: float
    scale: float
    class_name: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.residual):
            raise ValueError(f"residual must be finite, got {self.residual}")
        if not (self.scale > 0.0) or not math.isfinite(self.scale):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


def standard_score(record: PredictionRecord) -> float:
    """Residual in units of the predicted scale."""
    return record.residual / record.scale


def laplace_cdf(z: float) -> float:
    """CDF of the standard Laplace distribution."""
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    if z < 0.0:
        return 0.5 * math.exp(z)
    return 1.0 - 0.5 * math.exp(-z)


def laplace_quantile(p: float) -> float:
    """Inverse CDF of the standard Laplace distribution, p in (0, 1)."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p}")
    if p < 0.5:
        return math.log(2.0 * p)
    return -math.log(2.0 * (1.0 - p))


@dataclass(frozen=True)
class CalibrationReport:
    """(expected_cdf, observed_cdf) pairs plus their mean absolute gap."""

    curve: tuple[tuple[float, float], ...]
    ece: float
    n: int


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.size == 0:
        raise ValueError("grid must be non-empty")
    if not (np.all(arr > 0.0) and np.all(arr < 1.0)):
        raise ValueError("grid points must lie strictly inside (0, 1)")
    if not np.all(np.diff(arr) > 0.0):
        raise ValueError("grid must be strictly increasing")
    return arr


def _counts(sorted_scores: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # Inclusive comparison: a score CDF equal to the grid point counts.
    return np.searchsorted(sorted_scores, grid, side="right")


def calibration_report(
    records: Sequence[PredictionRecord],
    grid: Sequence[float] = DEFAULT_GRID,
    max_workers: int = 1,
) -> CalibrationReport:
    """Observed cumulative fractions of Laplace-CDF scores at each grid point.

    ``observed(p) = |{records : cdf(standard_score) <= p}| / n``. With
    ``max_workers > 1`` the records are partitioned across threads and the
    integer counts merged, so the result is independent of partitioning.
    """
    if not records:
        raise ValueError("records must be non-empty")
    grid_arr = _check_grid(grid)
    scores = np.array([laplace_cdf(standard_score(r)) for r in records])

    workers = max(1, int(max_workers))
    if workers > 1 and scores.size > 1:
        chunks = [np.sort(c) for c in np.array_split(scores, min(workers, scores.size))]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda c: _counts(c, grid_arr), chunks))
        counts = np.sum(partials, axis=0)
    else:
        counts = _counts(np.sort(scores), grid_arr)

    observed = counts / float(len(records))
    curve = tuple((float(p), float(o)) for p, o in zip(grid_arr, observed))
    ece = float(np.mean(np.abs(observed - grid_arr)))
    return CalibrationReport(curve=curve, ece=ece, n=len(records))


def report_to_csv(report: CalibrationReport) -> str:
    """Curve rows followed by a summary line ``ece,<value>``."""
    lines = ["expected_cdf,observed_cdf"]
    for expected, observed in report.curve:
        lines.append(f"{fmt_sig(expected)},{fmt_sig(observed)}")
    lines.append(f"ece,{fmt_sig(report.ece)}")
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[PredictionRecord]:
    """Parse ``residual,scale,class_name`` rows (header required)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("prediction CSV is empty") from None
    expected = ["residual", "scale", "class_name"]
    if [h.strip() for h in header] != expected:
        raise ValueError(f"prediction CSV header must be {','.join(expected)!r}, got {header}")
    records: list[PredictionRecord] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"line {lineno}: expected 3 columns, got {len(row)}")
        try:
            records.append(
                PredictionRecord(residual=float(row[0]), scale=float(row[1]), class_name=row[2])
            )
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return records
