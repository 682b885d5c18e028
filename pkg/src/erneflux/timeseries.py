"""Sampled curves: the common container for recovery data and model output."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class TimeSeries:
    """A sampled curve y(t).

    t is in seconds (or lattice steps for raw walk output) and strictly
    increasing; y is in arbitrary intensity/density units. At least three
    points are required so that downstream fits are not trivially degenerate.
    """

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        if t.ndim != 1 or y.ndim != 1 or t.size != y.size:
            raise ValueError("t and y must be 1-D arrays of equal length")
        if t.size < 3:
            raise ValueError("a time series needs at least 3 points")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ValueError("time series values must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing")

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def covers(self, other: "TimeSeries") -> bool:
        return self.t[0] <= other.t[0] and self.t[-1] >= other.t[-1]

    def interp_at(self, times: np.ndarray) -> np.ndarray:
        """Linear interpolation; times must lie within the sampled span."""
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < self.t[0] or times.max() > self.t[-1]):
            raise ValueError("interpolation times outside the sampled span")
        return np.interp(times, self.t, self.y)

    def shifted(self, t0: float) -> "TimeSeries":
        return TimeSeries(self.t - t0, self.y.copy())

    def to_csv(self, path: str | Path, value_column: str = "intensity") -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", value_column])
            for ti, yi in zip(self.t, self.y):
                writer.writerow([f"{ti:.10g}", f"{yi:.10g}"])
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        """Read a two-column `t_s,<value>` CSV with a header row."""
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2 or header[0] != "t_s":
                raise DataError(f"{path}: expected header 't_s,<value>'")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        if not rows:
            raise DataError(f"{path}: no data rows")
        t, y = zip(*rows)
        return cls(np.array(t), np.array(y))


def align_and_average(
    series_list: list[TimeSeries], n_points: int = 100
) -> tuple[TimeSeries, np.ndarray]:
    """Average recovery curves across cells.

    Each series is shifted so its first sample (the bleach time point) is
    t = 0, all are interpolated onto a common grid spanning the shared time
    window, and the point-wise mean and standard deviation are returned.
    """
    if not series_list:
        raise DataError("no series to average")
    shifted = [s.shifted(s.t[0]) for s in series_list]
    t_max = min(s.t[-1] for s in shifted)
    if t_max <= 0:
        raise DataError("series do not share a common time window")
    grid = np.linspace(0.0, t_max, n_points)
    stack = np.vstack([s.interp_at(grid) for s in shifted])
    mean = stack.mean(axis=0)
    sd = stack.std(axis=0, ddof=1) if len(series_list) > 1 else np.zeros_like(mean)
    return TimeSeries(grid, mean), sd
