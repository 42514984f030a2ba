"""Uniform-grid scalar time series and the numeric primitives built on them."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Defaults for the ratio guard used throughout the metric pipeline.
DEFAULT_EPS = 1e-9
DEFAULT_CAP = 2.0


class TimeSeries:
    """Scalar curve sampled once per tick on a gap-free integer grid.

    The tick spacing is always 1; ``t0`` is the tick index of the first
    sample.  Values are held as a float64 numpy array and treated as
    immutable after construction.
    """

    __slots__ = ("t0", "values")

    def __init__(self, values: Iterable[float], t0: int = 0):
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                         dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("time series needs a non-empty 1-D value sequence")
        if t0 < 0:
            raise ValueError(f"t0 must be >= 0, got {t0}")
        self.t0 = int(t0)
        self.values = arr

    @property
    def dt(self) -> int:
        return 1

    def __len__(self) -> int:
        return self.values.size

    @property
    def horizon(self) -> int:
        return self.values.size

    @property
    def end_tick(self) -> int:
        """Tick index of the last sample."""
        return self.t0 + self.values.size - 1

    def value_at(self, tick: int) -> float:
        if not self.t0 <= tick <= self.end_tick:
            raise ValueError(f"tick {tick} outside series range [{self.t0}, {self.end_tick}]")
        return float(self.values[tick - self.t0])

    def slice_values(self, start_tick: int, end_tick: int) -> np.ndarray:
        """Values for ticks ``start_tick..end_tick`` inclusive."""
        if not (self.t0 <= start_tick <= end_tick <= self.end_tick):
            raise ValueError(
                f"tick range [{start_tick}, {end_tick}] outside series "
                f"range [{self.t0}, {self.end_tick}]")
        return self.values[start_tick - self.t0:end_tick - self.t0 + 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.t0 == other.t0 and np.array_equal(self.values, other.values)

    def __hash__(self):  # pragma: no cover - mutable payload
        raise TypeError("TimeSeries is not hashable")

    def __repr__(self) -> str:
        return f"TimeSeries(t0={self.t0}, n={len(self)})"

    def to_csv(self, path: str | Path) -> None:
        """Write the series as ``tick,value`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "value"])
            for i, v in enumerate(self.values):
                writer.writerow([self.t0 + i, repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        """Read a ``tick,value`` CSV; ticks must be consecutive integers."""
        ticks: list[int] = []
        values: list[float] = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["tick", "value"]:
                raise ValueError(f"{path}: expected header 'tick,value'")
            for row in reader:
                if not row:
                    continue
                ticks.append(int(row[0]))
                values.append(float(row[1]))
        if not ticks:
            raise ValueError(f"{path}: no data rows")
        for prev, cur in zip(ticks, ticks[1:]):
            if cur != prev + 1:
                raise ValueError(f"{path}: ticks must be consecutive, got {prev} then {cur}")
        return cls(values, t0=ticks[0])


@dataclass(frozen=True)
class Window:
    """Tick interval ``[start, end)`` used to isolate one disruptive event.

    A degenerate window (start == end) is tolerated so that zero-length
    integrals are well defined; producers of windows never emit one.
    """

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} > end {self.end}")

    @property
    def length(self) -> int:
        return self.end - self.start


def trapezoid_integral(ts: TimeSeries, w: Window) -> float:
    """Trapezoidal-rule integral of ``ts`` over ticks ``[w.start, w.end]``.

    Exact for piecewise-linear series with breakpoints on the tick grid.
    A zero-length window integrates to 0.
    """
    if w.start == w.end:
        return 0.0
    vals = ts.slice_values(w.start, w.end)
    return float(np.sum((vals[:-1] + vals[1:]) * 0.5))


def _check_aligned(series: Sequence[TimeSeries]) -> None:
    if not series:
        raise ValueError("need at least one series")
    first = series[0]
    for s in series[1:]:
        if s.t0 != first.t0 or len(s) != len(first):
            raise ValueError(
                f"series are not aligned: ({first.t0}, {len(first)}) vs ({s.t0}, {len(s)})")


def pointwise_mean(series: Sequence[TimeSeries]) -> TimeSeries:
    """Element-wise arithmetic mean of aligned series."""
    _check_aligned(series)
    stacked = np.stack([s.values for s in series])
    return TimeSeries(stacked.mean(axis=0), t0=series[0].t0)


def pointwise_std(series: Sequence[TimeSeries]) -> TimeSeries:
    """Element-wise population standard deviation; companion of pointwise_mean."""
    _check_aligned(series)
    stacked = np.stack([s.values for s in series])
    return TimeSeries(stacked.std(axis=0), t0=series[0].t0)


def guarded_ratio(num: float, den: float, eps: float = DEFAULT_EPS,
                  cap: float = DEFAULT_CAP) -> float:
    """Quotient ``num/den`` with defined behavior for a vanishing denominator.

    If the denominator falls below ``eps``: both tiny -> 1.0 (no evidence of
    deviation); numerator alive -> ``cap`` (bounded exceeding-expectation).
    Total on all finite inputs; never returns NaN or infinity.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if den >= eps:
        return num / den
    if num < eps:
        return 1.0
    return cap
