"""Time series, entities and sliding windows, plus the preprocessing steps
(missing-value filling, quantile capping, min-max normalisation and the
straight-line filter)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class EmptyWindowError(ValueError):
    """The series is too short to hold a single window."""


class ConstantSeriesError(ValueError):
    """The series has zero range and cannot be min-max normalised."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    id: str
    values: np.ndarray
    entity_id: str = ""
    sensor_type: str = ""
    start_time: datetime = EPOCH
    sample_interval: timedelta = timedelta(minutes=5)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.sample_interval <= timedelta(0):
            raise ValueError("sample_interval must be positive")

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "TimeSeries":
        return replace(self, values=values)

    @property
    def duration(self) -> timedelta:
        return self.sample_interval * len(self.values)

    def timestamps(self) -> list[datetime]:
        return [self.start_time + i * self.sample_interval for i in range(len(self))]


@dataclass(frozen=True)
class Entity:
    """A device: a group of series sampled on one shared time grid."""

    id: str
    sensors: tuple[TimeSeries, ...]
    entity_type: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.sensors:
            first = self.sensors[0]
            for s in self.sensors[1:]:
                if (len(s), s.start_time, s.sample_interval) != (
                    len(first),
                    first.start_time,
                    first.sample_interval,
                ):
                    raise ValueError(f"entity {self.id}: sensor {s.id} is not aligned with {first.id}")

    @property
    def sensor_ids(self) -> list[str]:
        return [s.id for s in self.sensors]

    def sensor(self, series_id: str) -> TimeSeries:
        for s in self.sensors:
            if s.id == series_id:
                return s
        raise KeyError(series_id)


@dataclass(frozen=True)
class Edge:
    entity_a: str
    entity_b: str
    series_a: str
    series_b: str
    distance: float
    dist_hist: float = float("nan")


@dataclass(frozen=True)
class NetworkGraph:
    entities: tuple[Entity, ...]
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def neighbours(self, entity_id: str) -> set[str]:
        out = set()
        for e in self.edges:
            if e.entity_a == entity_id:
                out.add(e.entity_b)
            elif e.entity_b == entity_id:
                out.add(e.entity_a)
        return out

    def device_pairs(self) -> set[tuple[str, str]]:
        return {tuple(sorted((e.entity_a, e.entity_b))) for e in self.edges}


@dataclass(frozen=True)
class WindowSpec:
    length: int
    increment: int = 1

    def __post_init__(self):
        if self.length < 1 or self.increment < 1:
            raise ValueError("window length and increment must be >= 1")
        if self.increment > self.length:
            raise ValueError("increment must not exceed the window length")

    def count(self, n: int) -> int:
        if n < self.length:
            return 0
        return math.ceil((n - self.length + 1) / self.increment)

    def starts(self, n: int) -> np.ndarray:
        return np.arange(0, n - self.length + 1, self.increment)


def sliding_windows(series: TimeSeries | Sequence[float] | int, spec: WindowSpec) -> list[tuple[int, int]]:
    """Half-open ``(start, end)`` index pairs of every window, 0-based."""
    n = series if isinstance(series, int) else len(series)
    if n < spec.length:
        raise EmptyWindowError(f"series of length {n} is shorter than window length {spec.length}")
    return [(int(s), int(s) + spec.length) for s in spec.starts(n)]


def fill_missing(values, max_missing: float = 0.2) -> np.ndarray:
    """Forward-fill then back-fill NaNs. Rejects series with too many gaps."""
    arr = np.array(values, dtype=float)
    missing = np.isnan(arr)
    if missing.all():
        raise ValueError("series has no observed values")
    if missing.mean() > max_missing:
        raise ValueError(f"{missing.mean():.1%} of values missing (limit {max_missing:.0%})")
    if not missing.any():
        return arr
    idx = np.where(~missing, np.arange(len(arr)), 0)
    np.maximum.accumulate(idx, out=idx)
    arr = arr[idx]
    first = np.argmax(~missing)
    arr[:first] = arr[first]
    return arr


def nearest_rank_quantile(values, q: float) -> float:
    """Value at 1-based rank ceil(q*n) of the sorted non-missing values."""
    arr = np.asarray(values, dtype=float)
    arr = np.sort(arr[~np.isnan(arr)])
    if arr.size == 0:
        raise ValueError("quantile of an all-missing series")
    rank = max(1, math.ceil(q * arr.size - 1e-12))
    return float(arr[min(rank, arr.size) - 1])


def cap_quantile(series: TimeSeries, q: float = 0.99) -> TimeSeries:
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    cap = nearest_rank_quantile(series.values, q)
    return series.with_values(np.where(series.values > cap, cap, series.values))


def min_max_normalize(series: TimeSeries) -> TimeSeries:
    v = series.values
    lo, hi = np.nanmin(v), np.nanmax(v)
    if not hi > lo:
        raise ConstantSeriesError(f"series {series.id!r} is constant")
    return series.with_values((v - lo) / (hi - lo))


def is_straight_line(series: TimeSeries | Sequence[float], r_threshold: float = 0.98) -> bool:
    # |r(values, index)| equals |r(values, least-squares fit)|.
    v = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 values")
    if np.ptp(v) == 0:
        return True
    r = np.corrcoef(v, np.arange(v.size))[0, 1]
    return bool(abs(r) >= r_threshold)


def preprocess(series: TimeSeries, q: float = 0.99, max_missing: float = 0.2) -> TimeSeries:
    """Fill gaps, cap at the q-quantile and min-max normalise.

    Raises ConstantSeriesError when nothing is left to normalise.
    """
    filled = series.with_values(fill_missing(series.values, max_missing))
    return min_max_normalize(cap_quantile(filled, q))
