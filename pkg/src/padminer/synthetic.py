"""Synthetic datasets with planted structure, used by tests and scripts."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from .series import Entity, TimeSeries


def ar1(n: int, rng: np.random.Generator, phi: float = 0.95) -> np.ndarray:
    e = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = e[0]
    for i in range(1, n):
        out[i] = phi * out[i - 1] + e[i]
    return out


@dataclass
class PlantedNetwork:
    entities: list[Entity]
    cluster_of: dict[str, int]
    device_type: dict[str, str]
    # Relation types in decreasing planted support.
    relation_types: list[tuple[str, str]]


def planted_network(
    n_clusters: int = 10,
    per_type: int = 5,
    days: int = 14,
    per_day: int = 24,
    noise: float = 0.02,
    seed: int = 0,
) -> PlantedNetwork:
    """Devices of four types (A, B, C, D) in clusters that share signals.

    Within a cluster:
      * every A and B device has a ``cpu`` sensor copying one latent signal,
      * every C device has a ``temp`` sensor copying a second one,
      * C device i has a ``tx`` sensor that D device i copies as ``rx``.
    Planted supports (distinct device pairs) are 45, 10 and 5 per cluster.
    """
    rng = np.random.default_rng(seed)
    n = days * per_day
    step = timedelta(hours=24 / per_day)
    entities, cluster_of, device_type = [], {}, {}

    def sensor(dev, kind, base):
        x = base + noise * rng.standard_normal(n)
        return TimeSeries(f"{dev}/{kind}", x, dev, kind, sample_interval=step)

    for c in range(n_clusters):
        s_cpu, s_temp = ar1(n, rng), ar1(n, rng)
        links = [ar1(n, rng) for _ in range(per_type)]
        for t in "ABCD":
            for i in range(per_type):
                dev = f"{t}{c:02d}{i}"
                cluster_of[dev] = c
                device_type[dev] = t
                if t in "AB":
                    sensors = (sensor(dev, "cpu", s_cpu),)
                elif t == "C":
                    sensors = (sensor(dev, "temp", s_temp), sensor(dev, "tx", links[i]))
                else:
                    sensors = (sensor(dev, "rx", links[i]),)
                entities.append(Entity(dev, sensors, t))
    return PlantedNetwork(entities, cluster_of, device_type, [("cpu", "cpu"), ("temp", "temp"), ("rx", "tx")])


@dataclass
class ContextualDataset:
    entities: list[Entity]
    target: str
    anomaly_start: int
    anomaly_length: int
    labels: np.ndarray


def _day_shape(kind: int, per_day: int) -> np.ndarray:
    t = np.arange(per_day) / per_day
    centre = 0.3 if kind == 0 else 0.7
    return np.exp(-((t - centre) ** 2) / 0.01)


def contextual_dataset(
    days: int = 60,
    per_day: int = 48,
    n_other: int = 18,
    anomaly_day: int = 40,
    noise: float = 0.01,
    seed: int = 0,
) -> ContextualDataset:
    """Two devices carry copies of one sensor whose daily shape is either a
    morning or an evening peak, chosen at random per day.  On ``anomaly_day``
    the copy on the peer device flattens to a mid-level plateau while the
    target stays ordinary, so the deviation is only visible through the
    network.  Unrelated devices fill the rest of the network.
    """
    rng = np.random.default_rng(seed)
    n = days * per_day
    step = timedelta(hours=24 / per_day)
    kinds = rng.integers(0, 2, days)
    base = np.concatenate([_day_shape(k, per_day) for k in kinds]) + noise * rng.standard_normal(n)
    # The peer carries an exact copy of the sensor except on the anomalous day.
    copy = base.copy()
    lo = anomaly_day * per_day
    copy[lo : lo + per_day] = 0.5 + noise * rng.standard_normal(per_day)

    def series(dev, kind, x):
        return TimeSeries(f"{dev}/{kind}", x, dev, kind, sample_interval=step)

    entities = [
        Entity("target", (series("target", "load", base),)),
        Entity("peer", (series("peer", "load", copy),)),
    ]
    for i in range(n_other):
        # Skewed, unrelated signals so that no other pair looks alike.
        x = np.exp(rng.uniform(0.2, 1.5) * ar1(n, rng) / 3)
        entities.append(Entity(f"other{i:02d}", (series(f"other{i:02d}", "load", x),)))
    labels = np.zeros(n, dtype=np.int8)
    labels[lo : lo + per_day] = 1
    return ContextualDataset(entities, "target", lo, per_day, labels)


def blob_with_outliers(n: int = 1000, n_outliers: int = 5, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """2-D Gaussian blob with ``n_outliers`` points placed far outside it."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    idx = rng.choice(n, n_outliers, replace=False)
    angles = rng.uniform(0, 2 * np.pi, n_outliers)
    X[idx] = np.c_[np.cos(angles), np.sin(angles)] * rng.uniform(7, 9, (n_outliers, 1))
    return X, np.sort(idx)


def taxi_like(
    n: int = 10320, per_day: int = 48, n_anomalies: int = 5, anomaly_length: int = 1030, seed: int = 0
) -> tuple[TimeSeries, np.ndarray]:
    """Half-hourly demand with daily and weekly cycles and a few disrupted days.

    Mimics the shape and size of a public taxi-demand benchmark so that its
    harness can be timed offline.  Each labelled region is centred on one day
    whose profile is replaced by a flat or a doubled one; as in that benchmark
    the label windows are much wider than the disruption itself.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    day = (t % per_day) / per_day
    daily = 0.6 + 0.4 * np.sin(2 * np.pi * (day - 0.3)) - 0.3 * np.exp(-((day - 0.2) ** 2) / 0.005)
    weekly = 1.0 - 0.15 * (((t // per_day) % 7) >= 5)
    x = 15000 * daily * weekly + 600 * ar1(n, rng, 0.8)
    labels = np.zeros(n, dtype=np.int8)
    days = n // per_day
    picks = np.sort(rng.choice(np.arange(14, days - 14), n_anomalies, replace=False))
    for i, d in enumerate(picks):
        lo = d * per_day
        if i % 2:
            x[lo : lo + per_day] = x[lo : lo + per_day].mean() + 300 * rng.standard_normal(per_day)
        else:
            x[lo : lo + per_day] *= 1.8
        c = lo + per_day // 2
        labels[max(0, c - anomaly_length // 2) : c + anomaly_length // 2] = 1
    ts = TimeSeries("nyc_taxi_like", x, "nyc_taxi_like", "value", sample_interval=timedelta(minutes=30))
    return ts, labels
