"""Recovering edges between devices from feature-based series similarity.

Every normalised series is summarised by a density fingerprint (a time x
value grid of log-scaled sample counts) and a value histogram. Pairs of
series on different devices that are close on both summaries are kept.
Relation types (pairs of sensor types) are mined greedily from those pairs,
and only edges of a frequent relation type make it into the network.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .series import ConstantSeriesError, Edge, Entity, NetworkGraph, TimeSeries, is_straight_line, preprocess

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Fingerprint:
    grid: np.ndarray
    interval: timedelta = timedelta(hours=24)
    bins_f: int = 5

    @classmethod
    def from_counts(cls, counts, **kw) -> "Fingerprint":
        return cls(np.log1p(np.asarray(counts, dtype=float)), **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


def _value_bins(values: np.ndarray, bins: int) -> np.ndarray:
    # Values are normalised to [0, 1]; 1.0 belongs to the top bin.
    return np.clip((np.asarray(values) * bins).astype(int), 0, bins - 1)


def create_fingerprint(series: TimeSeries, interval: timedelta = timedelta(hours=24), bins_f: int = 5) -> Fingerprint:
    if interval < series.sample_interval:
        raise ValueError("fingerprint interval is shorter than the sample interval")
    n = len(series)
    columns = math.ceil(series.duration / interval)
    col = (np.arange(n) * series.sample_interval) // interval
    counts = np.zeros((columns, bins_f))
    np.add.at(counts, (np.asarray(col, dtype=int), _value_bins(series.values, bins_f)), 1)
    return Fingerprint(np.log1p(counts), interval, bins_f)


def dist_fp(a: Fingerprint | np.ndarray, b: Fingerprint | np.ndarray) -> float:
    ga = a.grid if isinstance(a, Fingerprint) else np.asarray(a)
    gb = b.grid if isinstance(b, Fingerprint) else np.asarray(b)
    if ga.shape != gb.shape:
        raise ValueError(f"fingerprint shapes differ: {ga.shape} vs {gb.shape}")
    return float(np.abs(ga - gb).sum())


@dataclass(frozen=True, eq=False)
class HistogramSummary:
    frequencies: np.ndarray

    @property
    def bins(self) -> int:
        return self.frequencies.size


def create_histogram(series: TimeSeries | Sequence[float], bins_h: int = 100) -> HistogramSummary:
    values = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    counts = np.bincount(_value_bins(values, bins_h), minlength=bins_h)
    return HistogramSummary(counts / values.size)


def dist_hist(a: HistogramSummary | np.ndarray, b: HistogramSummary | np.ndarray) -> float:
    fa = a.frequencies if isinstance(a, HistogramSummary) else np.asarray(a)
    fb = b.frequencies if isinstance(b, HistogramSummary) else np.asarray(b)
    if fa.shape != fb.shape:
        raise ValueError("histograms have different bin counts")
    return float(np.abs(fa - fb).sum())


# -- similarity matrix -----------------------------------------------------


@dataclass(frozen=True)
class Threshold:
    """An absolute distance, or a quantile of the pairwise distance distribution."""

    value: float
    quantile: bool = False


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    series_ids: tuple[str, ...]
    i: np.ndarray
    j: np.ndarray
    d_fp: np.ndarray
    d_hist: np.ndarray
    t_f: float = float("nan")
    t_h: float = float("nan")
    pairs_compared: int = 0

    def __len__(self) -> int:
        return int(self.i.size)

    def entries(self) -> Iterable[tuple[str, str, float, float]]:
        for a, b, f, h in zip(self.i, self.j, self.d_fp, self.d_hist):
            yield self.series_ids[a], self.series_ids[b], float(f), float(h)

    def as_dict(self) -> dict[tuple[str, str], float]:
        out = {}
        for a, b, f, _ in self.entries():
            out[(a, b)] = f
            out[(b, a)] = f
        return out


def _sample_pairs(n: int, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    total = n * (n - 1) // 2
    if total <= size:
        return np.triu_indices(n, k=1)
    a = rng.integers(0, n, size=size * 2)
    b = rng.integers(0, n, size=size * 2)
    keep = a != b
    a, b = a[keep][:size], b[keep][:size]
    return np.minimum(a, b), np.maximum(a, b)


def resolve_thresholds(
    F: np.ndarray, H: np.ndarray, t_f: Threshold, t_h: Threshold, sample: int = 100_000, seed: int = 0
) -> tuple[float, float]:
    """Quantile thresholds at level q keep the closest (1 - q) fraction of pairs."""
    if not (t_f.quantile or t_h.quantile):
        return t_f.value, t_h.value
    a, b = _sample_pairs(F.shape[0], sample, np.random.default_rng(seed))
    out = []
    for t, X in ((t_f, F), (t_h, H)):
        if not t.quantile:
            out.append(t.value)
            continue
        d = np.abs(X[a] - X[b]).sum(axis=1) if a.size else np.zeros(1)
        out.append(float(np.quantile(d, 1.0 - t.value)))
    return out[0], out[1]


def build_similarity_matrix(
    series_ids: Sequence[str],
    fingerprints: Sequence[Fingerprint] | np.ndarray,
    histograms: Sequence[HistogramSummary] | np.ndarray,
    t_f: Threshold | float,
    t_h: Threshold | float,
    block: int = 256,
    seed: int = 0,
    exclude: set[tuple[int, int]] | None = None,
) -> SimilarityMatrix:
    """All pairs i < j with ``dist_fp < t_f`` and ``dist_hist < t_h``."""
    F = _stack([f.grid.ravel() for f in fingerprints] if not isinstance(fingerprints, np.ndarray) else fingerprints)
    H = _stack([h.frequencies for h in histograms] if not isinstance(histograms, np.ndarray) else histograms)
    t_f = t_f if isinstance(t_f, Threshold) else Threshold(float(t_f))
    t_h = t_h if isinstance(t_h, Threshold) else Threshold(float(t_h))
    tf, th = resolve_thresholds(F, H, t_f, t_h, seed=seed)
    n = F.shape[0]
    I, J, DF, DH = [], [], [], []
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        d_fp = cdist(F[lo:hi], F[lo:], "cityblock")
        ii, jj = np.nonzero(d_fp < tf)
        jj = jj + lo
        upper = jj > ii + lo
        ii, jj = ii[upper], jj[upper]
        if ii.size == 0:
            continue
        dh = np.abs(H[ii + lo] - H[jj]).sum(axis=1)
        ok = dh < th
        I.append(ii[ok] + lo)
        J.append(jj[ok])
        DF.append(d_fp[ii[ok], jj[ok] - lo])
        DH.append(dh[ok])
    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt)  # noqa: E731
    I, J, DF, DH = cat(I, np.int64), cat(J, np.int64), cat(DF, float), cat(DH, float)
    if exclude:
        keep = np.array([(a, b) not in exclude for a, b in zip(I, J)], dtype=bool)
        I, J, DF, DH = I[keep], J[keep], DF[keep], DH[keep]
    return SimilarityMatrix(tuple(series_ids), I, J, DF, DH, tf, th, n * (n - 1) // 2)


def _stack(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr.reshape(len(arr), -1)


# -- frequent relation types -----------------------------------------------


@dataclass(frozen=True, order=True)
class RelationType:
    type_a: str
    type_b: str
    support: int = field(default=0, compare=False)

    @staticmethod
    def canonical(t1: str, t2: str) -> tuple[str, str]:
        return (t1, t2) if t1 <= t2 else (t2, t1)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.type_a, self.type_b)


@dataclass(frozen=True)
class _Row:
    devices: tuple[str, str]
    types: tuple[str, str]


def _relation_rows(matrix: SimilarityMatrix, device_of: dict[str, str], type_of: dict[str, str]) -> list[_Row]:
    rows = []
    for a, b, _, _ in matrix.entries():
        da, db = device_of[a], device_of[b]
        if da == db:
            continue
        rows.append(_Row(tuple(sorted((da, db))), RelationType.canonical(type_of[a], type_of[b])))
    return rows


def find_frequent_relation_types(
    matrix: SimilarityMatrix, device_of: dict[str, str], type_of: dict[str, str], coverage: float = 0.95
) -> list[RelationType]:
    """Separate-and-conquer over the cross-device similar pairs.

    Repeatedly take the relation type linking the most distinct device pairs,
    then drop every row between the device pairs it connects, until at most
    ``(1 - coverage)`` of the rows are left.
    """
    T = _relation_rows(matrix, device_of, type_of)
    min_cover = len(T) * (1.0 - coverage)
    found = []
    while T and len(T) > min_cover:
        pairs = defaultdict(set)
        for r in T:
            pairs[r.types].add(r.devices)
        best = min(pairs, key=lambda t: (-len(pairs[t]), t))
        found.append(RelationType(*best, support=len(pairs[best])))
        covered = pairs[best]
        T = [r for r in T if r.devices not in covered]
    return found


# -- network ---------------------------------------------------------------


@dataclass(frozen=True)
class NetworkParams:
    interval_hours: float = 24.0
    bins_f: int = 5
    t_f: float = 0.99
    t_f_quantile: bool = True
    bins_h: int = 100
    t_h: float = 0.95
    t_h_quantile: bool = True
    coverage: float = 0.95
    straight_line_r: float = 0.98

    @property
    def interval(self) -> timedelta:
        return timedelta(hours=self.interval_hours)


@dataclass
class NetworkResult:
    graph: NetworkGraph
    matrix: SimilarityMatrix
    relations: list[RelationType]
    excluded: list[str]
    device_of: dict[str, str]
    type_of: dict[str, str]


def build_network(
    entities: Sequence[Entity],
    params: NetworkParams = NetworkParams(),
    seed: int = 0,
    known_groups: Iterable[Iterable[str]] = (),
    preprocessed: bool = False,
) -> NetworkResult:
    """Edges between devices whose series are similar and of a frequent relation type.

    ``known_groups`` lists sets of devices whose mutual edges are dropped.
    """
    ids, device_of, type_of, F, H, excluded = [], {}, {}, [], [], []
    for ent in entities:
        for s in ent.sensors:
            try:
                norm = s if preprocessed else preprocess(s)
            except (ConstantSeriesError, ValueError):
                excluded.append(s.id)
                continue
            if is_straight_line(norm, params.straight_line_r):
                excluded.append(s.id)
                continue
            ids.append(s.id)
            device_of[s.id] = ent.id
            type_of[s.id] = s.sensor_type or s.id
            F.append(create_fingerprint(norm, params.interval, params.bins_f))
            H.append(create_histogram(norm, params.bins_h))
    if excluded:
        log.info("excluded %d flat or straight-line series", len(excluded))
    shapes = {f.shape for f in F}
    if len(shapes) > 1:
        raise ValueError(f"series produce fingerprints of different shapes: {sorted(shapes)}")

    exclude = None
    groups = [set(g) for g in known_groups]
    if groups:
        exclude = {
            (a, b)
            for a in range(len(ids))
            for b in range(a + 1, len(ids))
            if any(device_of[ids[a]] in g and device_of[ids[b]] in g for g in groups)
        }
    matrix = build_similarity_matrix(
        ids,
        F,
        H,
        Threshold(params.t_f, params.t_f_quantile),
        Threshold(params.t_h, params.t_h_quantile),
        seed=seed,
        exclude=exclude,
    )
    relations = find_frequent_relation_types(matrix, device_of, type_of, params.coverage)
    frequent = {r.pair for r in relations}
    edges = set()
    for a, b, f, h in matrix.entries():
        if device_of[a] == device_of[b]:
            continue
        if RelationType.canonical(type_of[a], type_of[b]) in frequent:
            edges.add(Edge(device_of[a], device_of[b], a, b, f, h))
    graph = NetworkGraph(tuple(entities), frozenset(edges))
    return NetworkResult(graph, matrix, relations, excluded, device_of, type_of)


def extend_entity(entity: Entity, graph: NetworkGraph) -> Entity:
    """The entity plus every series on a connected device that is similar to one of its own."""
    lookup = {s.id: s for e in graph.entities for s in e.sensors}
    own = set(entity.sensor_ids)
    extra = []
    for e in sorted(graph.edges, key=lambda e: (e.series_a, e.series_b)):
        if e.series_a in own and e.series_b not in own:
            extra.append(e.series_b)
        elif e.series_b in own and e.series_a not in own:
            extra.append(e.series_a)
    added = [lookup[sid] for sid in dict.fromkeys(extra)]
    return Entity(entity.id, tuple(entity.sensors) + tuple(added), entity.entity_type)
