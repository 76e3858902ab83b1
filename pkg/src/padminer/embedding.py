"""Sparse pattern-occurrence embedding of a sequence database."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretize import DiscreteSequenceDB
from .mining import PrefixProjection, SequentialPattern, gap_budget, is_cohesive, min_duration


@dataclass(frozen=True, eq=False)
class PatternEmbedding:
    """windows x patterns; an entry is the pattern's rsupport where it occurs.

    Stored as COO triplets (row, column, value), row-major.
    """

    pattern_ids: tuple[str, ...]
    window_starts: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.window_starts), len(self.pattern_ids)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.values
        return out

    def row(self, i: int) -> dict[str, float]:
        m = self.rows == i
        return {self.pattern_ids[c]: float(v) for c, v in zip(self.cols[m], self.values[m])}

    def equals(self, other: "PatternEmbedding") -> bool:
        return (
            self.pattern_ids == other.pattern_ids
            and np.array_equal(self.window_starts, other.window_starts)
            and np.array_equal(self.dense(), other.dense())
        )

    def to_csv(self, path, manifest_path=None, patterns: Sequence[SequentialPattern] | None = None) -> None:
        with open(path, "w") as fh:
            fh.write("window_start,pattern_id,value\n")
            for r, c, v in zip(self.rows, self.cols, self.values):
                fh.write(f"{int(self.window_starts[r])},{self.pattern_ids[c]},{float(v)!r}\n")
        if manifest_path is not None:
            manifest = {"pattern_ids": list(self.pattern_ids), "window_starts": self.window_starts.tolist()}
            if patterns is not None:
                manifest["patterns"] = [json.loads(p.to_json()) for p in patterns]
            with open(manifest_path, "w") as fh:
                json.dump(manifest, fh)


def _from_dense_triplets(pattern_ids, window_starts, rows, cols, values) -> PatternEmbedding:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    order = np.lexsort((cols, rows))
    return PatternEmbedding(tuple(pattern_ids), np.asarray(window_starts), rows[order], cols[order], values[order])


def default_ids(patterns: Sequence[SequentialPattern]) -> list[str]:
    return [p.letters for p in patterns]


def _check_geometry(patterns: Sequence[SequentialPattern], db: DiscreteSequenceDB) -> None:
    for p in patterns:
        if len(p.symbols) > db.no_symbols:
            raise ValueError(f"pattern {p.letters} is longer than the windows ({db.no_symbols} symbols)")
        if any(s < 0 or s >= db.alphabet_size for s in p.symbols):
            raise ValueError(f"pattern {p.letters} uses symbols outside the alphabet")


class _Trie:
    __slots__ = ("children", "terminal", "depth_below")

    def __init__(self):
        self.children: dict[int, _Trie] = {}
        self.terminal: list[int] = []
        self.depth_below = 0


def create_embedding(
    patterns: Sequence[SequentialPattern],
    db: DiscreteSequenceDB,
    rdur: float,
    pattern_ids: Sequence[str] | None = None,
) -> PatternEmbedding:
    """Occurrence search over a trie of the patterns.

    Each prefix is projected once and shared by all patterns below it; a
    window drops out as soon as it fails to match a prefix within the gap
    budget of the longest pattern underneath.
    """
    _check_geometry(patterns, db)
    ids = list(pattern_ids) if pattern_ids is not None else default_ids(patterns)
    root = _Trie()
    for col, p in enumerate(patterns):
        node = root
        node.depth_below = max(node.depth_below, len(p.symbols))
        for s in p.symbols:
            node = node.children.setdefault(s, _Trie())
            node.depth_below = max(node.depth_below, len(p.symbols))
        node.terminal.append(col)

    L = db.no_symbols
    rows_out, cols_out, vals_out = [], [], []

    def visit(node: _Trie, proj: PrefixProjection) -> None:
        if proj.rows.size == 0:
            return
        if node.terminal:
            hit = proj.cohesive_rows(rdur, L)
            for col in node.terminal:
                rows_out.append(hit)
                cols_out.append(np.full(hit.size, col))
                vals_out.append(np.full(hit.size, patterns[col].rsupport))
        for symbol in sorted(node.children):
            child = node.children[symbol]
            gaps = gap_budget(child.depth_below, rdur, L)
            visit(child, proj.extend(db, symbol, gaps))

    if root.terminal:
        for col in root.terminal:
            rows_out.append(np.arange(len(db)))
            cols_out.append(np.full(len(db), col))
            vals_out.append(np.full(len(db), patterns[col].rsupport))
    for symbol in sorted(root.children):
        visit(root.children[symbol], PrefixProjection.singleton(db, symbol))

    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt)  # noqa: E731
    return _from_dense_triplets(
        ids, db.window_starts, cat(rows_out, np.int64), cat(cols_out, np.int64), cat(vals_out, float)
    )


def naive_embedding(
    patterns: Sequence[SequentialPattern],
    db: DiscreteSequenceDB,
    rdur: float,
    pattern_ids: Sequence[str] | None = None,
) -> PatternEmbedding:
    _check_geometry(patterns, db)
    ids = list(pattern_ids) if pattern_ids is not None else default_ids(patterns)
    rows, cols, vals = [], [], []
    seqs = db.sequences.tolist()
    for w, seq in enumerate(seqs):
        for c, p in enumerate(patterns):
            d = min_duration(p.symbols, seq)
            if d is not None and (not p.symbols or is_cohesive(d, len(p.symbols), rdur)):
                rows.append(w)
                cols.append(c)
                vals.append(p.rsupport)
    return _from_dense_triplets(ids, db.window_starts, rows, cols, vals)


def concatenate_embeddings(per_sensor: Sequence[PatternEmbedding], sensor_ids: Sequence[str] | None = None) -> PatternEmbedding:
    if not per_sensor:
        raise ValueError("nothing to concatenate")
    if sensor_ids is None:
        sensor_ids = [str(i) for i in range(len(per_sensor))]
    base = per_sensor[0].window_starts
    ids, rows, cols, vals = [], [], [], []
    offset = 0
    for sid, emb in zip(sensor_ids, per_sensor):
        if not np.array_equal(emb.window_starts, base):
            raise ValueError(f"embedding for sensor {sid} is not aligned on the same windows")
        ids.extend(f"{sid}:{pid}" for pid in emb.pattern_ids)
        rows.append(emb.rows)
        cols.append(emb.cols + offset)
        vals.append(emb.values)
        offset += len(emb.pattern_ids)
    return _from_dense_triplets(ids, base, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
