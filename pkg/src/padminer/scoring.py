"""Window anomaly scores from pattern embeddings: FPOF and an isolation forest."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy import sparse

from .embedding import PatternEmbedding
from .mining import SequentialPattern

EULER_GAMMA = 0.5772156649015329
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class AnomalyScoreSeries:
    window_starts: np.ndarray
    scores: np.ndarray
    source: Literal["fpof", "iforest", "max"]
    sensor_id: str | None = None

    def __post_init__(self):
        if len(self.window_starts) != len(self.scores):
            raise ValueError("one score per window required")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("window_start,score\n")
            for s, v in zip(self.window_starts, self.scores):
                fh.write(f"{int(s)},{float(v)!r}\n")


def fpof(patterns: Sequence[SequentialPattern], embedding: PatternEmbedding) -> np.ndarray:
    if len(patterns) == 0:
        raise ValueError("FPOF is undefined without patterns")
    total = np.bincount(embedding.rows, weights=embedding.values, minlength=embedding.shape[0])
    return total / len(patterns)


def fpof_scores(
    patterns: Sequence[SequentialPattern], embedding: PatternEmbedding, sensor_id: str | None = None
) -> AnomalyScoreSeries:
    """``1 - fpof`` per window: 1 when no pattern occurs."""
    score = np.clip(1.0 - fpof(patterns, embedding), 0.0, 1.0)
    return AnomalyScoreSeries(embedding.window_starts, score, "fpof", sensor_id)


def per_sensor_scores(
    per_sensor: Mapping[str, tuple[Sequence[SequentialPattern], PatternEmbedding]],
) -> tuple[list[str], np.ndarray]:
    """Matrix of FPOF scores, one row per sensor.

    Sensors without patterns get a row of NaN ("unscored").
    """
    ids = list(per_sensor)
    if not ids:
        raise ValueError("no sensors")
    n = per_sensor[ids[0]][1].shape[0]
    A = np.full((len(ids), n), np.nan)
    for i, sid in enumerate(ids):
        patterns, emb = per_sensor[sid]
        if emb.shape[0] != n:
            raise ValueError(f"sensor {sid} is not aligned on the same windows")
        if len(patterns):
            A[i] = fpof_scores(patterns, emb).scores
    return ids, A


def aggregate_max(matrix: np.ndarray) -> np.ndarray:
    """Entity score per window: max over scored sensors."""
    scored = ~np.isnan(matrix).all(axis=1)
    if not scored.any():
        raise ValueError("no sensor could be scored")
    return matrix[scored].max(axis=0)


# -- isolation forest ------------------------------------------------------


def average_path_length(n) -> np.ndarray | float:
    """c(n): mean unsuccessful-search path length in a BST of n points."""
    arr = np.asarray(n, dtype=float)
    out = np.zeros_like(arr)
    out[arr == 2] = 1.0
    big = arr > 2
    m = arr[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return float(out) if out.ndim == 0 else out


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "size")}

    @classmethod
    def from_dict(cls, d) -> "_Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=float),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            size=np.array(d["size"], dtype=np.int64),
        )


def _grow_tree(X: np.ndarray, rng: np.random.Generator, height_limit: int) -> _Tree:
    feature, threshold, left, right, size = [], [], [], [], []

    # A column constant at a node stays constant below it, so each child only
    # looks at the columns that varied in its parent.  The candidate list keeps
    # its order, so the random draws match a search over all columns.
    def node(idx: np.ndarray, cols: np.ndarray, depth: int) -> int:
        me = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(idx.size)
        if depth >= height_limit or idx.size <= 1:
            return me
        sub = X[np.ix_(idx, cols)]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        varying = np.flatnonzero(hi > lo)
        if varying.size == 0:
            return me
        c = int(varying[rng.integers(varying.size)])
        t = float(rng.uniform(lo[c], hi[c]))
        go_left = sub[:, c] < t
        feature[me] = int(cols[c])
        threshold[me] = t
        l = node(idx[go_left], cols[varying], depth + 1)
        r = node(idx[~go_left], cols[varying], depth + 1)
        left[me], right[me] = l, r
        return me

    node(np.arange(X.shape[0]), np.arange(X.shape[1]), 0)
    return _Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(size, dtype=np.int64),
    )


def _grow_tree_sparse(S: sparse.csr_matrix, rng: np.random.Generator, height_limit: int) -> _Tree:
    """Same tree as ``_grow_tree(S.toarray(), ...)``, visiting only stored entries.

    A column with no stored entry among a node's rows is constant zero there,
    so only stored columns can be split on; they come out in the same sorted
    order, which keeps the random draws aligned with the dense version.
    """
    S = sparse.csc_matrix(S)
    S.sum_duplicates()
    S.sort_indices()
    # Entries ordered by column; boolean filtering keeps that order, so every
    # node sees each column as one contiguous run.
    cols = np.repeat(np.arange(S.shape[1]), np.diff(S.indptr))
    rows, vals = S.indices, S.data
    n_rows = S.shape[0]
    feature, threshold, left, right, size = [], [], [], [], []

    def node(idx: np.ndarray, entries: np.ndarray, depth: int) -> int:
        me = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(idx.size)
        if depth >= height_limit or idx.size <= 1 or entries.size == 0:
            return me
        c, v = cols[entries], vals[entries]
        starts = np.flatnonzero(np.concatenate(([True], c[1:] != c[:-1])))
        count = np.diff(np.append(starts, c.size))
        hi = np.maximum.reduceat(v, starts)
        lo = np.minimum.reduceat(v, starts)
        sparse_col = count < idx.size
        hi[sparse_col] = np.maximum(hi[sparse_col], 0.0)
        lo[sparse_col] = np.minimum(lo[sparse_col], 0.0)
        varying = np.flatnonzero(hi > lo)
        if varying.size == 0:
            return me
        k = int(varying[rng.integers(varying.size)])
        t = float(rng.uniform(lo[k], hi[k]))
        run = entries[starts[k] : starts[k] + count[k]]
        column = np.zeros(n_rows)
        column[rows[run]] = vals[run]
        goes_left = np.zeros(n_rows, dtype=bool)
        goes_left[idx] = column[idx] < t
        feature[me] = int(c[starts[k]])
        threshold[me] = t
        to_left = goes_left[rows[entries]]
        l = node(idx[goes_left[idx]], entries[to_left], depth + 1)
        r = node(idx[~goes_left[idx]], entries[~to_left], depth + 1)
        left[me], right[me] = l, r
        return me

    node(np.arange(n_rows), np.arange(rows.size), 0)
    return _Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(size, dtype=np.int64),
    )


def _path_lengths(tree: _Tree, X: np.ndarray) -> np.ndarray:
    at = np.zeros(X.shape[0], dtype=np.int64)
    depth = np.zeros(X.shape[0])
    rows = np.arange(X.shape[0])
    active = tree.feature[at] >= 0
    while active.any():
        a = rows[active]
        f = tree.feature[at[a]]
        go_left = X[a, f] < tree.threshold[at[a]]
        at[a] = np.where(go_left, tree.left[at[a]], tree.right[at[a]])
        depth[a] += 1
        active = tree.feature[at] >= 0
    return depth + average_path_length(tree.size[at])


@dataclass
class IsolationForestModel:
    n_features: int
    subsample: int
    seed: int
    trees: list[_Tree] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": MODEL_VERSION,
                "n_features": self.n_features,
                "subsample": self.subsample,
                "seed": self.seed,
                "trees": [t.to_dict() for t in self.trees],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "IsolationForestModel":
        d = json.loads(text)
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls(d["n_features"], d["subsample"], d["seed"], [_Tree.from_dict(t) for t in d["trees"]])

    def expected_depth(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        # Only the columns some tree splits on are needed, so a wide sparse
        # embedding is never densified in full.
        used = np.unique(np.concatenate([t.feature[t.feature >= 0] for t in self.trees] or [np.zeros(0, np.int64)]))
        Xu = _dense(X[:, used]) if used.size else np.zeros((X.shape[0], 1))
        depths = [_path_lengths(_remap(t, used), Xu) for t in self.trees]
        return np.mean(depths, axis=0)

    def score(self, X) -> np.ndarray:
        """``2 ** (-E[h(x)] / c(subsample))``, in (0, 1]; higher is more anomalous."""
        return 2.0 ** (-self.expected_depth(X) / average_path_length(self.subsample))


def _remap(tree: _Tree, used: np.ndarray) -> _Tree:
    feature = np.where(tree.feature >= 0, np.searchsorted(used, tree.feature), -1)
    return _Tree(feature, tree.threshold, tree.left, tree.right, tree.size)


def _as_matrix(rows):
    """Dense array, or CSR for an embedding."""
    if isinstance(rows, PatternEmbedding):
        return sparse.csr_matrix((rows.values, (rows.rows, rows.cols)), shape=rows.shape)
    if sparse.issparse(rows):
        return sparse.csr_matrix(rows)
    return np.asarray(rows, dtype=float)


def _dense(X) -> np.ndarray:
    return X.toarray() if sparse.issparse(X) else X


def iforest_fit(rows, trees: int = 500, seed: int = 0, subsample: int = 256) -> IsolationForestModel:
    X = _as_matrix(rows)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit an isolation forest")
    psi = min(subsample, X.shape[0])
    height_limit = math.ceil(math.log2(psi))
    model = IsolationForestModel(X.shape[1], psi, seed)
    for child in np.random.SeedSequence(seed).spawn(trees):
        rng = np.random.default_rng(child)
        idx = rng.choice(X.shape[0], size=psi, replace=False)
        grow = _grow_tree_sparse if sparse.issparse(X) else _grow_tree
        model.trees.append(grow(X[idx], rng, height_limit))
    return model


def iforest_scores(model: IsolationForestModel, rows, window_starts=None) -> AnomalyScoreSeries:
    if isinstance(rows, PatternEmbedding):
        window_starts = rows.window_starts if window_starts is None else window_starts
    X = _as_matrix(rows)
    scores = model.score(X)
    if window_starts is None:
        window_starts = np.arange(X.shape[0])
    return AnomalyScoreSeries(np.asarray(window_starts), scores, "iforest")
