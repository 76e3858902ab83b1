"""SAX discretisation: PAA averaging followed by global, local or k-means binning."""

from __future__ import annotations

import logging
import string
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .series import TimeSeries, WindowSpec, sliding_windows

log = logging.getLogger(__name__)

Binning = Literal["global", "local", "kmeans"]
LETTERS = string.ascii_lowercase + string.ascii_uppercase


@dataclass(frozen=True)
class SaxConfig:
    paa_win: int
    no_bins: int = 5
    binning: Binning = "global"
    seed: int = 0

    def __post_init__(self):
        if self.paa_win < 1:
            raise ValueError("paa_win must be >= 1")
        if self.no_bins < 2:
            raise ValueError("no_bins must be >= 2")
        if self.binning not in ("global", "local", "kmeans"):
            raise ValueError(f"unknown binning {self.binning!r}")

    @classmethod
    def for_window(cls, window_length: int, no_symbols: int = 10, **kw) -> "SaxConfig":
        if window_length % no_symbols:
            raise ValueError(f"window length {window_length} is not divisible by no_symbols {no_symbols}")
        return cls(paa_win=window_length // no_symbols, **kw)

    def no_symbols(self, window_length: int) -> int:
        if window_length % self.paa_win:
            raise ValueError(f"window length {window_length} is not divisible by paa_win {self.paa_win}")
        n = window_length // self.paa_win
        if n < 2:
            raise ValueError("a window must produce at least 2 symbols")
        return n


@dataclass(frozen=True)
class BinTable:
    kind: Binning
    boundaries: tuple[float, ...] = ()
    centroids: tuple[float, ...] = ()

    @property
    def no_bins(self) -> int:
        if self.kind == "kmeans":
            return len(self.centroids)
        return len(self.boundaries) + 1


def _equal_width_boundaries(lo: float, hi: float, no_bins: int) -> np.ndarray:
    return lo + (hi - lo) * np.arange(1, no_bins) / no_bins


def fit_bins(series: TimeSeries | np.ndarray, config: SaxConfig) -> BinTable:
    values = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    if config.binning == "local":
        return BinTable("local")
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        raise ValueError("cannot fit bins on a constant series")
    if config.binning == "kmeans":
        centroids = _kmeans_1d(values, config.no_bins, config.seed)
        if centroids is not None:
            return BinTable("kmeans", centroids=tuple(centroids))
        log.warning("k-means binning did not converge; falling back to global bins")
    return BinTable("global", boundaries=tuple(_equal_width_boundaries(lo, hi, config.no_bins)))


def _kmeans_1d(values: np.ndarray, k: int, seed: int, max_iter: int = 100):
    from sklearn.cluster import KMeans
    from sklearn.exceptions import ConvergenceWarning

    if np.unique(values).size < k:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=max_iter, random_state=seed)
            km.fit(values.reshape(-1, 1))
        except ConvergenceWarning:
            return None
    if km.n_iter_ >= max_iter:
        return None
    return np.sort(km.cluster_centers_.ravel())


def paa(windows: np.ndarray, paa_win: int) -> np.ndarray:
    """Block means over the last axis."""
    windows = np.asarray(windows, dtype=float)
    n = windows.shape[-1]
    if n % paa_win:
        raise ValueError(f"window length {n} is not divisible by paa_win {paa_win}")
    return windows.reshape(*windows.shape[:-1], n // paa_win, paa_win).mean(axis=-1)


def _lookup(means: np.ndarray, boundaries) -> np.ndarray:
    # Values on a boundary go to the upper bin.
    return np.searchsorted(np.asarray(boundaries), means, side="right")


def _symbols(windows: np.ndarray, config: SaxConfig, bins: BinTable) -> np.ndarray:
    means = paa(windows, config.paa_win)
    if bins.kind == "global":
        return _lookup(means, bins.boundaries)
    if bins.kind == "kmeans":
        c = np.asarray(bins.centroids)
        return np.abs(means[..., None] - c).argmin(axis=-1)
    lo = windows.min(axis=-1, keepdims=True)
    hi = windows.max(axis=-1, keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    rel = (means - lo) / span
    sym = np.minimum((rel * config.no_bins + 1e-12).astype(int), config.no_bins - 1)
    flat = (hi <= lo).reshape(-1)
    if flat.any():
        sym = sym.reshape(-1, sym.shape[-1])
        sym[flat] = config.no_bins // 2
        sym = sym.reshape(means.shape)
    return sym


def sax_window(window, config: SaxConfig, bins: BinTable) -> list[int]:
    w = np.asarray(window, dtype=float)[None, :]
    return [int(s) for s in _symbols(w, config, bins)[0]]


@dataclass(frozen=True, eq=False)
class DiscreteSequenceDB:
    """One SAX word per sliding window, stored as an int matrix (windows x symbols)."""

    alphabet_size: int
    sequences: np.ndarray
    window_starts: np.ndarray
    source_series_id: str = ""
    window_length: int = 0
    _next: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        seqs = np.ascontiguousarray(np.asarray(self.sequences, dtype=np.int64))
        if seqs.ndim != 2:
            raise ValueError("sequences must be a 2-D array")
        if seqs.size and (seqs.min() < 0 or seqs.max() >= self.alphabet_size):
            raise ValueError("symbol outside the alphabet")
        starts = np.asarray(self.window_starts, dtype=np.int64)
        if len(starts) != len(seqs):
            raise ValueError("one window start per sequence required")
        seqs.setflags(write=False)
        starts.setflags(write=False)
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "window_starts", starts)

    @classmethod
    def from_lists(cls, seqs, alphabet_size: int | None = None, **kw) -> "DiscreteSequenceDB":
        seqs = [list(s) for s in seqs]
        if len({len(s) for s in seqs}) > 1:
            raise ValueError("all sequences must have the same length")
        if alphabet_size is None:
            alphabet_size = max((max(s) for s in seqs if s), default=0) + 1
        arr = np.array(seqs, dtype=np.int64).reshape(len(seqs), -1)
        kw.setdefault("window_starts", np.arange(len(seqs)))
        return cls(alphabet_size, arr, **kw)

    def __len__(self) -> int:
        return self.sequences.shape[0]

    @property
    def no_symbols(self) -> int:
        return self.sequences.shape[1]

    def next_positions(self) -> np.ndarray:
        """``nxt[w, p, a]``: first index >= p where sequence w holds a, else no_symbols."""
        if self._next is None:
            n, L = self.sequences.shape
            nxt = np.full((n, L + 1, self.alphabet_size), L, dtype=np.int64)
            rows = np.arange(n)
            for p in range(L - 1, -1, -1):
                nxt[:, p] = nxt[:, p + 1]
                nxt[rows, p, self.sequences[:, p]] = p
            nxt.setflags(write=False)
            object.__setattr__(self, "_next", nxt)
        return self._next

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("window_start,symbols\n")
            for start, seq in zip(self.window_starts, self.sequences):
                fh.write(f"{int(start)},{to_letters(seq)}\n")


def to_letters(symbols) -> str:
    return "".join(LETTERS[int(s)] for s in symbols)


def from_letters(text: str) -> list[int]:
    return [LETTERS.index(c) for c in text]


def build_sequence_db(
    series: TimeSeries, window_spec: WindowSpec, config: SaxConfig, bins: BinTable | None = None
) -> DiscreteSequenceDB:
    config.no_symbols(window_spec.length)
    sliding_windows(len(series), window_spec)
    if bins is None:
        bins = fit_bins(series, config)
    starts = window_spec.starts(len(series))
    windows = sliding_window_view(series.values, window_spec.length)[starts]
    symbols = _symbols(windows, config, bins)
    return DiscreteSequenceDB(
        alphabet_size=bins.no_bins if bins.kind != "local" else config.no_bins,
        sequences=symbols,
        window_starts=starts,
        source_series_id=series.id,
        window_length=window_spec.length,
    )
