"""Top-k mining of frequent, cohesive sequential patterns that compress the data.

A pattern occurs in a window when it is a gapped subsequence of it. Its
*duration* in a window is the shortest span (last - first + 1) over all
occurrences, and the window counts towards the pattern's relative-duration
support only when ``duration / len(pattern) <= rdur``. Patterns are ranked on
that support; ties go to the shorter pattern, then to the lexicographically
smaller one. Of the top-k, only patterns that save bits under a Huffman code
are returned.
"""

from __future__ import annotations

import bisect
import functools
import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .discretize import DiscreteSequenceDB, from_letters, to_letters

MARKER = "*"


@dataclass(frozen=True)
class MiningConfig:
    k: int = 10000
    min_len: int = 3
    rdur: float = 1.2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if not self.rdur >= 1.0:
            raise ValueError("rdur must be >= 1.0")


@dataclass(frozen=True)
class SequentialPattern:
    symbols: tuple[int, ...]
    support: int
    rsupport: float
    bits_saved: float
    plain_support: int = 0

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def letters(self) -> str:
        return to_letters(self.symbols)

    def to_json(self) -> str:
        return json.dumps(
            {
                "symbols": self.letters,
                "support": self.support,
                "rsupport": self.rsupport,
                "bits_saved": self.bits_saved,
                "plain_support": self.plain_support,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "SequentialPattern":
        d = json.loads(line)
        return cls(
            symbols=tuple(from_letters(d["symbols"])),
            support=int(d["support"]),
            rsupport=float(d["rsupport"]),
            bits_saved=float(d["bits_saved"]),
            plain_support=int(d.get("plain_support", 0)),
        )


def save_patterns(patterns: Iterable[SequentialPattern], path) -> None:
    with open(path, "w") as fh:
        for p in patterns:
            fh.write(p.to_json() + "\n")


def load_patterns(path) -> list[SequentialPattern]:
    with open(path) as fh:
        return [SequentialPattern.from_json(line) for line in fh if line.strip()]


# -- occurrence primitives -------------------------------------------------


def occurs(pattern: Sequence, sequence: Sequence) -> bool:
    it = iter(sequence)
    return all(any(x == y for y in it) for x in pattern)


def min_duration(pattern: Sequence, sequence: Sequence) -> int | None:
    """Shortest span of any occurrence of ``pattern`` in ``sequence``, or None."""
    if not pattern:
        return 0
    best = None
    n = len(sequence)
    first = pattern[0]
    for start in range(n):
        if sequence[start] != first:
            continue
        pos = start
        for item in pattern[1:]:
            pos += 1
            while pos < n and sequence[pos] != item:
                pos += 1
            if pos == n:
                return best
        span = pos - start + 1
        if best is None or span < best:
            best = span
    return best


def is_cohesive(span: int, length: int, rdur: float) -> bool:
    return span / length <= rdur


@functools.lru_cache(maxsize=4096)
def max_span(length: int, rdur: float, cap: int) -> int:
    """Largest span a cohesive occurrence of a ``length``-pattern may have."""
    if math.isinf(rdur):
        return cap
    s = min(cap, math.floor(length * rdur))
    while s + 1 <= cap and is_cohesive(s + 1, length, rdur):
        s += 1
    while s > length and not is_cohesive(s, length, rdur):
        s -= 1
    return max(s, length)


def gap_budget(max_len: int, rdur: float, cap: int) -> int:
    """Most gaps any cohesive occurrence of a pattern of length <= max_len can hold."""
    return max(max_span(m, rdur, cap) - m for m in range(1, max_len + 1))


def cover(pattern: Sequence, db: DiscreteSequenceDB) -> set[int]:
    return {i for i, seq in enumerate(db.sequences.tolist()) if occurs(pattern, seq)}


def cover_rdur(pattern: Sequence, db: DiscreteSequenceDB, rdur: float) -> set[int]:
    out = set()
    for i, seq in enumerate(db.sequences.tolist()):
        d = min_duration(pattern, seq)
        if d is not None and (not pattern or is_cohesive(d, len(pattern), rdur)):
            out.add(i)
    return out


# -- description length ----------------------------------------------------


def huffman_cost(counts: Iterable[int]) -> int:
    """Bits needed to Huffman-code a corpus with these symbol counts.

    The total equals the sum of all merged node weights. A lone symbol still
    costs one bit per occurrence.
    """
    heap = [int(c) for c in counts if c > 0]
    if not heap:
        return 0
    if len(heap) == 1:
        return heap[0]
    heapq.heapify(heap)
    total = 0
    while len(heap) > 1:
        merged = heapq.heappop(heap) + heapq.heappop(heap)
        total += merged
        heapq.heappush(heap, merged)
    return total


def description_length(symbols: Iterable) -> int:
    return huffman_cost(Counter(symbols).values())


def residual(pattern: Sequence, sequence: Sequence) -> list:
    """``sequence`` with its shortest (then earliest) occurrence of ``pattern``
    replaced by one marker; gap symbols inside the occurrence are kept."""
    seq = list(sequence)
    best = None
    for start in range(len(seq)):
        if seq[start] != pattern[0]:
            continue
        matched = [start]
        pos = start
        for item in pattern[1:]:
            pos += 1
            while pos < len(seq) and seq[pos] != item:
                pos += 1
            if pos == len(seq):
                break
            matched.append(pos)
        if len(matched) < len(pattern):
            break
        span = matched[-1] - start + 1
        if best is None or span < best[0]:
            best = (span, matched)
    if best is None:
        raise ValueError("pattern does not occur in sequence")
    matched = set(best[1])
    first = best[1][0]
    out = []
    for i, s in enumerate(seq):
        if i == first:
            out.append(MARKER)
        elif i not in matched:
            out.append(s)
    return out


def _symbol_counts(db: DiscreteSequenceDB) -> np.ndarray:
    n, A = len(db), db.alphabet_size
    flat = db.sequences + (np.arange(n) * A)[:, None]
    return np.bincount(flat.ravel(), minlength=n * A).reshape(n, A)


def _bits_saved_from_counts(pattern: Sequence[int], covered_counts: np.ndarray, n_covered: int, alphabet_size: int) -> float:
    before = huffman_cost(covered_counts)
    after_counts = covered_counts.copy()
    for s in pattern:
        after_counts[s] -= n_covered
    after = huffman_cost(list(after_counts) + [n_covered])
    return before - (len(pattern) * math.log2(alphabet_size) + after)


def bits_saved(pattern: Sequence[int], db: DiscreteSequenceDB, rows: Iterable[int] | None = None) -> float:
    """Bits saved on the covered windows by coding ``pattern`` as one marker.

    ``rows`` defaults to the plain (gapped subsequence) cover.
    """
    rows = sorted(cover(pattern, db) if rows is None else rows)
    if not rows:
        raise ValueError("bits_saved is undefined for a pattern with an empty cover")
    counts = _symbol_counts(db)[rows].sum(axis=0)
    return _bits_saved_from_counts(pattern, counts, len(rows), db.alphabet_size)


# -- prefix projection -----------------------------------------------------


def _run_starts(rows: np.ndarray) -> np.ndarray:
    """Mask of the first entry of each run in a sorted row array."""
    first = np.empty(rows.size, dtype=bool)
    if rows.size:
        first[0] = True
        np.not_equal(rows[1:], rows[:-1], out=first[1:])
    return first


def _count_rows(rows: np.ndarray) -> int:
    return int(np.count_nonzero(_run_starts(rows)))


@dataclass(frozen=True, eq=False)
class PrefixProjection:
    """Pseudo-projection of a database on a prefix.

    One entry per (window, start position): ``ends`` holds the earliest
    position at which the prefix can be completed from that start. Entries
    are sorted by window.
    """

    prefix: tuple[int, ...]
    rows: np.ndarray
    starts: np.ndarray
    ends: np.ndarray

    @classmethod
    def singleton(cls, db: DiscreteSequenceDB, symbol: int) -> "PrefixProjection":
        rows, pos = np.nonzero(db.sequences == symbol)
        return cls((symbol,), rows, pos, pos)

    @functools.cached_property
    def _first(self) -> np.ndarray:
        return _run_starts(self.rows)

    def support(self) -> int:
        return int(np.count_nonzero(self._first))

    def cohesive_rows(self, rdur: float, no_symbols: int) -> np.ndarray:
        limit = max_span(len(self.prefix), rdur, no_symbols)
        r = self.rows[self.ends - self.starts + 1 <= limit]
        return r[_run_starts(r)]

    def cohesive_support(self, rdur: float, no_symbols: int) -> int:
        limit = max_span(len(self.prefix), rdur, no_symbols)
        return _count_rows(self.rows[self.ends - self.starts + 1 <= limit])

    def extend(self, db: DiscreteSequenceDB, symbol: int, max_gaps: int) -> "PrefixProjection":
        L = db.no_symbols
        nxt = db.next_positions()[self.rows, self.ends + 1, symbol]
        keep = (nxt < L) & (nxt - self.starts - len(self.prefix) <= max_gaps)
        return PrefixProjection(self.prefix + (symbol,), self.rows[keep], self.starts[keep], nxt[keep])

    def child_bounds(self, db: DiscreteSequenceDB, max_gaps: int) -> np.ndarray:
        """Support of every one-symbol extension, for all symbols at once."""
        if self.rows.size == 0:
            return np.zeros(db.alphabet_size, dtype=int)
        L = db.no_symbols
        table = db.next_positions()
        nxt = table[self.rows, self.ends + 1]
        # One comparison covers both "present" (< L) and the gap budget.
        limit = np.minimum(self.starts + len(self.prefix) + max_gaps + 1, L).astype(table.dtype)
        ok = nxt < limit[:, None]
        return np.logical_or.reduceat(ok, np.flatnonzero(self._first), axis=0).sum(axis=0)


def plain_cover_rows(pattern: Sequence[int], db: DiscreteSequenceDB) -> np.ndarray:
    rows = np.arange(len(db))
    pos = np.full(len(db), -1)
    nxt = db.next_positions()
    L = db.no_symbols
    for s in pattern:
        pos = nxt[rows, pos + 1, s]
        keep = pos < L
        rows, pos = rows[keep], pos[keep]
    return rows


# -- top-k search ----------------------------------------------------------


def rank_key(symbols: Sequence[int], support: int) -> tuple:
    return (-support, len(symbols), tuple(symbols))


class _TopK:
    def __init__(self, k: int, trace: list | None):
        self.k = k
        self.keys: list[tuple] = []
        self.trace = trace

    @property
    def full(self) -> bool:
        return len(self.keys) >= self.k

    @property
    def min_support(self) -> int:
        return -self.keys[-1][0] if self.full else 0

    def offer(self, symbols: tuple[int, ...], support: int) -> None:
        key = rank_key(symbols, support)
        if self.full:
            if key >= self.keys[-1]:
                return
            bisect.insort(self.keys, key)
            self.keys.pop()
        else:
            bisect.insort(self.keys, key)
        if self.trace is not None and self.full:
            self.trace.append(self.min_support)


@dataclass
class MiningStats:
    nodes: int = 0
    threshold_trace: list[int] = field(default_factory=list)


def mine_interesting_patterns(
    db: DiscreteSequenceDB, config: MiningConfig = MiningConfig(), stats: MiningStats | None = None
) -> list[SequentialPattern]:
    """Depth-first top-k search with prefix projections.

    Returns the top-k patterns (by relative-duration support) of length at
    least ``min_len`` that also have ``bits_saved > 0``, best first.
    """
    if len(db) == 0:
        raise ValueError("empty sequence database")
    L = db.no_symbols
    if config.min_len > L:
        return []
    stats = stats if stats is not None else MiningStats()
    heap = _TopK(config.k, stats.threshold_trace)
    max_gaps = gap_budget(L, config.rdur, L)

    def grow(proj: PrefixProjection) -> None:
        stats.nodes += 1
        bound = proj.support()
        if bound == 0 or (heap.full and bound < heap.min_support):
            return
        p = len(proj.prefix)
        if p >= config.min_len:
            sup = proj.cohesive_support(config.rdur, L)
            if sup:
                heap.offer(proj.prefix, sup)
        if p == L:
            return
        bounds = proj.child_bounds(db, max_gaps)
        # Most promising children first: the heap threshold rises sooner.
        # Pruning is exact, so the order does not change the result.
        for symbol in np.argsort(-bounds, kind="stable").tolist():
            if bounds[symbol] == 0 or (heap.full and bounds[symbol] < heap.min_support):
                break
            grow(proj.extend(db, symbol, max_gaps))

    singles = [PrefixProjection.singleton(db, symbol) for symbol in range(db.alphabet_size)]
    for proj in sorted(singles, key=lambda q: -q.support()):
        grow(proj)

    counts = _symbol_counts(db)
    out = []
    for neg_sup, _, symbols in heap.keys:
        rows = plain_cover_rows(symbols, db)
        saved = _bits_saved_from_counts(symbols, counts[rows].sum(axis=0), rows.size, db.alphabet_size)
        if saved > 0:
            out.append(
                SequentialPattern(
                    symbols=symbols,
                    support=-neg_sup,
                    rsupport=-neg_sup / len(db),
                    bits_saved=saved,
                    plain_support=int(rows.size),
                )
            )
    return out
