"""Pairwise-similarity throughput and mining/embedding timings.

    python scripts/bench_throughput.py [--series 10000] [--windows 10000]
"""

import argparse
import json
import time

import numpy as np

from padminer.discretize import DiscreteSequenceDB
from padminer.embedding import create_embedding, naive_embedding
from padminer.mining import MiningConfig, mine_interesting_patterns
from padminer.network import build_similarity_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--series", type=int, default=10_000)
    ap.add_argument("--windows", type=int, default=10_000)
    ap.add_argument("--patterns", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    report = {}

    # 14 daily columns x 5 bins, as for two weeks of data at default settings.
    F = np.log1p(rng.integers(0, 60, (args.series, 14 * 5)).astype(float))
    H = rng.dirichlet(np.ones(100), args.series)
    t0 = time.perf_counter()
    m = build_similarity_matrix([str(i) for i in range(args.series)], F, H, 20.0, 0.5)
    dt = time.perf_counter() - t0
    report["pairs"] = m.pairs_compared
    report["pairs_per_second"] = m.pairs_compared / dt

    db = DiscreteSequenceDB.from_lists(rng.integers(0, 5, (args.windows, 10)).tolist(), 5)
    t0 = time.perf_counter()
    patterns = mine_interesting_patterns(db, MiningConfig(k=args.patterns + 200, min_len=2))[: args.patterns]
    report["mine_seconds"] = time.perf_counter() - t0
    report["patterns"] = len(patterns)
    t0 = time.perf_counter()
    create_embedding(patterns, db, 1.2)
    fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    naive_embedding(patterns, db, 1.2)
    slow = time.perf_counter() - t0
    report.update(embed_seconds=fast, naive_embed_seconds=slow, speedup=slow / fast)
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
