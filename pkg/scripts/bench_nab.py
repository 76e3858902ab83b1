"""Grid search of BAD-iforest on NAB nyc_taxi.

    python scripts/bench_nab.py --nab-dir ~/NAB          # the real benchmark
    python scripts/bench_nab.py --synthetic              # offline timing proxy

The synthetic mode only measures the runtime of the harness on a series of the
same size; its F1 says nothing about the real data.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from padminer.config import PipelineConfig
from padminer.io import ingest
from padminer.pipeline import grid_search
from padminer.series import Entity
from padminer.synthetic import taxi_like

GRID = {"no_symbols": [5, 8, 10, 16, 20], "no_bins": [5, 8, 10, 15, 20]}


def load(args):
    if args.synthetic:
        ts, labels = taxi_like(seed=args.seed)
        return [Entity(ts.entity_id, (ts,))], ts.entity_id, labels
    base = Path(args.nab_dir)
    data = next(iter(sorted(base.rglob("nyc_taxi.csv"))), None)
    labels = next(iter(sorted(base.rglob("combined_windows.json"))), None)
    if data is None or labels is None:
        sys.exit(f"nyc_taxi.csv or combined_windows.json not found under {base}")
    ds = ingest(data, "nab", labels=labels)
    target = ds.entities[0].id
    return ds.entities, target, ds.labels[target]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--nab-dir")
    src.add_argument("--synthetic", action="store_true")
    ap.add_argument("--window", type=int, default=240)
    ap.add_argument("--grid", help="JSON grid (default: symbols and bins in 5..20)")
    ap.add_argument("--trees", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count(), help="grid points run in parallel")
    ap.add_argument("--out", help="write the report here as JSON")
    args = ap.parse_args()

    entities, target, labels = load(args)
    grid = json.loads(Path(args.grid).read_text()) if args.grid else GRID
    base = PipelineConfig(window=args.window, scoring="iforest", trees=args.trees, use_network=False, seed=args.seed)
    t0 = time.perf_counter()
    best, ev, points = grid_search(entities, target, labels, grid, base, workers=args.workers)
    elapsed = time.perf_counter() - t0
    report = {
        "source": "synthetic" if args.synthetic else "nab",
        "values": len(entities[0].sensors[0]),
        "best_f1": ev.best_f1,
        "precision": ev.best_precision,
        "recall": ev.best_recall,
        "best": {"window": best.window, "no_symbols": best.discrete.no_symbols, "no_bins": best.discrete.no_bins},
        "grid_points": len(points),
        "seconds": elapsed,
        "points": [{**p.params, "f1": p.evaluation.best_f1 if p.evaluation else None, "error": p.error} for p in points],
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")


if __name__ == "__main__":
    main()
