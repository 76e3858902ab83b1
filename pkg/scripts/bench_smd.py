"""Grid search of BAD-iforest on one SMD machine file.

    python scripts/bench_smd.py --smd-dir ~/OmniAnomaly/ServerMachineDataset --machine machine-1-1
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

GRID = {"no_symbols": [5, 10, 20], "no_bins": [5, 10]}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--smd-dir", required=True)
    ap.add_argument("--machine", default="machine-1-1")
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--trees", type=int, default=500)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--workers", type=int, default=os.cpu_count(), help="grid points run in parallel")
    ap.add_argument("--out")
    args = ap.parse_args()

    data = next(iter(sorted(Path(args.smd_dir).rglob(f"test/{args.machine}.txt"))), None)
    if data is None:
        sys.exit(f"test/{args.machine}.txt not found under {args.smd_dir}")
    ds = ingest(data, "smd")
    target = ds.entities[0].id
    if target not in ds.labels:
        sys.exit(f"no test_label file for {args.machine}")
    base = PipelineConfig(window=args.window, scoring="iforest", trees=args.trees, use_network=False, threads=args.threads)
    t0 = time.perf_counter()
    best, ev, points = grid_search(ds.entities, target, ds.labels[target], GRID, base, workers=args.workers)
    report = {
        "machine": args.machine,
        "sensors": len(ds.entities[0].sensors),
        "values": len(ds.entities[0].sensors[0]),
        "best_f1": ev.best_f1,
        "precision": ev.best_precision,
        "recall": ev.best_recall,
        "best": {"no_symbols": best.discrete.no_symbols, "no_bins": best.discrete.no_bins},
        "seconds": time.perf_counter() - t0,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")


if __name__ == "__main__":
    main()
