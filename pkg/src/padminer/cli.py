"""Command-line interface.

Every subcommand reads a dataset, runs one stage (or the whole pipeline)
and writes its artifacts into a run directory.  Exit codes: 0 success,
1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import timedelta
from pathlib import Path

import numpy as np

from .config import PipelineConfig, apply_env
from .embedding import concatenate_embeddings, create_embedding
from .evaluation import evaluate_windows
from .io import DataError, Dataset, ingest, read_point_labels
from .mining import save_patterns
from .network import NetworkResult, build_network
from .pipeline import DEFAULT_GRID, NoPatternsError, evaluate_result, grid_search, prepare_series, run_bad, sensor_artifacts
from .scoring import AnomalyScoreSeries, aggregate_max, iforest_fit, iforest_scores, per_sensor_scores

log = logging.getLogger("padminer")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _safe(name: str) -> str:
    return name.replace("/", "__").replace("\\", "__")


# -- helpers ----------------------------------------------------------------


def _load_config(args) -> PipelineConfig:
    try:
        cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
        cfg = apply_env(cfg)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        for key in ("window", "no_symbols", "no_bins", "binning", "scoring", "k", "min_len", "rdur", "trees"):
            val = getattr(args, key, None)
            if val is not None:
                overrides[key] = val
        if getattr(args, "no_network", False):
            overrides["use_network"] = False
        return cfg.with_(**overrides) if overrides else cfg
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _load_data(args) -> Dataset:
    return ingest(args.data, args.format, labels=args.labels, sample_interval=timedelta(seconds=args.interval))


def _target(ds: Dataset, args) -> str:
    if args.entity:
        ds.entity(args.entity)
        return args.entity
    return ds.entities[0].id


def _run_dir(args, cfg: PipelineConfig) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(cfg.to_json() + "\n")
    return out


def _prepared(ds: Dataset, target: str, cfg: PipelineConfig):
    prepared = []
    for s in ds.entity(target).sensors:
        p = prepare_series(s, cfg)
        if p is None:
            log.warning("skipping flat or straight-line sensor %s", s.id)
        else:
            prepared.append(p)
    if not prepared:
        raise NoPatternsError(f"entity {target}: every sensor is flat or a straight line")
    return prepared


def _write_patterns(out: Path, arts) -> None:
    (out / "patterns").mkdir(exist_ok=True)
    for a in arts:
        save_patterns(a.patterns, out / "patterns" / f"{_safe(a.series.id)}.jsonl")


def _write_embeddings(out: Path, arts) -> None:
    (out / "embedding").mkdir(exist_ok=True)
    for a in arts:
        base = out / "embedding" / _safe(a.series.id)
        a.embedding.to_csv(f"{base}.csv", f"{base}.manifest.json", a.patterns)


def _write_sensor_scores(path: Path, starts, sensor_ids, matrix) -> None:
    with open(path, "w") as fh:
        fh.write("sensor_id,window_start,score\n")
        for sid, row in zip(sensor_ids, matrix):
            for s, v in zip(starts, row):
                fh.write(f"{sid},{int(s)},{float(v)!r}\n")


def _write_network(out: Path, net: NetworkResult) -> None:
    with open(out / "edges.csv", "w") as fh:
        fh.write("device_a,device_b,series_a,series_b,type_a,type_b,dist_fp,dist_hist\n")
        for e in sorted(net.graph.edges, key=lambda e: (e.series_a, e.series_b)):
            fh.write(
                f"{e.entity_a},{e.entity_b},{e.series_a},{e.series_b},"
                f"{net.type_of[e.series_a]},{net.type_of[e.series_b]},{float(e.distance)!r},{float(e.dist_hist)!r}\n"
            )
    with open(out / "relations.csv", "w") as fh:
        fh.write("type_a,type_b,support\n")
        for r in net.relations:
            fh.write(f"{r.type_a},{r.type_b},{r.support}\n")
    with open(out / "graph.edgelist", "w") as fh:
        for a, b in sorted(net.graph.device_pairs()):
            fh.write(f"{a} {b}\n")


def _write_eval(path: Path, summary: dict) -> None:
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# -- subcommands ------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = _load_config(args)
    ds = _load_data(args)
    out = _run_dir(args, cfg)
    doc = {
        "entities": [
            {"id": e.id, "sensors": [{"id": s.id, "type": s.sensor_type, "length": len(s)} for s in e.sensors]}
            for e in ds.entities
        ],
        "labelled": sorted(ds.labels),
    }
    (out / "dataset.json").write_text(json.dumps(doc, indent=2) + "\n")
    for e in ds.entities:
        print(f"{e.id}\t{len(e.sensors)} sensors\t{len(e.sensors[0])} values")
    return EXIT_OK


def cmd_discretize(args) -> int:
    from .discretize import build_sequence_db

    cfg = _load_config(args)
    ds = _load_data(args)
    target = _target(ds, args)
    out = _run_dir(args, cfg)
    (out / "discrete").mkdir(exist_ok=True)
    for s in _prepared(ds, target, cfg):
        db = build_sequence_db(s, cfg.window_spec(), cfg.sax_config())
        db.to_csv(out / "discrete" / f"{_safe(s.id)}.csv")
    return EXIT_OK


def _artifacts(args):
    cfg = _load_config(args)
    ds = _load_data(args)
    target = _target(ds, args)
    out = _run_dir(args, cfg)
    arts = [sensor_artifacts(s, cfg) for s in _prepared(ds, target, cfg)]
    return cfg, ds, target, out, arts


def cmd_mine(args) -> int:
    _, _, _, out, arts = _artifacts(args)
    _write_patterns(out, arts)
    for a in arts:
        print(f"{a.series.id}\t{len(a.patterns)} patterns")
    return EXIT_OK


def cmd_embed(args) -> int:
    _, _, _, out, arts = _artifacts(args)
    _write_patterns(out, arts)
    _write_embeddings(out, arts)
    return EXIT_OK


def cmd_score(args) -> int:
    """Scores one entity's own sensors, without network context."""
    cfg, _, target, out, arts = _artifacts(args)
    _write_patterns(out, arts)
    _write_embeddings(out, arts)
    scored = [a for a in arts if a.patterns]
    if not scored:
        raise NoPatternsError(f"entity {target}: no interesting patterns in any sensor")
    if cfg.scoring == "iforest":
        E = concatenate_embeddings([a.embedding for a in scored], [a.series.id for a in scored])
        scores = iforest_scores(iforest_fit(E, trees=cfg.trees, seed=cfg.seed), E)
    else:
        ids, A = per_sensor_scores({a.series.id: (a.patterns, a.embedding) for a in arts})
        scores = AnomalyScoreSeries(arts[0].db.window_starts, aggregate_max(A), "max")
        _write_sensor_scores(out / "sensor_scores.csv", scores.window_starts, ids, A)
    scores.to_csv(out / "scores.csv")
    return EXIT_OK


def cmd_build_network(args) -> int:
    cfg = _load_config(args)
    ds = _load_data(args)
    out = _run_dir(args, cfg)
    net = build_network(ds.entities, cfg.network, seed=cfg.seed)
    _write_network(out, net)
    print(f"{len(net.graph.edges)} edges, {len(net.relations)} relation types")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    ds = _load_data(args)
    target = _target(ds, args)
    out = _run_dir(args, cfg)
    res = run_bad(ds.entities, target, cfg)
    arts = list(res.sensors.values())
    _write_patterns(out, arts)
    _write_embeddings(out, arts)
    res.scores.to_csv(out / "scores.csv")
    if res.sensor_scores is not None:
        _write_sensor_scores(out / "sensor_scores.csv", res.window_starts, res.sensor_ids, res.sensor_scores)
    if res.network is not None:
        _write_network(out, res.network)
    if target in ds.labels:
        ev = evaluate_result(res, ds.labels[target], cfg)
        _write_eval(out / "eval.json", ev.summary())
        print(f"F1 {ev.best_f1:.4f} (P {ev.best_precision:.4f}, R {ev.best_recall:.4f})")
    print(f"{len(res.window_starts)} windows scored in {res.runtime:.1f}s")
    return EXIT_OK


def _read_scores(path) -> tuple[np.ndarray, np.ndarray]:
    starts, scores = [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["window_start", "score"]:
            raise DataError(f"{path}: expected header 'window_start,score'")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                a, b = line.strip().split(",")
                starts.append(int(a))
                scores.append(float(b))
            except ValueError:
                raise DataError(f"{path}:{lineno}: expected 'window_start,score'") from None
    return np.array(starts), np.array(scores)


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    starts, scores = _read_scores(args.scores)
    if args.data:
        ds = _load_data(args)
        target = _target(ds, args)
        if target not in ds.labels:
            raise DataError(f"no labels found for entity {target}")
        labels = ds.labels[target]
    elif args.labels:
        labels = read_point_labels(args.labels)
    else:
        raise UsageError("evaluate needs --labels or a labelled --data set")
    t0 = time.perf_counter()
    ev = evaluate_windows(scores, starts, args.eval_window or cfg.window, labels)
    ev.runtime = time.perf_counter() - t0
    out = _run_dir(args, cfg)
    _write_eval(out / "eval.json", ev.summary())
    print(f"F1 {ev.best_f1:.4f} (P {ev.best_precision:.4f}, R {ev.best_recall:.4f})")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    cfg = _load_config(args)
    ds = _load_data(args)
    target = _target(ds, args)
    if target not in ds.labels:
        raise DataError(f"no labels found for entity {target}")
    if args.grid:
        try:
            grid = json.loads(Path(args.grid).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad grid file: {exc}") from None
    else:
        grid = DEFAULT_GRID
    try:
        best, ev, points = grid_search(ds.entities, target, ds.labels[target], grid, cfg)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, NoPatternsError):
            raise
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(best.to_json() + "\n")
    _write_eval(out / "eval.json", ev.summary())
    rows = [
        {"params": p.params, "f1": None if p.evaluation is None else p.evaluation.best_f1, "error": p.error}
        for p in points
    ]
    (out / "grid.json").write_text(json.dumps(rows, indent=2) + "\n")
    d = best.discrete
    print(f"best F1 {ev.best_f1:.4f}: window={best.window} no_symbols={d.no_symbols} no_bins={d.no_bins}")
    return EXIT_OK


def cmd_bench(args) -> int:
    """Timings of mining, embedding and pairwise similarity on synthetic data."""
    from .discretize import DiscreteSequenceDB
    from .mining import MiningConfig, mine_interesting_patterns
    from .network import Threshold, build_similarity_matrix, create_fingerprint, create_histogram
    from .series import TimeSeries

    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed)
    report = {}

    db = DiscreteSequenceDB.from_lists(rng.integers(0, 5, (args.windows, 10)).tolist(), 5)
    t0 = time.perf_counter()
    pats = mine_interesting_patterns(db, MiningConfig(k=cfg.mining.k, min_len=2, rdur=cfg.mining.rdur))
    report["mine_seconds"] = time.perf_counter() - t0
    report["patterns"] = len(pats)
    t0 = time.perf_counter()
    create_embedding(pats, db, cfg.mining.rdur)
    report["embed_seconds"] = time.perf_counter() - t0

    n, days = args.series, 14
    ids, F, H = [], [], []
    for i in range(n):
        s = TimeSeries(f"s{i}", rng.random(days * 24), sample_interval=timedelta(hours=1))
        ids.append(s.id)
        F.append(create_fingerprint(s, cfg.network.interval, cfg.network.bins_f))
        H.append(create_histogram(s, cfg.network.bins_h))
    t0 = time.perf_counter()
    m = build_similarity_matrix(ids, F, H, Threshold(cfg.network.t_f), Threshold(cfg.network.t_h), seed=cfg.seed)
    dt = time.perf_counter() - t0
    report["similarity_pairs"] = m.pairs_compared
    report["pairs_per_second"] = m.pairs_compared / dt
    print(json.dumps(report, indent=2))
    if args.out:
        out = _run_dir(args, cfg)
        (out / "bench.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="run", help="run directory (default: run)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("data", help="dataset file or directory")
    data.add_argument("--format", choices=["csv", "nab", "smd"], default="csv")
    data.add_argument("--labels", help="label file (NAB window JSON or point labels)")
    data.add_argument("--entity", help="target entity (default: first)")
    data.add_argument("--interval", type=float, default=60.0, help="sample interval in seconds for matrix files")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--window", type=int)
    params.add_argument("--no-symbols", dest="no_symbols", type=int)
    params.add_argument("--no-bins", dest="no_bins", type=int)
    params.add_argument("--binning", choices=["global", "local", "kmeans"])
    params.add_argument("--k", type=int)
    params.add_argument("--min-len", dest="min_len", type=int)
    params.add_argument("--rdur", type=float)

    p = _Parser(prog="padminer", description="Pattern-based anomaly detection in device networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("ingest", parents=[common, data], help="read a dataset and summarise it").set_defaults(fn=cmd_ingest)
    sub.add_parser("discretize", parents=[common, data, params], help="SAX sequence databases").set_defaults(fn=cmd_discretize)
    sub.add_parser("mine", parents=[common, data, params], help="mine patterns per sensor").set_defaults(fn=cmd_mine)
    sub.add_parser("embed", parents=[common, data, params], help="pattern embeddings per sensor").set_defaults(fn=cmd_embed)
    sp = sub.add_parser("score", parents=[common, data, params], help="score windows of one entity")
    sp.add_argument("--scoring", choices=["fpof", "iforest"])
    sp.add_argument("--trees", type=int)
    sp.set_defaults(fn=cmd_score)
    sub.add_parser("build-network", parents=[common, data], help="recover device edges").set_defaults(fn=cmd_build_network)
    sp = sub.add_parser("detect", parents=[common, data, params], help="end-to-end detection")
    sp.add_argument("--scoring", choices=["fpof", "iforest"])
    sp.add_argument("--trees", type=int)
    sp.add_argument("--no-network", action="store_true", help="disable network context")
    sp.set_defaults(fn=cmd_detect)

    sp = sub.add_parser("evaluate", parents=[common], help="point-adjusted F1 of a score file")
    sp.add_argument("scores", help="scores.csv")
    sp.add_argument("--labels", help="point labels, one 0/1 per line")
    sp.add_argument("--data", help="labelled dataset instead of --labels")
    sp.add_argument("--format", choices=["csv", "nab", "smd"], default="csv")
    sp.add_argument("--entity")
    sp.add_argument("--interval", type=float, default=60.0)
    # Only the window length matters here, so it bypasses config validation.
    sp.add_argument("--window", dest="eval_window", type=int, help="window length of the scored windows")
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("grid-search", parents=[common, data, params], help="sweep discretisation parameters")
    sp.add_argument("--grid", help="JSON object mapping parameter -> list of values")
    sp.add_argument("--scoring", choices=["fpof", "iforest"])
    sp.add_argument("--trees", type=int)
    sp.add_argument("--no-network", action="store_true")
    sp.set_defaults(fn=cmd_grid_search)

    sp = sub.add_parser("bench", parents=[common], help="synthetic timing benchmark")
    sp.add_argument("--windows", type=int, default=10000)
    sp.add_argument("--series", type=int, default=2000)
    sp.set_defaults(fn=cmd_bench, out=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"padminer: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, NoPatternsError, FileNotFoundError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"padminer: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
