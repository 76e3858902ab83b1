"""End-to-end detection: network context, per-sensor mining and embedding, scoring."""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import PipelineConfig
from .discretize import DiscreteSequenceDB, build_sequence_db
from .embedding import PatternEmbedding, concatenate_embeddings, create_embedding
from .evaluation import EvaluationResult, evaluate_windows
from .mining import SequentialPattern, mine_interesting_patterns
from .network import NetworkResult, build_network, extend_entity
from .scoring import AnomalyScoreSeries, aggregate_max, iforest_fit, iforest_scores, per_sensor_scores
from .series import ConstantSeriesError, Entity, TimeSeries, cap_quantile, fill_missing, is_straight_line, min_max_normalize

log = logging.getLogger(__name__)


class NoPatternsError(ValueError):
    pass


@dataclass
class SensorArtifacts:
    series: TimeSeries
    db: DiscreteSequenceDB
    patterns: list[SequentialPattern]
    embedding: PatternEmbedding


@dataclass
class BadResult:
    target: str
    extended: Entity
    scores: AnomalyScoreSeries
    sensors: dict[str, SensorArtifacts]
    skipped: list[str] = field(default_factory=list)
    sensor_ids: list[str] = field(default_factory=list)
    sensor_scores: np.ndarray | None = None
    network: NetworkResult | None = None
    runtime: float = 0.0

    @property
    def window_starts(self) -> np.ndarray:
        return self.scores.window_starts


def prepare_series(series: TimeSeries, config: PipelineConfig) -> TimeSeries | None:
    """Normalised series, or None if it is flat or a straight line."""
    s = series.with_values(fill_missing(series.values))
    try:
        s = min_max_normalize(cap_quantile(s, config.cap_quantile))
    except ConstantSeriesError:
        return None
    if is_straight_line(s, config.straight_line_r):
        return None
    return s


def sensor_artifacts(series: TimeSeries, config: PipelineConfig) -> SensorArtifacts:
    db = build_sequence_db(series, config.window_spec(), config.sax_config())
    patterns = mine_interesting_patterns(db, config.mining)
    emb = create_embedding(patterns, db, config.mining.rdur)
    return SensorArtifacts(series, db, patterns, emb)


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_bad(
    entities: Sequence[Entity],
    target_entity: str,
    config: PipelineConfig = PipelineConfig(),
    network: NetworkResult | None = None,
) -> BadResult:
    t0 = time.perf_counter()
    by_id = {e.id: e for e in entities}
    if target_entity not in by_id:
        raise KeyError(f"target entity {target_entity!r} not in dataset")
    target = by_id[target_entity]

    if config.use_network and len(entities) > 1:
        if network is None:
            network = build_network(entities, config.network, seed=config.seed)
        extended = extend_entity(target, network.graph)
    else:
        network = None
        extended = target

    prepared, skipped = [], []
    for s in extended.sensors:
        p = prepare_series(s, config)
        if p is None:
            skipped.append(s.id)
        else:
            prepared.append(p)
    if skipped:
        log.info("%s: skipped %d flat or straight-line sensors", target_entity, len(skipped))
    if not prepared:
        raise NoPatternsError(f"entity {target_entity}: every sensor is flat or a straight line")

    arts = _map(lambda s: sensor_artifacts(s, config), prepared, config.threads)
    sensors = {a.series.id: a for a in arts}
    with_patterns = [a for a in arts if a.patterns]
    if not with_patterns:
        raise NoPatternsError(
            f"entity {target_entity}: no interesting patterns in any sensor; "
            "try fewer bins, fewer symbols or a larger rdur"
        )

    starts = arts[0].db.window_starts
    sensor_ids, A = [], None
    if config.scoring == "iforest":
        E = concatenate_embeddings([a.embedding for a in with_patterns], [a.series.id for a in with_patterns])
        model = iforest_fit(E, trees=config.trees, seed=config.seed)
        scores = iforest_scores(model, E)
    else:
        sensor_ids, A = per_sensor_scores({a.series.id: (a.patterns, a.embedding) for a in arts})
        scores = AnomalyScoreSeries(starts, aggregate_max(A), "max")
    result = BadResult(target_entity, extended, scores, sensors, skipped, sensor_ids, A, network)
    result.runtime = time.perf_counter() - t0
    return result


def evaluate_result(result: BadResult, labels, config: PipelineConfig) -> EvaluationResult:
    ev = evaluate_windows(result.scores.scores, result.window_starts, config.window, labels)
    ev.runtime = result.runtime
    return ev


DEFAULT_GRID = {
    "no_symbols": [5, 8, 10, 16, 20],
    "no_bins": [5, 8, 10, 15, 20],
}


@dataclass
class GridPoint:
    params: dict
    config: PipelineConfig
    evaluation: EvaluationResult | None
    error: str = ""


_GRID_INPUTS: tuple = ()


def _init_grid_worker(*inputs) -> None:
    global _GRID_INPUTS
    _GRID_INPUTS = inputs


def _grid_point(params: dict, cfg: PipelineConfig) -> GridPoint:
    entities, target_entity, labels, network = _GRID_INPUTS
    try:
        res = run_bad(entities, target_entity, cfg, network=network)
    except NoPatternsError as exc:
        return GridPoint(params, cfg, None, str(exc))
    ev = evaluate_result(res, labels, cfg)
    log.info("grid %s -> F1 %.3f", params, ev.best_f1)
    return GridPoint(params, cfg, ev)


def grid_search(
    entities: Sequence[Entity],
    target_entity: str,
    labels,
    grid: Mapping[str, Sequence],
    base: PipelineConfig = PipelineConfig(),
    workers: int | None = None,
) -> tuple[PipelineConfig, EvaluationResult, list[GridPoint]]:
    """Exhaustive sweep; ties go to the smaller window, then fewer bins, then fewer symbols.

    ``workers`` > 1 evaluates grid points in that many processes (default:
    ``base.threads``). Every point is deterministic, so the outcome does not
    depend on it.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("empty parameter grid")
    keys = sorted(grid)
    points: list[GridPoint | None] = []
    todo = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, combo))
        try:
            todo.append((len(points), params, base.with_(**params)))
            points.append(None)
        except ValueError as exc:
            points.append(GridPoint(params, base, None, str(exc)))
    network = None
    if todo and todo[0][2].use_network and len(entities) > 1:
        network = build_network(entities, todo[0][2].network, seed=todo[0][2].seed)
    inputs = (entities, target_entity, labels, network)
    workers = base.threads if workers is None else workers
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(min(workers, len(todo)), initializer=_init_grid_worker, initargs=inputs) as pool:
            done = list(pool.map(_grid_point, [t[1] for t in todo], [t[2] for t in todo]))
    else:
        _init_grid_worker(*inputs)
        done = [_grid_point(params, cfg) for _, params, cfg in todo]
    for (slot, _, _), point in zip(todo, done):
        points[slot] = point
    scored = [p for p in points if p.evaluation is not None]
    if not scored:
        raise NoPatternsError("no grid point produced scores")
    best = min(
        scored,
        key=lambda p: (-p.evaluation.best_f1, p.config.window, p.config.discrete.no_bins, p.config.discrete.no_symbols),
    )
    return best.config, best.evaluation, points
