"""Acceptance checks.  Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear live), or
``python tests/test_acceptance.py`` for the summary alone.
"""

import math
import os
import time
from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest

from oracles import brute_force_mine, oracle_bits_saved, huffman_bits

from padminer.config import DiscreteParams, PipelineConfig
from padminer.discretize import DiscreteSequenceDB, SaxConfig, build_sequence_db
from padminer.embedding import PatternEmbedding, create_embedding, naive_embedding
from padminer.io import ingest
from padminer.mining import (
    MARKER,
    MiningConfig,
    SequentialPattern,
    bits_saved,
    description_length,
    min_duration,
    mine_interesting_patterns,
    occurs,
    residual,
)
from padminer.network import (
    Threshold,
    build_network,
    build_similarity_matrix,
    create_fingerprint,
    create_histogram,
    dist_fp,
    dist_hist,
    find_frequent_relation_types,
)
from padminer.pipeline import grid_search, run_bad
from padminer.scoring import average_path_length, fpof_scores, iforest_fit, iforest_scores
from padminer.series import TimeSeries, WindowSpec
from padminer.synthetic import ar1, blob_with_outliers, contextual_dataset, planted_network

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def report(capsys):
    def _report(name: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return _report


def _random_db(rng, max_n=50, max_len=10, max_alpha=5):
    A = int(rng.integers(2, max_alpha + 1))
    L = int(rng.integers(2, max_len + 1))
    n = int(rng.integers(1, max_n + 1))
    seqs = rng.integers(0, A, (n, L)).tolist()
    return seqs, A


def test_miner_matches_brute_force(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = []
    for case in range(500):
        seqs, A = _random_db(rng)
        min_len = int(rng.choice([2, 3]))
        rdur = float(rng.choice([1.0, 1.2, 2.0]))
        k = int(rng.choice([5, 100]))
        got = mine_interesting_patterns(DiscreteSequenceDB.from_lists(seqs, A), MiningConfig(k, min_len, rdur))
        want = brute_force_mine(seqs, A, k, min_len, rdur)
        same = len(got) == len(want) and all(
            p.symbols == s and p.support == sup and abs(p.bits_saved - b) <= 1e-9 for p, (s, sup, b) in zip(got, want)
        )
        if not same:
            mismatches.append(case)
    elapsed = time.perf_counter() - t0
    report(
        "miner oracle equivalence",
        not mismatches and elapsed < 60,
        f"500 databases, {len(mismatches)} mismatches, {elapsed:.1f}s",
    )


def test_bits_saved_oracle(report):
    rng = np.random.default_rng(7)
    bad = 0
    negatives_leaked = 0
    for _ in range(100):
        seqs, A = _random_db(rng)
        db = DiscreteSequenceDB.from_lists(seqs, A)
        if rng.random() < 0.7:
            # A subsequence of some row, so that the pattern occurs.
            row = seqs[int(rng.integers(len(seqs)))]
            m = int(rng.integers(1, len(row) + 1))
            idx = np.sort(rng.choice(len(row), m, replace=False))
            pattern = tuple(row[i] for i in idx)
        else:
            # Uniform random pattern; bits_saved is only defined on a nonempty cover.
            pattern = None
            while pattern is None or not any(occurs(pattern, s) for s in seqs):
                pattern = tuple(int(x) for x in rng.integers(0, A, int(rng.integers(1, 5))))
        if bits_saved(pattern, db) != oracle_bits_saved(pattern, seqs, A):
            bad += 1
        for p in mine_interesting_patterns(db, MiningConfig(100, 2, 1.2)):
            if not p.bits_saved > 0 or oracle_bits_saved(p.symbols, seqs, A) <= 0:
                negatives_leaked += 1
    report(
        "bits_saved oracle",
        bad == 0 and negatives_leaked == 0,
        f"100 pairs, {bad} differ; {negatives_leaked} non-positive patterns in miner output",
    )


def test_embedding_equivalence_and_speed(report):
    rng = np.random.default_rng(11)
    differ = 0
    for _ in range(100):
        seqs, A = _random_db(rng, max_n=60)
        db = DiscreteSequenceDB.from_lists(seqs, A)
        rdur = float(rng.choice([1.0, 1.2, 2.0]))
        patterns = mine_interesting_patterns(db, MiningConfig(50, 2, rdur))
        other = DiscreteSequenceDB.from_lists(rng.integers(0, A, (len(seqs), len(seqs[0]))).tolist(), A)
        for target in (db, other):
            if not create_embedding(patterns, target, rdur).equals(naive_embedding(patterns, target, rdur)):
                differ += 1

    x = ar1(10_099, np.random.default_rng(0))
    x = (x - x.min()) / (x.max() - x.min())
    db = build_sequence_db(TimeSeries("ar", x), WindowSpec(100), SaxConfig.for_window(100, 10))
    patterns = mine_interesting_patterns(db, MiningConfig(1200, 2, 1.2))[:1000]
    t0 = time.perf_counter()
    fast = create_embedding(patterns, db, 1.2)
    t_fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    slow = naive_embedding(patterns, db, 1.2)
    t_slow = time.perf_counter() - t0
    ratio = t_slow / t_fast
    report(
        "embedding equivalence and speed",
        differ == 0 and fast.equals(slow) and len(db) == 10_000 and len(patterns) == 1000 and ratio >= 5,
        f"{differ} of 200 random instances differ; |D|={len(db)} |P|={len(patterns)} speed-up {ratio:.0f}x",
    )


def test_worked_examples(report):
    a, b, c, d, e, f, x, y, z = "abcdefxyz"
    checks = {
        "occurs": occurs((a, d, d, a), (c, c, a, d, d, c, a)) is True,
        "rdur abc": min_duration((a, b, c), (a, b, c, x, d, x, x, e, x, f)) / 3 == 1.0,
        "rdur def": min_duration((d, e, f), (a, b, c, x, d, x, x, e, x, f)) / 3 == 2.0,
        "residual": residual((a, b, c), (x, y, a, b, c, z)) == [x, y, MARKER, z],
        "residual DL": description_length(residual((a, b, c), (x, y, a, b, c, z))) == huffman_bits([x, y, "*", z]),
    }
    failed = [k for k, ok in checks.items() if not ok]
    report("worked examples", not failed, "all reproduce" if not failed else f"failed: {failed}")


def _nab_paths():
    base = Path(os.environ.get("PADMINER_NAB_DIR", ROOT / "data" / "nab"))
    data = next(iter(sorted(base.rglob("nyc_taxi.csv"))), None) if base.exists() else None
    labels = next(iter(sorted(base.rglob("combined_windows.json"))), None) if base.exists() else None
    return base, data, labels


NAB_GRID = {"no_symbols": [5, 8, 10, 16, 20], "no_bins": [5, 8, 10, 15, 20]}
NAB_WINDOW = 240


def test_nab_taxi_benchmark(report):
    base, data, labels = _nab_paths()
    if data is None or labels is None:
        report(
            "NAB nyc_taxi best F1 >= 0.75",
            False,
            f"dataset not found under {base} (set PADMINER_NAB_DIR to a NAB checkout); not measured",
        )
    ds = ingest(data, "nab", labels=labels)
    target = ds.entities[0].id
    t0 = time.perf_counter()
    base_cfg = PipelineConfig(window=NAB_WINDOW, scoring="iforest", use_network=False)
    _, ev, _ = grid_search(ds.entities, target, ds.labels[target], NAB_GRID, base_cfg, workers=os.cpu_count())
    elapsed = time.perf_counter() - t0
    report(
        "NAB nyc_taxi best F1 >= 0.75",
        len(ds.entities[0].sensors[0]) == 10320 and ev.best_f1 >= 0.75 and elapsed < 300,
        f"F1 {ev.best_f1:.3f}, {elapsed:.0f}s",
    )


def test_smd_machine_1_1(report, capsys):
    base = Path(os.environ.get("PADMINER_SMD_DIR", ROOT / "data" / "smd"))
    data = next(iter(sorted(base.rglob("test/machine-1-1.txt"))), None) if base.exists() else None
    if data is None:
        with capsys.disabled():
            print(f"\n[SKIP] SMD machine-1-1 best F1 >= 0.90: optional check, data not found under {base}")
        pytest.skip(f"optional check: SMD machine-1-1 not found under {base}")
    ds = ingest(data, "smd")
    target = ds.entities[0].id
    t0 = time.perf_counter()
    base_cfg = PipelineConfig(window=100, scoring="iforest", use_network=False)
    _, ev, _ = grid_search(ds.entities, target, ds.labels[target], {"no_symbols": [5, 10, 20], "no_bins": [5, 10]}, base_cfg, workers=os.cpu_count())
    elapsed = time.perf_counter() - t0
    report("SMD machine-1-1 best F1 >= 0.90", ev.best_f1 >= 0.90 and elapsed < 600, f"F1 {ev.best_f1:.3f}, {elapsed:.0f}s")


def _embedding(occ: np.ndarray, patterns) -> PatternEmbedding:
    rows, cols = np.nonzero(occ)
    vals = np.array([patterns[c].rsupport for c in cols])
    return PatternEmbedding(tuple(p.letters for p in patterns), np.arange(occ.shape[0]), rows, cols, vals)


def test_fpof_properties(report):
    rng = np.random.default_rng(5)
    violations = 0
    for _ in range(1000):
        m = int(rng.integers(1, 30))
        patterns = [
            SequentialPattern((i, i), int(s), float(s) / 100, 1.0) for i, s in enumerate(rng.integers(1, 101, m))
        ]
        base = rng.random(m) < 0.5
        sup = base | (rng.random(m) < 0.5)
        occ = np.vstack([base, sup, np.zeros(m, dtype=bool)])
        s = fpof_scores(patterns, _embedding(occ, patterns)).scores
        ok = (s >= 0).all() and (s <= 1).all() and s[2] == 1.0 and s[1] <= s[0] + 1e-12
        violations += not ok
    report("FPOF properties", violations == 0, f"1000 cases, {violations} violations")


def test_isolation_forest_sanity(report):
    X, outliers = blob_with_outliers(1000, 5, seed=0)
    hits = 0
    for seed in range(5):
        scores = iforest_scores(iforest_fit(X, trees=500, seed=seed), X).scores
        top = np.sort(np.argsort(-scores)[:5])
        hits += bool(np.array_equal(top, outliers))
    gamma = 0.5772156649015329
    c256 = 2 * (math.log(255) + gamma) - 2 * 255 / 256
    c_ok = abs(average_path_length(2) - 1.0) <= 1e-9 and abs(average_path_length(256) - c256) <= 1e-9
    report("isolation forest sanity", hits >= 4 and c_ok, f"outliers top-5 in {hits}/5 runs; c(n) closed form {'ok' if c_ok else 'off'}")


def test_similarity_pseudometrics(report):
    rng = np.random.default_rng(3)
    n = 300
    series = []
    for i in range(n):
        x = ar1(14 * 24, rng) if i % 2 else rng.random(14 * 24) ** rng.uniform(0.5, 3)
        series.append(TimeSeries(f"s{i}", (x - x.min()) / (x.max() - x.min()), sample_interval=timedelta(hours=1)))
    F = [create_fingerprint(s) for s in series]
    H = [create_histogram(s) for s in series]
    bad = 0
    for _ in range(10_000):
        i, j, k = rng.integers(0, n, 3)
        for dist, S in ((dist_fp, F), (dist_hist, H)):
            dij, dji, dik, dkj = dist(S[i], S[j]), dist(S[j], S[i]), dist(S[i], S[k]), dist(S[k], S[j])
            ok = dij >= 0 and dij == dji and dist(S[i], S[i]) == 0 and dij <= dik + dkj + 1e-9
            bad += not ok
    permuted_bad = 0
    for s in series[:50]:
        p = s.with_values(rng.permutation(s.values))
        permuted_bad += dist_hist(create_histogram(s), create_histogram(p)) != 0.0
    report(
        "similarity pseudometrics",
        bad == 0 and permuted_bad == 0,
        f"10000 triples x 2 metrics, {bad} violations; {permuted_bad} of 50 permuted copies with dist_hist != 0",
    )


def test_relation_type_recovery(report):
    pn = planted_network(seed=0)
    assert len(pn.entities) == 200 and len(set(pn.device_type.values())) == 4
    net = build_network(pn.entities)
    types = [r.pair for r in net.relations]
    supports = [r.support for r in net.relations]
    inter = [e for e in net.graph.edges if pn.cluster_of[e.entity_a] != pn.cluster_of[e.entity_b]]
    again = find_frequent_relation_types(net.matrix, net.device_of, net.type_of)
    ok = (
        types == pn.relation_types
        and supports == sorted(supports, reverse=True)
        and [r.pair for r in again] == types
        and not inter
        and len(net.graph.edges) > 0
    )
    report(
        "relation-type recovery",
        ok,
        f"found {list(zip(types, supports))}, {len(net.graph.edges)} edges, {len(inter)} inter-cluster",
    )


def test_similarity_throughput(report):
    rng = np.random.default_rng(0)
    n = 10_000
    F = np.log1p(rng.poisson(3, (n, 14 * 5)).astype(float))
    H = rng.dirichlet(np.ones(100), n)
    t0 = time.perf_counter()
    m = build_similarity_matrix([f"s{i}" for i in range(n)], F, H, Threshold(0.99), Threshold(0.95))
    dt = time.perf_counter() - t0
    rate = m.pairs_compared / dt
    report("similarity throughput", rate >= 1e5, f"{m.pairs_compared} pairs in {dt:.1f}s = {rate:.2e} pairs/s")


def test_contextual_ablation(report):
    ds = contextual_dataset(seed=0)
    cfg = PipelineConfig(window=48, discrete=DiscreteParams(no_symbols=8), scoring="fpof")

    def standing(result):
        s, st = result.scores.scores, result.window_starts
        i = int(np.nonzero(st == ds.anomaly_start)[0][0])
        above = int((s > s[i]).sum())
        tied = st[s == s[i]]
        return above, tied, len(s)

    above_on, tied_on, n = standing(run_bad(ds.entities, ds.target, cfg))
    above_off, _, _ = standing(run_bad(ds.entities, ds.target, cfg.with_(use_network=False)))
    # Ties at the top may only be windows that overlap the deviation.
    overlap = np.abs(tied_on - ds.anomaly_start) < ds.anomaly_length
    ok = above_on == 0 and overlap.all() and above_off + 1 > 0.1 * n
    report(
        "contextual ablation",
        ok,
        f"with context rank {above_on + 1} (tied with {len(tied_on) - 1} overlapping windows); "
        f"without context rank {above_off + 1} of {n}",
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
