import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from padminer.discretize import (
    BinTable,
    DiscreteSequenceDB,
    SaxConfig,
    build_sequence_db,
    fit_bins,
    from_letters,
    paa,
    sax_window,
    to_letters,
)
from padminer.series import TimeSeries, WindowSpec


def naive_global(window, paa_win, boundaries):
    # Bin index = number of boundaries <= the block mean.
    out = []
    for i in range(0, len(window), paa_win):
        m = sum(window[i : i + paa_win]) / paa_win
        out.append(sum(1 for b in boundaries if m >= b))
    return out


def naive_local(window, paa_win, no_bins):
    lo, hi = min(window), max(window)
    if hi == lo:
        return [no_bins // 2] * (len(window) // paa_win)
    out = []
    for i in range(0, len(window), paa_win):
        m = sum(window[i : i + paa_win]) / paa_win
        out.append(min(int((m - lo) / (hi - lo) * no_bins + 1e-12), no_bins - 1))
    return out


def test_global_boundaries():
    assert fit_bins(np.array([0.0, 1.0]), SaxConfig(2, 4)).boundaries == pytest.approx((0.25, 0.5, 0.75))
    assert fit_bins(np.array([0.2, 0.8]), SaxConfig(2, 3)).boundaries == pytest.approx((0.4, 0.6))


def test_kmeans_centroids():
    bins = fit_bins(np.array([0, 0, 0, 1, 1, 1.0]), SaxConfig(2, 2, "kmeans"))
    assert bins.kind == "kmeans"
    assert bins.centroids == pytest.approx((0.0, 1.0))


def test_kmeans_is_deterministic():
    x = np.random.default_rng(0).random(400)
    cfg = SaxConfig(4, 5, "kmeans", seed=3)
    assert fit_bins(x, cfg) == fit_bins(x, cfg)


def test_kmeans_falls_back_to_global():
    # Fewer distinct values than bins cannot be clustered.
    bins = fit_bins(np.array([0.0, 1.0, 0.0, 1.0]), SaxConfig(2, 3, "kmeans"))
    assert bins.kind == "global"


def test_local_table_is_empty():
    assert fit_bins(np.array([0.0, 1.0]), SaxConfig(2, 3, "local")) == BinTable("local")


def test_sax_illustration():
    # Block means chosen to land in the bins of the 3-bin illustration.
    rng = np.random.default_rng(0)
    means = [0.5, 0.1, 0.15, 0.45, 0.9, 0.85, 0.55, 0.95]
    window = []
    for m in means:
        noise = rng.normal(0, 0.03, 16)
        window.extend(m + noise - noise.mean())
    bins = BinTable("global", boundaries=(1 / 3, 2 / 3))
    symbols = sax_window(window, SaxConfig(16, 3), bins)
    assert symbols == [1, 0, 0, 1, 2, 2, 1, 2]
    assert to_letters(symbols) == "baabccbc"


def test_small_examples():
    bins = fit_bins(np.array([0.0, 1.0]), SaxConfig(2, 2))
    assert sax_window([0, 0, 1, 1], SaxConfig(2, 2), bins) == [0, 1]
    for kind in ("global", "local"):
        cfg = SaxConfig(2, 4, kind)
        b = BinTable(kind, boundaries=(0.25, 0.5, 0.75)) if kind == "global" else BinTable("local")
        out = sax_window([0.3] * 6, cfg, b)
        assert len(set(out)) == 1
    kcfg = SaxConfig(2, 2, "kmeans")
    assert len(set(sax_window([0.3] * 6, kcfg, BinTable("kmeans", centroids=(0.0, 1.0))))) == 1


def test_boundary_values_go_up():
    bins = BinTable("global", boundaries=(0.5,))
    assert sax_window([0.5, 0.5], SaxConfig(1, 2), bins) == [1, 1]
    assert sax_window([1.0, 0.0], SaxConfig(1, 2), bins) == [1, 0]


def test_local_constant_window_is_middle_symbol():
    assert sax_window([0.7] * 8, SaxConfig(2, 5, "local"), BinTable("local")) == [2] * 4


def test_sequence_db_counts():
    s = TimeSeries("s", np.linspace(0, 1, 12))
    db = build_sequence_db(s, WindowSpec(4), SaxConfig(2, 3))
    assert len(db) == 9 and db.no_symbols == 2
    assert db.window_starts.tolist() == list(range(9))


def test_ramp_global_vs_local():
    s = TimeSeries("ramp", np.linspace(0, 1, 60))
    g = build_sequence_db(s, WindowSpec(10), SaxConfig(5, 3))
    assert (g.sequences[0] == 0).all() and (g.sequences[-1] == 2).all()
    loc = build_sequence_db(s, WindowSpec(10), SaxConfig(5, 3, "local"))
    for start, seq in zip(loc.window_starts, loc.sequences):
        w = s.values[start : start + 10].tolist()
        assert seq.tolist() == naive_local(w, 5, 3)
    assert (loc.sequences[:, 0] == 0).all()


def test_indivisible_window_is_rejected():
    with pytest.raises(ValueError):
        SaxConfig.for_window(100, 8)
    with pytest.raises(ValueError):
        build_sequence_db(TimeSeries("s", np.arange(20.0)), WindowSpec(9), SaxConfig(2, 3))


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(2, 6), st.integers(2, 8))
def test_global_matches_naive(seed, paa_win, no_symbols, no_bins):
    rng = np.random.default_rng(seed)
    x = rng.random(paa_win * no_symbols + 15)
    cfg = SaxConfig(paa_win, no_bins)
    bins = fit_bins(x, cfg)
    db = build_sequence_db(TimeSeries("s", x), WindowSpec(paa_win * no_symbols), cfg)
    for start, seq in zip(db.window_starts, db.sequences):
        w = x[start : start + paa_win * no_symbols].tolist()
        assert seq.tolist() == naive_global(w, paa_win, bins.boundaries)
        assert len(seq) == no_symbols


@given(
    arrays(float, 12, elements=st.floats(-100, 100)),
    st.floats(0.1, 50),
    st.floats(-100, 100),
)
def test_local_is_affine_invariant(w, scale, shift):
    if np.ptp(w) < 1e-3:
        return
    cfg = SaxConfig(3, 4, "local")
    table = BinTable("local")
    a = sax_window(w, cfg, table)
    b = sax_window(w * scale + shift, cfg, table)
    # Means that sit within rounding distance of a bin edge may flip.
    means = paa(w, 3)
    rel = (means - w.min()) / np.ptp(w) * 4
    stable = np.abs(rel - np.round(rel)) > 1e-6
    assert [x for x, ok in zip(a, stable) if ok] == [x for x, ok in zip(b, stable) if ok]


def test_db_validation_and_csv(tmp_path):
    with pytest.raises(ValueError):
        DiscreteSequenceDB.from_lists([[0, 3]], 3)
    with pytest.raises(ValueError):
        DiscreteSequenceDB.from_lists([[0, 1], [0]], 3)
    db = DiscreteSequenceDB.from_lists([[0, 1, 2], [2, 2, 0]], 3)
    db.to_csv(tmp_path / "db.csv")
    assert (tmp_path / "db.csv").read_text().splitlines() == ["window_start,symbols", "0,abc", "1,cca"]
    assert from_letters("cca") == [2, 2, 0]


def test_next_positions():
    db = DiscreteSequenceDB.from_lists([[1, 0, 1]], 2)
    nxt = db.next_positions()
    assert nxt[0, 0].tolist() == [1, 0]
    assert nxt[0, 2].tolist() == [3, 2]
    assert nxt[0, 3].tolist() == [3, 3]
