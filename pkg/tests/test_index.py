import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import RUNNING_TRAJECTORIES, dec, enc, naive_rank, random_instance, rotation_count
from trajfm import instrument
from trajfm.datagen import gen_poisson_digraph, walks_for_text_length
from trajfm.errors import IndexFormatError, InvalidQueryError
from trajfm.index import (
    BaselineFmIndex,
    SntIndex,
    baseline_search,
    build_baseline,
    build_index,
    count_occurrences,
    expected_rank_cost,
    extract,
    from_bytes,
    load_index,
    pseudo_rank,
    suffix_range,
)
from trajfm.text import EDGE_BASE, build_bwt, build_trajectory_string

A, B, C, D, E, F = range(6)   # edge ids of the running example


@pytest.fixture(scope="module")
def running():
    return build_index(RUNNING_TRAJECTORIES, debug=True)


@pytest.fixture(scope="module")
def running_base():
    return build_baseline(RUNNING_TRAJECTORIES, debug=True)


def test_forward_path_range(running, running_base):
    r = suffix_range(running, [A, B])
    assert (r.sp, r.ep, r.count) == (9, 11, 2)
    assert list(r) == [9, 10]
    assert running_base.suffix_range([A, B]) == r
    assert baseline_search(running_base, enc("BA")) == r
    assert count_occurrences(running, [A, B]) == 2


def test_single_edge_range_is_its_context_block(running):
    r = running.suffix_range([A])
    assert (r.sp, r.ep) == (5, 8)


def test_absent_paths(running):
    assert running.suffix_range([B, A]) is None
    assert running.suffix_range([A, B, C, D]) is None
    assert running.count([F, A]) == 0


def test_pseudo_rank_example(running):
    a, d = enc("AD")
    assert pseudo_rank(running, 6, d, a) == 1
    # outside the context block of A, or on a non-edge: no answer
    assert running.pseudo_rank(9, d, a) is None
    assert running.pseudo_rank(6, enc("F")[0], a) is None
    assert running.pseudo_rank(6, d, 99) is None


def test_pseudo_rank_full_domain(running):
    bwt = build_bwt(build_trajectory_string(RUNNING_TRAJECTORIES)).bwt
    g = running.graph
    for wp, w in zip(g.sources().tolist(), g.targets.tolist()):
        for j in range(g.c[wp], g.c[wp + 1] + 1):
            assert running.pseudo_rank(j, w, wp) == naive_rank(bwt, w, j)


@pytest.mark.parametrize("path", [[], [A, -1], [A, 6], ["x"], None])
def test_invalid_queries(running, running_base, path):
    for idx in (running, running_base):
        with pytest.raises(InvalidQueryError):
            idx.suffix_range(path)


def test_extract(running):
    # row 3 is the rotation starting right after FEBA
    assert running.sa[3] == 4
    assert dec(extract(running, 3, 4)) == "FEBA"
    assert running.extract_path(3, 4) == [A, B, E, F]
    assert running.extract(3, 0) == []
    assert dec(running.reconstruct()) == "FEBA$CBA$CB$DA$#"
    with pytest.raises(IndexError):
        running.extract(16, 2)
    with pytest.raises(ValueError):
        running.extract(0, -1)


def test_extract_path_stops_at_separator(running):
    # text position 8 holds the separator right after CBA
    j = int(np.flatnonzero(running.sa == 8)[0])
    assert running.extract_path(j, 10) == [A, B, C]


def test_text_start_row(running, running_base):
    for idx in (running, running_base):
        j = idx.locate_text_start()
        assert idx.sa[j] == 0


def test_stats(running):
    s = running.stats()
    assert s["n"] == 16
    assert s["sigma"] == 8
    assert s["sigma_label"] == 2
    assert s["delta"] == running.graph.delta == 2
    assert s["h0_bwt"] == pytest.approx(2.78, abs=0.01)
    assert s["h0_labeled"] == pytest.approx(0.7, abs=0.05)
    assert s["size_bits"] == s["wavelet_bits"] + s["graph_bits"]
    assert set(s["build_times"]) == {"trajectory_string", "suffix_sort", "et_graph",
                                     "labeling", "corrections", "wavelet_tree"}


def test_baseline_stats(running_base):
    s = running_base.stats()
    assert s["n"] == 16
    assert s["backend"] == "baseline"


@pytest.mark.parametrize("seed", range(6))
def test_search_and_extract_duality(seed):
    trajs, t = random_instance(seed, max_sigma=64, max_n=2500)
    idx = SntIndex.build(t, debug=True)
    rng = np.random.default_rng(seed)
    sym = t.symbols
    for _ in range(40):
        traj = trajs[int(rng.integers(0, len(trajs)))]
        lo = int(rng.integers(0, len(traj)))
        path = traj[lo : lo + int(rng.integers(1, 6))]
        r = idx.suffix_range(path)
        assert r is not None
        assert r.count == rotation_count(sym, [e + EDGE_BASE for e in reversed(path)])
        for j in r:
            # reading |P| symbols backwards from SA[j] + |P| yields the path again
            isa_row = int(np.flatnonzero(idx.sa == (idx.sa[j] + len(path)) % len(sym))[0])
            assert idx.extract_path(isa_row, len(path)) == list(path)


@pytest.mark.parametrize("strategy", ["bigram", "random", "mel"])
@pytest.mark.parametrize("kind", ["rrr", "plain"])
def test_strategies_and_backends_agree(strategy, kind):
    trajs, t = random_instance(21, max_sigma=100, max_n=3000)
    ref = BaselineFmIndex.build(t)
    idx = SntIndex.build(t, strategy, kind=kind, block_size=31)
    rng = np.random.default_rng(4)
    for _ in range(60):
        traj = trajs[int(rng.integers(0, len(trajs)))]
        lo = int(rng.integers(0, len(traj)))
        path = traj[lo : lo + int(rng.integers(1, 8))]
        assert idx.suffix_range(path) == ref.suffix_range(path)
    assert idx.reconstruct() == t.symbols.tolist()


def test_search_cost_is_bounded_by_path_length(running):
    with instrument.counting() as ops:
        running.suffix_range([A, B, E, F])
    assert ops.pseudo_ranks <= 2 * 4 - 2
    assert ops.bit_ranks <= ops.wt_ranks * running.wt.depth(2)


def test_expected_rank_cost(running):
    # average code length of the stored labels: both labels have 1-bit codes
    assert expected_rank_cost(running) == pytest.approx(1.0)


@pytest.mark.parametrize("builder", [SntIndex.build, BaselineFmIndex.build])
@pytest.mark.parametrize("debug", [False, True])
def test_serialization_round_trip(tmp_path, builder, debug):
    trajs, t = random_instance(5, max_sigma=80, max_n=2000)
    idx = builder(t, debug=debug)
    path = idx.save(tmp_path / "x.sntx")
    back = load_index(path)
    assert type(back) is type(idx)
    assert back.has_oracle == debug
    assert back.size_breakdown() == idx.size_breakdown()
    for traj in trajs[:30]:
        assert back.suffix_range(traj) == idx.suffix_range(traj)
    assert back.reconstruct() == t.symbols.tolist()


def test_strategy_survives_serialization():
    idx = SntIndex.build(RUNNING_TRAJECTORIES, "random")
    back = from_bytes(idx.to_bytes())
    assert back.strategy == idx.strategy


def test_corrupted_files_are_rejected(running):
    blob = bytearray(running.to_bytes())
    with pytest.raises(IndexFormatError, match="CRC"):
        flipped = bytearray(blob)
        flipped[20] ^= 1
        from_bytes(flipped)
    with pytest.raises(IndexFormatError, match="magic"):
        from_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(IndexFormatError):
        from_bytes(blob[:10])


def test_index_is_smaller_than_baseline_on_walk_data():
    g = gen_poisson_digraph(2 ** 10, 4, 3)
    walks = walks_for_text_length(g, 100_000, 20, 3)
    t = build_trajectory_string(walks, g.sigma)
    snt = SntIndex.build(t)
    base = BaselineFmIndex.build(t)
    assert snt.size_bits() < base.size_bits()
    assert snt.sigma_label <= snt.delta


@given(trajs=st.lists(st.lists(st.integers(0, 7), min_size=1, max_size=10), min_size=1, max_size=12),
       path=st.lists(st.integers(0, 7), min_size=1, max_size=4))
@settings(max_examples=80, deadline=None)
def test_counts_match_rotation_scan(trajs, path):
    t = build_trajectory_string(trajs, 8)
    idx = SntIndex.build(t)
    want = rotation_count(t.symbols, [e + EDGE_BASE for e in reversed(path)])
    assert idx.count(path) == want
    assert BaselineFmIndex.build(t).count(path) == want
