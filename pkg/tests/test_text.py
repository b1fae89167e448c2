import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import RUNNING_TRAJECTORIES, dec, naive_sa
from trajfm.errors import InputFormatError
from trajfm.text import (
    build_bwt,
    build_trajectory_string,
    c_array,
    h0,
    hk,
    inverse_bwt,
    parse_trajectories,
    read_trajectories,
    suffix_array,
    symbol_name,
    write_trajectories,
)

trajectory_lists = st.lists(st.lists(st.integers(0, 9), min_size=1, max_size=12), min_size=1, max_size=15)


@pytest.fixture
def running():
    return build_trajectory_string(RUNNING_TRAJECTORIES)


def test_running_example_string(running):
    assert dec(running.symbols) == "FEBA$CBA$CB$DA$#"
    assert running.sigma == 8
    assert running.num_trajectories == 4
    assert running.num_edges == 6


def test_running_example_bwt(running):
    bwt = build_bwt(running)
    assert dec(bwt.bwt) == "$AAABDBBCCE$$$F#"
    assert bwt.c.tolist() == [0, 1, 5, 8, 11, 13, 14, 15, 16]
    assert bwt.sa.tolist() == [15, 14, 8, 4, 11, 13, 7, 3, 10, 6, 2, 9, 5, 12, 1, 0]
    assert dec(bwt.contexts()) == "#$$$$AAABBBCCDEF"


def test_running_example_entropies(running):
    bwt = build_bwt(running)
    assert h0(bwt.bwt) == pytest.approx(2.78, abs=0.01)
    assert h0(bwt.bwt) == pytest.approx(h0(running.symbols))
    assert hk(running, 1) == pytest.approx(0.547, abs=0.001)


def test_rotation_with_suffix_feba(running):
    # sorted rotation 3 starts at text position 4, just after the reversed first trajectory
    bwt = build_bwt(running)
    assert bwt.sa[3] == 4
    assert dec(running.symbols[:4]) == "FEBA"


@given(trajs=trajectory_lists)
@settings(max_examples=80, deadline=None)
def test_suffix_array_matches_sorted_rotations(trajs):
    t = build_trajectory_string(trajs)
    assert suffix_array(t.symbols).tolist() == naive_sa(t.symbols.tolist())


@given(trajs=trajectory_lists)
@settings(max_examples=80, deadline=None)
def test_bwt_inverts_and_trajectories_round_trip(trajs):
    t = build_trajectory_string(trajs)
    bwt = build_bwt(t)
    assert inverse_bwt(bwt.bwt, bwt.c).tolist() == t.symbols.tolist()
    assert t.trajectories() == trajs
    assert sorted(bwt.bwt.tolist()) == sorted(t.symbols.tolist())


@given(seq=st.lists(st.integers(0, 5), min_size=2, max_size=200), k=st.integers(0, 3))
def test_higher_order_entropy_never_exceeds_lower(seq, k):
    if k + 1 >= len(seq):
        return
    assert hk(seq, k + 1) <= hk(seq, k) + 1e-9
    assert 0 <= hk(seq, k) <= math.log2(len(set(seq))) + 1e-9


def test_entropy_edge_cases():
    assert h0([3, 3, 3]) == 0.0
    assert h0([0, 1]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        h0([])
    with pytest.raises(ValueError):
        hk([1, 2, 0], 3)


def test_c_array():
    assert c_array([2, 0, 2, 1], 4).tolist() == [0, 1, 2, 4, 4]
    with pytest.raises(ValueError):
        c_array([5], 3)


def test_build_rejects_bad_input():
    with pytest.raises(ValueError):
        build_trajectory_string([])
    with pytest.raises(ValueError):
        build_trajectory_string([[1], []])
    with pytest.raises(ValueError):
        build_trajectory_string([[-1]])
    with pytest.raises(ValueError):
        build_trajectory_string([[5]], num_edges=5)
    with pytest.raises(ValueError):
        build_bwt(np.array([2, 3, 1]))


def test_fixed_alphabet():
    t = build_trajectory_string([[0, 1]], num_edges=10)
    assert t.sigma == 12


def test_symbol_names():
    assert symbol_name(0) == "#"
    assert symbol_name(1) == "$"
    assert symbol_name(2) == "0"
    assert symbol_name(3, "AB") == "B"


def test_parse_trajectories():
    lines = ["# header\n", "1 2 3\n", "  4\n"]
    assert parse_trajectories(lines) == [[1, 2, 3], [4]]


@pytest.mark.parametrize("lines,lineno", [
    (["1 2\n", "\n"], 2),
    (["1 x\n"], 1),
    (["# only\n", "3 -1\n"], 2),
])
def test_parse_errors_carry_line_numbers(lines, lineno):
    with pytest.raises(InputFormatError) as err:
        parse_trajectories(lines)
    assert err.value.lineno == lineno
    assert f"line {lineno}" in str(err.value)


def test_parse_checks_connectivity():
    road = {1: {2}, 2: {3}}
    assert parse_trajectories(["1 2 3\n"], road) == [[1, 2, 3]]
    with pytest.raises(InputFormatError):
        parse_trajectories(["1 3\n"], road)


def test_empty_file_is_an_error():
    with pytest.raises(InputFormatError):
        parse_trajectories(["# nothing\n"])


def test_file_round_trip(tmp_path):
    path = write_trajectories(tmp_path / "t.txt", RUNNING_TRAJECTORIES, header="running example")
    assert path.read_text().startswith("# running example\n")
    assert read_trajectories(path) == RUNNING_TRAJECTORIES
