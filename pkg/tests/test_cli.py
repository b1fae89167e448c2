import csv
import io
import json

import pytest

from oracles import RUNNING_TRAJECTORIES
from trajfm.cli import EXIT_DATA, EXIT_NOT_FOUND, EXIT_OK, EXIT_USAGE, emit, main
from trajfm.text import read_trajectories, write_trajectories


@pytest.fixture
def running_file(tmp_path):
    return write_trajectories(tmp_path / "running.txt", RUNNING_TRAJECTORIES, header="running example")


@pytest.fixture
def running_index(tmp_path, running_file):
    out = tmp_path / "running.sntx"
    assert main(["build", "-i", str(running_file), "-o", str(out), "--debug-oracle"]) == EXIT_OK
    return out


def run_json(capsys, argv):
    capsys.readouterr()
    code = main(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_build_reports_stats(capsys, running_file, tmp_path):
    code, stats = run_json(capsys, ["build", "-i", str(running_file), "-o", str(tmp_path / "x.sntx")])
    assert code == EXIT_OK
    assert stats["n"] == 16
    assert stats["sigma_label"] == 2
    assert stats["h0_bwt"] == pytest.approx(2.8, abs=0.05)
    assert stats["h0_labeled"] == pytest.approx(0.7, abs=0.05)


def test_query_found_and_not_found(capsys, running_index):
    code, res = run_json(capsys, ["query", str(running_index), "0", "1"])
    assert code == EXIT_OK
    assert (res["sp"], res["ep"], res["count"]) == (9, 11, 2)
    code, res = run_json(capsys, ["query", str(running_index), "1", "0"])
    assert code == EXIT_NOT_FOUND
    assert res["count"] == 0


@pytest.mark.parametrize("path", [["0", "x"], ["99"], []])
def test_query_usage_errors(capsys, running_index, path):
    assert main(["query", str(running_index)] + path) == EXIT_USAGE
    assert "trajfm query:" in capsys.readouterr().err


def test_batch_queries(capsys, tmp_path, running_index):
    batch = tmp_path / "q.txt"
    batch.write_text("# queries\n0 1\n1 0\n\n2\n")
    code, summary = run_json(capsys, ["query", str(running_index), "--batch", str(batch)])
    assert code == EXIT_OK
    assert summary["queries"] == 3 and summary["found"] == 2
    capsys.readouterr()
    main(["query", str(running_index), "--batch", str(batch), "--per-query", "--format", "csv"])
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["count"] for r in rows] == ["2", "0", "2"]
    assert [r["query"] for r in rows] == ["2", "3", "5"]


def test_batch_with_bad_line(tmp_path, running_index):
    batch = tmp_path / "q.txt"
    batch.write_text("0 1\n0 z\n")
    assert main(["query", str(running_index), "--batch", str(batch)]) == EXIT_DATA


def test_extract_modes(capsys, running_index):
    capsys.readouterr()
    assert main(["extract", str(running_index), "-j", "3", "-l", "4"]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["5", "4", "1", "0"]
    assert main(["extract", str(running_index), "-j", "3", "-l", "4", "--mode", "path"]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["0", "1", "4", "5"]
    assert main(["extract", str(running_index), "-j", "16", "-l", "1"]) == EXIT_USAGE
    assert main(["extract", str(running_index)]) == EXIT_USAGE


def test_full_extraction_prints_the_text(capsys, running_index):
    capsys.readouterr()
    main(["extract", str(running_index), "--full"])
    assert capsys.readouterr().out.strip() == "5 4 1 0 $ 2 1 0 $ 2 1 $ 3 0 $ #"


def test_stats_includes_breakdown(capsys, running_index):
    code, stats = run_json(capsys, ["stats", str(running_index)])
    assert code == EXIT_OK
    assert sum(stats["size_breakdown"].values()) == stats["size_bits"]


def test_corrupted_index_is_a_data_error(capsys, tmp_path, running_index):
    blob = bytearray(running_index.read_bytes())
    blob[30] ^= 0xFF
    bad = tmp_path / "bad.sntx"
    bad.write_bytes(bytes(blob))
    assert main(["stats", str(bad)]) == EXIT_DATA
    assert "CRC" in capsys.readouterr().err
    assert main(["stats", str(tmp_path / "missing.sntx")]) == EXIT_DATA


def test_malformed_input_reports_line(capsys, tmp_path):
    src = tmp_path / "bad.txt"
    src.write_text("1 2\n\n3\n")
    assert main(["build", "-i", str(src)]) == EXIT_DATA
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("backend,strategy", [("baseline", "bigram"), ("snt", "mel"), ("snt", "random")])
def test_build_variants_answer_alike(capsys, tmp_path, running_file, backend, strategy):
    out = tmp_path / f"{backend}-{strategy}.sntx"
    main(["build", "-i", str(running_file), "-o", str(out), "--backend", backend,
          "--strategy", strategy, "--block-size", "15", "--bitvector", "plain"])
    code, res = run_json(capsys, ["query", str(out), "0", "1"])
    assert code == EXIT_OK and res["count"] == 2


def test_generate(capsys, tmp_path):
    out = tmp_path / "walks.txt"
    code, info = run_json(capsys, ["generate", "-o", str(out), "--sigma", "64", "--d-bar", "3",
                                   "--num-walks", "40", "--length", "2:9", "--seed", "5"])
    assert code == EXIT_OK
    walks = read_trajectories(out)
    assert len(walks) == info["walks"] == 40
    assert all(2 <= len(w) <= 9 for w in walks)
    assert out.read_text().startswith("# sigma=64")


def test_generate_grid_and_text_length(capsys, tmp_path):
    out = tmp_path / "grid.txt"
    code, info = run_json(capsys, ["generate", "-o", str(out), "--grid", "4x4", "--text-length", "5000"])
    assert code == EXIT_OK
    assert abs(info["symbols"] - 5000) <= 21
    assert main(["generate", "-o", str(out), "--sigma", "1"]) == EXIT_USAGE


def test_bench_writes_csv(capsys, tmp_path):
    report = tmp_path / "bench.csv"
    capsys.readouterr()
    code = main(["bench", "--sigmas", "64,128", "--text-length", "3000", "--queries", "20",
                 "--query-length", "5", "--strategies", "bigram,random", "--output", str(report)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 * 3
    assert {r["backend"] for r in rows} == {"snt", "baseline"}
    assert report.read_text().splitlines()[0].startswith("sigma,")


def test_emit_human_and_nested():
    buf = io.StringIO()
    emit({"a": 1.5, "b": {"c": None, "d": [1, 2]}}, "human", buf)
    assert buf.getvalue().splitlines() == ["a    1.5", "b.c  ", "b.d  1 2"]


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == EXIT_USAGE
