import io
import json
import math

import pytest

from zfising.cli import EXIT_IO, EXIT_OK, EXIT_TOPOLOGY, EXIT_USAGE, run_cli


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def edge_file(tmp_path):
    p = tmp_path / "edge.json"
    p.write_text('{"num_vertices": 2, "edges": [{"u": 0, "v": 1, "j": 0.5}]}')
    return str(p)


def test_infer_single_edge(edge_file):
    code, out, _ = _run("infer", "--model", edge_file)
    assert code == EXIT_OK
    header, row = out.strip().split("\n")
    assert header.split("\t")[:2] == ["log_z", "wall_time_ms"]
    assert row.split("\t")[0] == "1.50640886808"
    assert math.isclose(float(row.split("\t")[0]), math.log(4 * math.cosh(0.5)), rel_tol=1e-11)


def test_infer_json(edge_file):
    code, out, _ = _run("infer", "--model", edge_file, "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["log_z"] == pytest.approx(math.log(4 * math.cosh(0.5)), rel=1e-13)
    assert rep["component_stats"]["blocks"] == 1


def test_sample_is_seed_deterministic(tmp_path):
    path = tmp_path / "k.json"
    assert _run("gen", "--kind", "k33free", "--size", "14", "--seed", "4", "--output", str(path))[0] == 0
    a = _run("sample", "--model", str(path), "--num-samples", "50", "--seed", "9")
    b = _run("sample", "--model", str(path), "--num-samples", "50", "--seed", "9")
    c = _run("sample", "--model", str(path), "--num-samples", "50", "--seed", "10")
    assert a == b and a[1] != c[1]
    rows = a[1].strip().split("\n")
    assert len(rows) == 50 and all(set(r.split()) <= {"1", "-1"} and len(r.split()) == 14 for r in rows)


def test_gen_output_parses_back():
    for kind, size, n in [("planar", 9, 9), ("k33free", 12, 12), ("necklace", 2, 10)]:
        code, out, _ = _run("gen", "--kind", kind, "--size", str(size), "--seed", "1")
        assert code == EXIT_OK and json.loads(out)["num_vertices"] == n


def test_exit_codes(tmp_path, edge_file):
    assert _run("infer")[0] == EXIT_USAGE
    assert _run("frobnicate")[0] == EXIT_USAGE
    assert _run("sample", "--model", edge_file, "--num-samples", "-1")[0] == EXIT_USAGE
    assert _run("kltest", "--size", "30")[0] == EXIT_USAGE
    assert _run("gen", "--kind", "planar", "--size", "2")[0] == EXIT_USAGE
    assert _run("infer", "--model", str(tmp_path / "missing.json"))[0] == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text('{"num_vertices": 2, "edges": [{"u": 0, "v": 0, "j": 1}]}')
    code, _, err = _run("infer", "--model", str(bad))
    assert code == EXIT_IO and "SelfLoop" in err
    k33 = tmp_path / "k33.json"
    k33.write_text(json.dumps({"num_vertices": 6, "edges": [
        {"u": a, "v": b, "j": 0.1} for a in range(3) for b in range(3, 6)]}))
    code, _, err = _run("infer", "--model", str(k33))
    assert code == EXIT_TOPOLOGY and "unsupported" in err


def test_help_lists_exit_codes(capsys):
    with pytest.raises(SystemExit) as info:
        run_cli(["--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    assert "exit codes" in text and "unsupported topology" in text


def test_bench_small_sizes():
    code, out, _ = _run("bench", "--sizes", "64,128", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK and [r["N"] for r in rep["rows"]] == [64, 128]
    assert all(r["infer_ms"] > 0 and r["sample_ms"] > 0 for r in rep["rows"])


def test_kltest_rows():
    code, out, _ = _run("kltest", "--size", "8", "--sample-counts", "100,1000")
    lines = out.strip().split("\n")
    assert code == EXIT_OK and lines[0] == "m\tkl" and len(lines) == 3
    assert float(lines[2].split("\t")[1]) < float(lines[1].split("\t")[1])


def test_selftest_passes():
    code, out, _ = _run("selftest", "--format", "json")
    assert code == EXIT_OK
    assert all(r["status"] == "PASS" for r in json.loads(out))
