import json

import pytest

from broyden_lab.cli import main
from broyden_lab.traceio import read_trace


def test_newton_linear(tmp_path, capsys):
    assert main(["solve", "--problem", "linear", "--n", "10", "--seed", "1", "--method", "newton",
                 "--out", str(tmp_path)]) == 0
    assert "converged" in capsys.readouterr().out


def test_hequation_desk_scale(tmp_path):
    code = main(["solve", "--problem", "hequation", "--n", "100", "--c-const", "0.9", "--method", "greedy",
                 "--init", "exact-j0", "--x0", "near-solution", "--rho", "0.1", "--out", str(tmp_path)])
    assert code == 0
    records, meta = read_trace(tmp_path / "hequation_greedy.csv")
    assert records[-1].res_norm <= 1e-12
    assert meta["x0"]["distribution"] == "near-solution"


def test_unknown_method(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--method", "foo"])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_max_iters_exit(tmp_path):
    assert main(["solve", "--problem", "logsumexp", "--n", "30", "--init", "scaled-identity",
                 "--method", "classical", "--max-iters", "5", "--out", str(tmp_path)]) == 2


def test_degenerate_exit(tmp_path):
    assert main(["solve", "--problem", "linear", "--n", "4", "--method", "greedy", "--init", "scaled-j0",
                 "--scale", "1e-300", "--out", str(tmp_path)]) == 3


def test_bad_value_is_usage_error(tmp_path, capsys):
    assert main(["solve", "--problem", "hequation", "--c-const", "1.5", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def _write(path, spec):
    path.write_text(json.dumps(spec))
    return str(path)


def test_bench_and_empty(tmp_path, capsys):
    spec = {"schema_version": 1, "problem": {"kind": "logsumexp", "n": 12, "m": 20, "seed": 0},
            "methods": ["greedy", "classical"], "inits": [{"scheme": "exact-j0"}]}
    assert main(["bench", _write(tmp_path / "s.json", spec), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "summary.json").exists()
    assert main(["bench", _write(tmp_path / "e.json", dict(spec, methods=[]))]) == 1
    bad = {k: v for k, v in spec.items() if k != "schema_version"}
    assert main(["bench", _write(tmp_path / "b.json", bad)]) == 1
    assert "schema_version" in capsys.readouterr().err


def test_bench_all_cells_fail(tmp_path):
    spec = {"schema_version": 1, "problem": {"kind": "linear", "n": 3},
            "methods": ["greedy"], "inits": [{"scheme": "scaled-identity", "scale": 0}]}
    assert main(["bench", _write(tmp_path / "s.json", spec), "--out", str(tmp_path / "o")]) == 3


def test_rates(tmp_path, capsys):
    assert main(["rates", "--n", "2", "--k-max", "30"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,k,original_bound,greedy_bound,greedy_faster"
    assert lines[1].startswith("2,1,2,") and lines[1].endswith("false")
    assert lines[29].endswith("true")
    assert main(["rates", "--n", "1"]) == 1


def test_verify_lines_and_determinism(capsys):
    main(["verify", "bounds"])
    first = capsys.readouterr().out
    main(["verify", "bounds"])
    assert capsys.readouterr().out == first
    assert "crossover table: PASS" in first


def test_verify_lemmas_lists_contraction(capsys):
    main(["verify", "lemmas"])
    assert "greedy contraction: PASS" in capsys.readouterr().out
