import json

import jsonschema
import pytest

from broyden_lab.experiments import (
    ExperimentSpec,
    default_scale,
    load_schema,
    make_x0,
    run_bench,
    sigma_decay_slope,
    thread_cap,
)
from broyden_lab.problems import HEquationProblem, gen_linear, gen_logsumexp
from broyden_lab.solver import InitScheme, IterationRecord

SPEC = {
    "schema_version": 1,
    "problem": {"kind": "hequation", "n": 20, "c": 0.9, "seed": 1},
    "methods": ["greedy", "random", "classical"],
    "inits": [{"scheme": "exact-j0"}, {"scheme": "scaled-identity", "scale": "auto"}],
    "x0": {"distribution": "normal"},
    "solver": {"max_iters": 60},
}


class TestStarts:
    def test_sphere(self):
        x = make_x0(gen_linear(5, 0), "sphere", 3)
        assert abs((x @ x) - 1) < 1e-12

    def test_near_solution(self):
        p = HEquationProblem(10, 0.5)
        x = make_x0(p, "near-solution", 3, rho=0.1)
        assert abs(float(((x - p.x_star) ** 2).sum() ** 0.5) - 0.1 * float((p.x_star**2).sum() ** 0.5)) < 1e-12

    def test_near_zero_solution(self):
        p = gen_logsumexp(4, 6, 0)
        assert abs(float((make_x0(p, "near-solution", 0, 0.2) ** 2).sum()) - 0.04) < 1e-12

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_x0(gen_linear(3, 0), "uniform")

    def test_default_scales(self):
        lse = gen_logsumexp(4, 6, 0)
        assert default_scale(lse, InitScheme.SCALED_IDENTITY) == lse.smoothness()
        assert default_scale(HEquationProblem(4, 0.5), InitScheme.SCALED_IDENTITY) == 10.0
        assert default_scale(lse, InitScheme.SCALED_J0) == 1.0


class TestBench:
    def test_summary_valid_and_files(self, tmp_path):
        s = run_bench(ExperimentSpec.from_dict(SPEC), out_dir=tmp_path)
        jsonschema.validate(json.loads((tmp_path / "summary.json").read_text()), load_schema("summary"))
        assert len(s["cells"]) == 6
        for c in s["cells"]:
            assert (tmp_path / c["trace"]).exists()
        assert set(s["sigma_decay_slopes"]) == {"greedy", "random", "classical"}
        assert s["failed_cells"] == 0

    def test_deterministic_across_threads(self, tmp_path):
        spec = ExperimentSpec.from_dict(SPEC)
        run_bench(spec, out_dir=tmp_path / "a", threads=4)
        run_bench(spec, out_dir=tmp_path / "b", threads=1)
        for f in sorted((tmp_path / "a").glob("*__*")):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_cell_failure_recorded(self, tmp_path):
        spec = dict(SPEC, inits=[{"scheme": "scaled-identity", "scale": 0}])
        s = run_bench(ExperimentSpec.from_dict(spec), out_dir=tmp_path)
        assert s["failed_cells"] == 3 and all(c["error"] for c in s["cells"])

    def test_schema_version_required(self):
        bad = {k: v for k, v in SPEC.items() if k != "schema_version"}
        with pytest.raises(jsonschema.ValidationError):
            ExperimentSpec.from_dict(bad)

    def test_empty_methods(self, tmp_path):
        with pytest.raises(ValueError):
            run_bench(ExperimentSpec.from_dict(dict(SPEC, methods=[])), out_dir=tmp_path)

    def test_thread_cap(self):
        assert thread_cap({"BROYDEN_LAB_THREADS": "3"}) == 3
        with pytest.raises(ValueError):
            thread_cap({"BROYDEN_LAB_THREADS": "0"})


def test_slope():
    recs = [IterationRecord(k=k, res_norm=1.0, sigma_rel=10.0 ** (-0.5 * k)) for k in range(6)]
    assert abs(sigma_decay_slope(recs) + 0.5) < 1e-12
    assert sigma_decay_slope(recs[:1]) is None
