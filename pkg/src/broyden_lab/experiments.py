"""Starting points, benchmark sweeps and their JSON summaries."""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .broyden import DirectionKind, DirectionRule
from .problems import make_problem
from .rng import RNG_IDENTITY, STREAM_X0, make_rng
from .solver import InitScheme, Method, SolverConfig, Status, solve
from .traceio import atomic_write, trace_to_csv

SCHEMA_VERSION = 1
THREADS_ENV = "BROYDEN_LAB_THREADS"
HEQ_BAD_SCALE = 10.0


def load_schema(name):
    text = resources.files("broyden_lab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


# --------------------------------------------------------------------------
# starting points and scales
# --------------------------------------------------------------------------

def make_x0(p, distribution="sphere", seed=0, rho=0.1, key=0):
    """Draw ``x0`` from the x0 stream of ``seed``.

    ``near-solution`` places ``x0`` at ``x* + rho |x*| eps`` with ``eps``
    uniform on the sphere; when ``x* = 0`` the offset is ``rho eps``.
    """
    rng = make_rng(seed, STREAM_X0, key)
    g = rng.standard_normal(p.n)
    if distribution == "normal":
        return g
    eps = g / np.linalg.norm(g)
    if distribution == "sphere":
        return eps
    if distribution == "near-solution":
        if p.x_star is None:
            raise ValueError("near-solution start needs a known solution")
        size = float(np.linalg.norm(p.x_star)) or 1.0
        return p.x_star + rho * size * eps
    raise ValueError(f"unknown x0 distribution {distribution!r}")


def default_scale(p, init):
    """Scale for ``init`` when none is given: ``L`` for a log-sum-exp identity
    start, 10 for an H-equation identity start, 1 otherwise."""
    if init is InitScheme.SCALED_IDENTITY:
        if p.kind == "logsumexp":
            return p.smoothness()
        if p.kind == "hequation":
            return HEQ_BAD_SCALE
    return 1.0


def direction_rule(name, seed=0):
    return DirectionRule(DirectionKind(name), seed)


def make_config(method, init=InitScheme.EXACT_J0, scale=1.0, tol=1e-12, max_iters=500, seed=0,
                direction="basis", record_sigma=False, fd_jacobian=False, debug=False):
    method = Method(method)
    rule = direction_rule(direction) if method is Method.RANDOM else DirectionRule()
    return SolverConfig(method=method, direction=rule, init=InitScheme(init), scale=float(scale),
                        tol_residual=tol, max_iters=max_iters, seed=seed, record_sigma=record_sigma,
                        fd_jacobian=fd_jacobian, debug=debug)


def sigma_decay_slope(records):
    """Least-squares slope of ``log10(sigma_rel)`` against ``k``."""
    pts = [(r.k, math.log10(r.sigma_rel)) for r in records
           if r.sigma_rel is not None and r.sigma_rel > 0 and math.isfinite(r.sigma_rel)]
    if len(pts) < 2:
        return None
    k, s = np.array(pts).T
    return float(np.polyfit(k, s, 1)[0])


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    problem: dict
    methods: list
    inits: list
    x0: dict = field(default_factory=lambda: {"distribution": "sphere"})
    shared_x0: bool = True
    solver: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    output_dir: str = "bench_out"

    @classmethod
    def from_dict(cls, d):
        jsonschema.validate(d, load_schema("experiment"))
        d = {k: v for k, v in d.items() if k != "schema_version"}
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def thread_cap(env=None):
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return cap


def _cell_config(spec, method, init, scale):
    opts = {"tol": 1e-12, "max_iters": 500, "seed": 0, "direction": "basis", "record_sigma": True}
    opts.update(spec.solver)
    opts.update(spec.overrides.get(method, {}))
    return make_config(method, init, scale, **opts)


def _run_cell(p, spec, method, init_spec, x0, out_dir):
    init = InitScheme(init_spec["scheme"])
    scale = init_spec.get("scale", "auto")
    cell = {"method": method, "init": init.value, "scale": None, "status": "failed",
            "iterations": None, "final_residual": None, "iterations_to_tol": None,
            "final_sigma_rel": None, "sigma_decay_slope": None, "trace": None, "error": None}
    try:
        if scale == "auto":
            scale = default_scale(p, init)
        cell["scale"] = float(scale)
        cfg = _cell_config(spec, method, init, scale)
        trace = solve(p, x0, cfg)
    except (ValueError, ArithmeticError) as exc:
        cell["error"] = f"{type(exc).__name__}: {exc}"
        return cell
    name = f"{method}__{init.value}.csv"
    meta = {k: v for k, v in trace.metadata.items() if k != "wall_time_s"}
    atomic_write(out_dir / name, trace_to_csv(trace.records))
    atomic_write(out_dir / f"{method}__{init.value}.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    last = trace.records[-1] if trace.records else None
    cell.update(
        status=trace.status.value,
        iterations=trace.iterations,
        final_residual=last.res_norm if last else None,
        iterations_to_tol=trace.iterations if trace.status is Status.CONVERGED else None,
        final_sigma_rel=last.sigma_rel if last else None,
        sigma_decay_slope=sigma_decay_slope(trace.records),
        wall_time_s=trace.metadata["wall_time_s"],
        trace=name,
        error=trace.message or None,
    )
    for key in ("final_residual", "final_sigma_rel"):
        if cell[key] is not None and not math.isfinite(cell[key]):
            cell[key] = None
    return cell


FAILED = {"failed", Status.DEGENERATE.value, Status.DOMAIN_ERROR.value}


def run_bench(spec, out_dir=None, threads=None):
    """Run every (method, init) cell of ``spec`` and return the summary dict.

    Traces go to ``out_dir`` (one CSV and one metadata JSON per cell) and the
    summary to ``out_dir/summary.json``. The problem instance is always
    shared; ``x0`` is shared when ``spec.shared_x0`` is set, otherwise each
    method gets its own x0 stream.
    """
    if not spec.methods:
        raise ValueError("experiment has no methods")
    out_dir = Path(out_dir or spec.output_dir)
    pd = spec.problem
    p = make_problem(pd["kind"], pd["n"], seed=pd.get("seed", 0), m=pd.get("m"),
                     gamma=pd.get("gamma", 1.0), c=pd.get("c", 0.9))
    x0_opts = {"distribution": "sphere", "rho": 0.1, "seed": pd.get("seed", 0), **spec.x0}
    starts = {}
    for i, method in enumerate(spec.methods):
        key = 0 if spec.shared_x0 else i + 1
        starts[method] = make_x0(p, x0_opts["distribution"], x0_opts["seed"], x0_opts["rho"], key)

    jobs = [(m, init) for m in spec.methods for init in spec.inits]
    workers = max(1, min(len(jobs), threads or thread_cap()))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        cells = list(pool.map(lambda job: _run_cell(p, spec, job[0], job[1], starts[job[0]], out_dir), jobs))

    slopes = {}
    for m in spec.methods:
        vals = [c["sigma_decay_slope"] for c in cells if c["method"] == m and c["sigma_decay_slope"] is not None]
        slopes[m] = float(np.mean(vals)) if vals else None
    summary = {
        "schema_version": SCHEMA_VERSION,
        "problem": p.descriptor(),
        "x0": {**x0_opts, "shared": spec.shared_x0},
        "rng": RNG_IDENTITY,
        "cells": cells,
        "sigma_decay_slopes": slopes,
        "failed_cells": sum(c["status"] in FAILED for c in cells),
    }
    jsonschema.validate(summary, load_schema("summary"))
    atomic_write(out_dir / "summary.json", json.dumps(summary, indent=2, allow_nan=False) + "\n")
    return summary
