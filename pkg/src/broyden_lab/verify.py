"""Deterministic property suites behind ``broyden-lab verify``.

Each check returns a :class:`Check`; the sizes default to values that keep
``verify all`` to a few seconds and can be raised by callers. All random
draws come from fixed internal seeds, so output is identical across runs.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import theory
from .broyden import basis_vector, broyd_matrix, greedy_direction
from .densealg import LUFactor, frobenius_norm
from .experiments import make_config, make_x0
from .problems import (
    HEquationProblem,
    LinearProblem,
    estimate_constants,
    finite_diff_jacobian,
    gen_linear,
    gen_logsumexp,
    jacobian_error,
    sample_ball,
)
from .rng import STREAM_SAMPLING, make_rng
from .solver import InitScheme, Status, solve

SUITE_SEED = 20240601


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    advisory: bool = False

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        note = "; advisory, estimated constants" if self.advisory else ""
        return f"{self.name}: {tag} ({self.detail}{note})"


def _rng(*key):
    return make_rng(SUITE_SEED, STREAM_SAMPLING, *key)


def _spec(m):
    return float(np.linalg.norm(m, 2))


# --------------------------------------------------------------------------
# update lemmas
# --------------------------------------------------------------------------

def check_greedy_contraction(instances=200, dims=(2, 5, 20), rtol=1e-12):
    """Greedy basis update contracts ``|B - A|_F^2`` by at least ``1 - 1/n``."""
    rng = _rng(1)
    worst = math.inf
    ok = True
    for t in range(instances):
        n = dims[t % len(dims)]
        A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        i = greedy_direction(B, A)
        after = frobenius_norm(broyd_matrix(B, A, basis_vector(n, i)) - A) ** 2
        bound = (1.0 - 1.0 / n) * frobenius_norm(B - A) ** 2
        ok &= after <= bound * (1.0 + rtol)
        worst = min(worst, (bound - after) / bound)
    return Check("greedy contraction", ok, f"{instances} instances, min relative slack {worst:.3e}")


def check_random_expectation(instances=100, rtol=1e-10):
    """Mean over all ``n`` basis updates equals ``(1 - 1/n) |B - A|_F^2``."""
    rng = _rng(2)
    worst = 0.0
    for t in range(instances):
        n = int(rng.integers(2, 21))
        A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        mean = np.mean([frobenius_norm(broyd_matrix(B, A, basis_vector(n, i)) - A) ** 2 for i in range(n)])
        target = (1.0 - 1.0 / n) * frobenius_norm(B - A) ** 2
        worst = max(worst, abs(mean - target) / target)
    return Check("random contraction, exact expectation", worst <= rtol,
                 f"{instances} instances, max relative error {worst:.3e}")


def check_random_monte_carlo(draws=10_000, n=5, kind="basis", z=4.0):
    """Sample mean of the contracted error lies within ``z`` standard errors."""
    rng = _rng(3, 0 if kind == "basis" else 1)
    A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    D = B - A
    vals = np.empty(draws)
    for t in range(draws):
        if kind == "basis":
            u = basis_vector(n, int(rng.integers(n)))
        else:
            u = rng.standard_normal(n)
        vals[t] = frobenius_norm(broyd_matrix(B, A, u) - A) ** 2
    target = (1.0 - 1.0 / n) * frobenius_norm(D) ** 2
    se = vals.std(ddof=1) / math.sqrt(draws)
    dev = abs(vals.mean() - target) / se
    return Check(f"random contraction, Monte Carlo ({kind})", dev <= z,
                 f"{draws} draws, deviation {dev:.2f} standard errors")


def check_monotonicity(tuples=1000, slack=1e-12, gram_tol=1e-10):
    """Projected errors ``C (B+ - A)`` never grow and obey the Gram identity."""
    rng = _rng(4)
    ok_f = ok_s = True
    worst_f = worst_s = math.inf
    gram_err = 0.0
    for _ in range(tuples):
        n = int(rng.integers(2, 11))
        A, B, C = (rng.standard_normal((n, n)) for _ in range(3))
        u = rng.standard_normal(n)
        before = C @ (B - A)
        after = C @ (broyd_matrix(B, A, u) - A)
        fb, fa = frobenius_norm(before), frobenius_norm(after)
        sb, sa = _spec(before), _spec(after)
        ok_f &= fa <= fb + slack * max(1.0, fb)
        ok_s &= sa <= sb + slack * max(1.0, sb)
        worst_f, worst_s = min(worst_f, fb - fa), min(worst_s, sb - sa)
        Bu = before @ u
        rhs = before @ before.T - np.outer(Bu, Bu) / (u @ u)
        gram_err = max(gram_err, float(np.max(np.abs(after @ after.T - rhs))))
    return [
        Check("monotone projected error, Frobenius", ok_f, f"{tuples} tuples, min decrease {worst_f:.3e}"),
        Check("monotone projected error, spectral", ok_s, f"{tuples} tuples, min decrease {worst_s:.3e}"),
        Check("Gram identity of the update", gram_err <= gram_tol, f"max entry error {gram_err:.3e}"),
    ]


def check_neumann(instances=200, slack=1e-10):
    """``|(I - E)^-1|`` and ``|(I - E)^-1 - I|`` stay below the series bounds."""
    rng = _rng(5)
    worst = math.inf
    for _ in range(instances):
        n = int(rng.integers(2, 9))
        E = rng.standard_normal((n, n))
        E *= rng.uniform(0.0, 0.9) / _spec(E)
        e = _spec(E)
        inv_bound, dev_bound = theory.neumann_inverse_bound(e)
        inv = LUFactor(np.eye(n) - E).inverse()
        worst = min(worst, inv_bound - _spec(inv), dev_bound - _spec(inv - np.eye(n)))
    return Check("Neumann inverse bound", worst >= -slack, f"{instances} matrices, min slack {worst:.3e}")


def run_inverse_tracking(p, x0, cfg):
    """Solve while recording ``|B H - I|_F / max(1, |B|_F)`` at every iterate."""
    drift = []

    def watch(_, state):
        if state.pair is not None and state.pair.B is not None:
            drift.append(state.pair.inverse_residual() / max(1.0, frobenius_norm(state.pair.B)))

    trace = solve(p, x0, cfg, observer=watch)
    return trace, drift


def inverse_maintenance_runs(dim=50):
    """Debug-mode runs of every Broyden variant, good and bad initialisation."""
    lse = gen_logsumexp(dim, 2 * dim, seed=3)
    heq = HEquationProblem(dim, 0.9)
    cases = [
        (lse, make_x0(lse, "sphere", 3), InitScheme.EXACT_J0, 1.0),
        (lse, make_x0(lse, "sphere", 3), InitScheme.SCALED_IDENTITY, lse.smoothness()),
        (heq, make_x0(heq, "near-solution", 3, 0.1), InitScheme.EXACT_J0, 1.0),
        (heq, make_x0(heq, "normal", 3), InitScheme.SCALED_IDENTITY, 10.0),
    ]
    for p, x0, init, scale in cases:
        for method in ("classical", "bad", "greedy", "random"):
            cfg = make_config(method, init, scale, max_iters=200, seed=3, debug=True)
            trace, drift = run_inverse_tracking(p, x0, cfg)
            yield f"{p.kind}/{init.value}/{method}", trace, drift


def check_inverse_maintenance(dim=50, rtol=1e-8):
    worst, converged, skipped = 0.0, 0, 0
    for _, trace, drift in inverse_maintenance_runs(dim):
        if trace.status is not Status.CONVERGED:
            skipped += 1
            continue
        converged += 1
        worst = max(worst, max(drift, default=0.0))
    return Check("inverse maintenance", worst <= rtol and converged > 0,
                 f"{converged} converged runs ({skipped} unconverged excluded), max |BH - I|_F/max(1,|B|_F) {worst:.3e}")


def check_taylor(samples=200, safety=theory.M_SAFETY):
    """``|F(x) - J(x*)(x - x*)| <= (safety M_hat / 2) |x - x*|^2`` on sampled points."""
    problems = [HEquationProblem(20, 0.5), gen_logsumexp(10, 15, seed=5)]
    rng = _rng(6)
    ok, worst = True, math.inf
    for p in problems:
        _, M_hat = estimate_constants(p, radius=0.1, stream=_rng(6, 1))
        J_star = p.J(p.x_star)
        for _ in range(samples):
            r = 10.0 ** rng.uniform(-4.0, -1.0)
            d = rng.standard_normal(p.n)
            x = p.x_star + r * d / np.linalg.norm(d)
            ratio = theory.taylor_remainder_ratio(p, x, J_star)
            bound = safety * M_hat / 2.0
            ok &= ratio <= bound
            worst = min(worst, (bound - ratio) / bound)
    return Check("Taylor remainder bound", ok, f"{samples * len(problems)} points, min relative slack {worst:.3e}",
                 advisory=True)


def _recursion_runs(N=20, c=0.5):
    p = HEquationProblem(N, c)
    x0 = make_x0(p, "near-solution", 7, 0.05)
    r0 = float(np.linalg.norm(x0 - p.x_star))
    c_hat, M_hat = estimate_constants(p, radius=max(r0, 0.1), stream=_rng(7))
    for method in ("greedy", "random"):
        cfg = make_config(method, InitScheme.SCALED_IDENTITY, 1.0, max_iters=100, seed=7, record_sigma=True)
        yield method, p, solve(p, x0, cfg), c_hat, theory.M_SAFETY * M_hat


def check_recursions():
    out = []
    for method, p, trace, c, M in _recursion_runs():
        s = theory.audit_sigma_recursion(trace.records, p.n, M)
        r = theory.audit_r_recursion(trace.records, c, M)
        out.append(Check(f"sigma recursion ({method})", s.passed,
                         f"{s.checked} steps, min relative slack {s.worst_slack:.3e}", advisory=True))
        out.append(Check(f"distance recursion ({method})", r.passed,
                         f"{r.checked} steps, min relative slack {r.worst_slack:.3e}", advisory=True))
    return out


def superlinear_runs(N=100, c=0.9, seed=0, rho=0.1):
    p = HEquationProblem(N, c)
    x0 = make_x0(p, "near-solution", seed, rho)
    for method in ("greedy", "random"):
        cfg = make_config(method, InitScheme.EXACT_J0, max_iters=50, seed=seed)
        yield method, solve(p, x0, cfg)


def check_superlinear(N=100, c=0.9, seed=0):
    out = []
    for method, trace in superlinear_runs(N, c, seed):
        ratios = theory.error_ratios(trace.records)
        ok = trace.status is Status.CONVERGED and theory.superlinear_signature(trace.records)
        shown = ", ".join(f"{q:.3e}" for q in ratios)
        out.append(Check(f"superlinear signature ({method})", ok,
                         f"{trace.status.value} at k={trace.iterations}, final ratios [{shown}]"))
    return out


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def check_log_space(rtol=1e-12):
    worst = 0.0
    for n in range(2, 31):
        for k in range(0, 60):
            direct = math.e**k * (1.0 - 1.0 / n) ** (k * (k - 1) / 4.0)
            if 1e-300 < direct < 1e300:
                worst = max(worst, abs(theory.greedy_rate_bound(k, n) - direct) / direct)
            direct = (4.0 * n * n * math.e / 0.1) ** k * (1.0 - 1.0 / (n + 1)) ** (k * (k - 1) / 4.0)
            if 1e-300 < direct < 1e300:
                worst = max(worst, abs(theory.random_rate_bound(k, n, 0.1) - direct) / direct)
        for k in range(1, 120):
            direct = 2.0 * k ** (-k / 2.0)
            if direct > 1e-300:
                worst = max(worst, abs(theory.original_broyden_bound(k) - direct) / direct)
    return Check("log-space bounds agree with direct evaluation", worst <= rtol, f"max relative error {worst:.3e}")


def check_crossover(n_max=50, factor=10):
    bad = []
    rows = 0
    for n in range(2, n_max + 1):
        k0 = theory.crossover_iteration(n)
        for k in range(k0, factor * k0 + 1):
            rows += 1
            if theory.log_original_broyden_bound(k) < theory.log_greedy_rate_bound(k, n):
                bad.append((n, k))
    detail = f"{rows} (n, k) pairs, n = 2..{n_max}, k from crossover to {factor}x"
    if bad:
        detail += f", first violation {bad[0]}"
    return Check("crossover table", not bad, detail)


def random_feasible_constants(rng):
    n = int(rng.integers(2, 200))
    c, M = 10.0 ** rng.uniform(-2, 2), 10.0 ** rng.uniform(-3, 3)
    budget = theory.ONE_THIRD * rng.uniform(0.0, 1.0)
    w = rng.uniform()
    return theory.ProblemConstants(c=c, M=M, n=n, sigma0=w * budget / c,
                                   r0=(1.0 - w) * budget / (48.0 * math.sqrt(n) * c * M))


def check_qm(instances=100, slack=1e-10):
    rng = _rng(8)
    in_bracket = constraints = minimal = True
    worst_ratio = math.inf
    for _ in range(instances):
        k = random_feasible_constants(rng)
        q = theory.compute_qm(k)
        lo, hi = theory.qm_bracket(k)
        in_bracket &= lo <= q <= hi
        worst_ratio = min(worst_ratio, q / lo, hi / q)
        s1, s2 = theory.qm_constraint_slacks(q, k)
        constraints &= s1 >= -slack and s2 >= -slack
        if q > 1e-6:
            t1, t2 = theory.qm_constraint_slacks(q - 1e-6, k)
            minimal &= t1 < 0 or t2 < 0
    return [
        Check("q_m within bracket", in_bracket, f"{instances} constant sets, min margin factor {worst_ratio:.3f}"),
        Check("q_m satisfies defining constraints", constraints, f"slack tolerance {slack:g}"),
        Check("q_m minimality", minimal, "a constraint fails at q_m - 1e-6"),
    ]


def check_jacobian_decay_audit(N=10, c=0.5):
    """Greedy run admitted by the initial-condition gate keeps ``c |B_k - J_k| <= e (1-1/n)^(k/2)``."""
    p = HEquationProblem(N, c)
    c_hat, M_hat = estimate_constants(p, radius=0.1, stream=_rng(9))
    M = theory.M_SAFETY * M_hat
    rng = _rng(9, 1)
    sigma0 = 0.15 / c_hat
    r0 = (theory.ONE_THIRD - c_hat * sigma0) / (48.0 * math.sqrt(N) * c_hat * M) * 0.9
    d = rng.standard_normal(N)
    x0 = p.x_star + r0 * d / np.linalg.norm(d)
    P = rng.standard_normal((N, N))
    B0 = p.J(x0) + sigma0 * P / _spec(P)
    k = theory.initial_constants(c_hat, M, B0, p.J(x0), x0, p.x_star)
    gate = theory.check_initial_condition(k)
    sig = []
    cfg = make_config("greedy", max_iters=200, tol=1e-300)
    solve(p, x0, cfg, observer=lambda q, s: sig.append(_spec(s.pair.B - q.J(s.x))), B0=B0)
    audit = theory.audit_jacobian_decay(sig, c_hat, N)
    return Check("Jacobian decay audit (greedy, spectral)", gate and audit.passed,
                 f"gate {'met' if gate else 'not met'}, {audit.checked} iterates, min slack {audit.worst_slack:.3e}",
                 advisory=True)


# --------------------------------------------------------------------------
# Jacobians
# --------------------------------------------------------------------------

def jacobian_points(p, count, rng):
    """In-domain sample points: normal for log-sum-exp, ``[0, 2)^N`` for the H-equation."""
    if p.kind == "hequation":
        return [rng.uniform(0.0, 2.0, p.n) for _ in range(count)]
    return [rng.standard_normal(p.n) for _ in range(count)]


def check_fd_jacobians(points=20, rtol=1e-5, linear_tol=1e-12):
    rng = _rng(10)
    out = []
    for p in (gen_logsumexp(20, 30, seed=10), HEquationProblem(50, 0.9, solve=False)):
        worst = max(jacobian_error(p.J(x), finite_diff_jacobian(p, x)) for x in jacobian_points(p, points, rng))
        out.append(Check(f"analytic vs finite-difference Jacobian ({p.kind}, n={p.n})", worst <= rtol,
                         f"{points} points, max relative Frobenius error {worst:.3e}"))
    worst = 0.0
    for n in (2, 5, 10):
        p = gen_linear(n, seed=10 + n)
        for _ in range(points):
            x = rng.standard_normal(n)
            worst = max(worst, jacobian_error(p.J(x), finite_diff_jacobian(p, x)))
    out.append(Check("analytic vs finite-difference Jacobian (linear)", worst <= linear_tol,
                     f"max relative Frobenius error {worst:.3e}"))
    return out


def check_jacobian_actions(points=5, tol=1e-12):
    rng = _rng(11)
    worst = 0.0
    for p in (gen_logsumexp(8, 12, seed=11), HEquationProblem(12, 0.7, solve=False), gen_linear(6, seed=11)):
        for x in jacobian_points(p, points, rng):
            J = p.J(x)
            v = rng.standard_normal(p.n)
            scale = max(1.0, frobenius_norm(J))
            worst = max(worst, float(np.max(np.abs(p.jvp(x, v) - J @ v))) / (scale * np.linalg.norm(v)))
            for i in range(p.n):
                worst = max(worst, float(np.max(np.abs(p.J_column(x, i) - J[:, i]))) / scale)
    return Check("column and product actions match the full Jacobian", worst <= tol, f"max relative error {worst:.3e}")


def iterated_greedy_sigmas(p, steps):
    """``|B_k - A|_F`` along a greedy run on a linear problem from ``B0 = I``."""
    sig = []
    cfg = make_config("greedy", InitScheme.SCALED_IDENTITY, 1.0, max_iters=steps, tol=1e-300, record_sigma=True)
    trace = solve(p, p.x_star + 1.0, cfg, observer=lambda q, s: sig.append(frobenius_norm(s.pair.B - q.J(s.x))))
    return trace, sig


def check_greedy_jacobian_decay(dims=(5, 20), instances=3, rtol=1e-12):
    ok, worst, count = True, math.inf, 0
    for n in dims:
        for t in range(instances):
            p = gen_linear(n, seed=100 * n + t)
            trace, sig = iterated_greedy_sigmas(p, 5 * n)
            ok &= len(sig) == 5 * n + 1 or trace.status is Status.CONVERGED
            for k, s in enumerate(sig):
                bound = (1.0 - 1.0 / n) ** (k / 2.0) * sig[0]
                ok &= s <= bound * (1.0 + rtol)
                worst = min(worst, (bound - s) / sig[0])
                count += 1
    return Check("iterated greedy Jacobian decay (linear)", ok,
                 f"{count} iterates, k <= 5n, n in {list(dims)}, min slack {worst:.3e}")


# --------------------------------------------------------------------------
# suites
# --------------------------------------------------------------------------

def suite_lemmas():
    return [
        check_greedy_contraction(),
        check_random_expectation(),
        check_random_monte_carlo(kind="basis"),
        check_random_monte_carlo(kind="sphere"),
        *check_monotonicity(),
        check_neumann(),
        check_inverse_maintenance(),
        check_taylor(),
        *check_recursions(),
        *check_superlinear(),
    ]


def suite_bounds():
    return [
        check_log_space(),
        check_crossover(),
        *check_qm(),
        check_jacobian_decay_audit(),
    ]


def suite_jacobians():
    return [
        *check_fd_jacobians(),
        check_jacobian_actions(),
        check_greedy_jacobian_decay(),
    ]


SUITES = {"lemmas": suite_lemmas, "bounds": suite_bounds, "jacobians": suite_jacobians}


def run_suite(name):
    names = list(SUITES) if name == "all" else [name]
    checks = []
    for n in names:
        checks.extend(SUITES[n]())
    return checks
