"""Evaluable convergence bounds for greedy/random Broyden and audits of run traces.

Bounds that can over- or underflow are evaluated in log space; the
``log_*`` variants return the natural logarithm and are what comparisons
should use for large ``k``.

Constants ``c`` (norm of the inverse Jacobian at the root) and ``M``
(Lipschitz constant of the Jacobian relative to the root) are in practice
sampled estimates, so every audit here is advisory.
"""

import math
from dataclasses import dataclass

import numpy as np

from .densealg import frobenius_norm, spectral_norm
from .exceptions import Infeasible, OutOfDomain, ThresholdNotMet

ONE_THIRD = 1.0 / 3.0
# absorbs the last-bit rounding of a sum that is exactly 1/3 in real arithmetic
GATE_RTOL = 1e-14
M_SAFETY = 1.5
FLOOR = 1e-14
QM_MAXITER = 4000


@dataclass(frozen=True)
class ProblemConstants:
    c: float
    M: float
    n: int
    r0: float
    sigma0: float
    sigma_norm: str = "spectral"

    def __post_init__(self):
        for name in ("c", "M", "r0", "sigma0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def theorem_applicable(self):
        return self.n >= 2


def initial_constants(c, M, B0, J0, x0, x_star, norm="spectral"):
    """Bundle ``r0 = |x0 - x*|`` and ``sigma0 = |B0 - J(x0)|`` in the chosen norm."""
    D = np.asarray(B0) - np.asarray(J0)
    if norm == "spectral":
        sigma0 = spectral_norm(D)
    elif norm == "frobenius":
        sigma0 = frobenius_norm(D)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return ProblemConstants(c=float(c), M=float(M), n=len(x0),
                            r0=float(np.linalg.norm(np.asarray(x0) - x_star)),
                            sigma0=sigma0, sigma_norm=norm)


def initial_condition_lhs(k):
    return 48.0 * math.sqrt(k.n) * k.c * k.M * k.r0 + k.c * k.sigma0


def check_initial_condition(k):
    """Local-convergence gate ``48 sqrt(n) c M r0 + c sigma0 <= 1/3``."""
    return initial_condition_lhs(k) <= ONE_THIRD * (1.0 + GATE_RTOL)


# --------------------------------------------------------------------------
# rate envelopes
# --------------------------------------------------------------------------

def log_greedy_rate_bound(k, n):
    return k + 0.25 * k * (k - 1) * math.log1p(-1.0 / n)


def greedy_rate_bound(k, n):
    """``e^k (1 - 1/n)^(k(k-1)/4)``, the greedy envelope on ``r_k / r_0``."""
    if k < 0 or n < 2:
        raise ValueError("need k >= 0 and n >= 2")
    return math.exp(log_greedy_rate_bound(k, n))


def log_random_rate_bound(k, n, delta):
    return k * math.log(4.0 * n * n * math.e / delta) + 0.25 * k * (k - 1) * math.log1p(-1.0 / (n + 1))


def random_rate_bound(k, n, delta=0.1):
    """``(4 n^2 e / delta)^k (1 - 1/(n+1))^(k(k-1)/4)``, holding with probability ``1 - delta``."""
    if k < 0 or n < 2 or not 0 < delta < 1:
        raise ValueError("need k >= 0, n >= 2 and 0 < delta < 1")
    return math.exp(log_random_rate_bound(k, n, delta))


def jacobian_rate_bound_greedy(k, n, c):
    """``2 e (1 - 1/n)^(k/2) / c`` on ``|B_k - J*|_F``, valid for ``k >= 4n + 3``."""
    k_min = 4 * n + 3
    if k < k_min:
        raise ThresholdNotMet(k_min)
    return 2.0 * math.e * math.exp(0.5 * k * math.log1p(-1.0 / n)) / c


def random_jacobian_threshold(n, delta=0.1):
    return math.ceil(4 * (n + 1) * math.log(4.0 * n * n * math.e / delta) + 3)


def jacobian_rate_bound_random(k, n, c, delta=0.1):
    """``8 n^2 e / (c delta) (1 - 1/(n+1))^(k/2)`` on ``|B_k - J*|_F``.

    Uses the ``k/2`` exponent of the theorem statement; the derivation ends
    with ``(k-1)/4``, which is weaker for ``k > 1``.
    """
    k_min = random_jacobian_threshold(n, delta)
    if k < k_min:
        raise ThresholdNotMet(k_min)
    return 8.0 * n * n * math.e / (c * delta) * math.exp(0.5 * k * math.log1p(-1.0 / (n + 1)))


def log_original_broyden_bound(k):
    return math.log(2.0) - 0.5 * k * math.log(k)


def original_broyden_bound(k):
    """``2 k^(-k/2)``, the classical Broyden envelope on ``r_k / r_0``."""
    if k < 1:
        raise ValueError("need k >= 1")
    return math.exp(log_original_broyden_bound(k))


def crossover_iteration(n):
    """First ``k`` from which the greedy envelope is provably below the classical one."""
    if n < 2:
        raise ValueError("need n >= 2")
    return math.ceil(8.0 * n * math.log(n * math.e) + 1.0)


def compare_rates(n, k_max):
    """Rows ``(k, original, greedy, greedy_faster)`` for ``k = 1..k_max``.

    ``greedy_faster`` is decided on the logarithms, so it stays meaningful
    after both bounds underflow.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rows = []
    for k in range(1, k_max + 1):
        lo, lg = log_original_broyden_bound(k), log_greedy_rate_bound(k, n)
        rows.append((k, math.exp(lo), math.exp(lg), lo >= lg))
    return rows


# --------------------------------------------------------------------------
# q_m
# --------------------------------------------------------------------------

def qm_constraint_slacks(q, k):
    """Slack of both defining constraints at ``q`` (nonnegative = satisfied)."""
    cs = k.c * k.sigma0
    a = math.sqrt(k.n) * k.c * k.M * k.r0
    s1 = q / (q + 1.0) - cs
    s2 = q * (1.0 - q) / 12.0 * (q / (1.0 + q) - cs) - a
    return s1, s2


def qm_bracket(k):
    """Lower and upper envelopes ``0.5 t`` and ``7 t``, ``t = c sigma0 + sqrt(sqrt(n) c M r0)``."""
    t = k.c * k.sigma0 + math.sqrt(math.sqrt(k.n) * k.c * k.M * k.r0)
    return 0.5 * t, 7.0 * t


def compute_qm(k, tol=1e-12):
    """Smallest linear-rate constant ``q`` admitted by ``(c, M, n, r0, sigma0)``.

    Bisection on ``[c sigma0 / (1 - c sigma0), 1/2]`` where the second
    constraint's left side ``q(1-q)(q/(1+q) - c sigma0)`` is increasing.
    """
    if not initial_condition_lhs(k) <= ONE_THIRD * (1.0 + GATE_RTOL):
        raise Infeasible("48 sqrt(n) c M r0 + c sigma0 exceeds 1/3")
    cs = k.c * k.sigma0
    lo = cs / (1.0 - cs)
    hi = 0.5
    a12 = 12.0 * math.sqrt(k.n) * k.c * k.M * k.r0

    def g(q):
        return q * (1.0 - q) * (q / (1.0 + q) - cs) - a12

    if g(lo) >= 0.0:
        return lo
    if g(hi) < 0.0:
        # only reachable through the rounding allowance on the gate
        return hi
    # absolute tolerance, tightened to relative precision for tiny q_m
    for _ in range(QM_MAXITER):
        if hi - lo <= tol * min(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# auxiliary inequalities
# --------------------------------------------------------------------------

def neumann_inverse_bound(E_norm):
    """Bounds on ``|(I - E)^-1|`` and ``|(I - E)^-1 - I|`` given ``|E| < 1``."""
    if not 0.0 <= E_norm < 1.0:
        raise OutOfDomain(f"need 0 <= |E| < 1, got {E_norm}")
    return 1.0 / (1.0 - E_norm), E_norm / (1.0 - E_norm)


def taylor_remainder_ratio(p, x, J_star):
    """``|F(x) - J(x*)(x - x*)| / |x - x*|^2``; bounded by ``M / 2``."""
    s = x - p.x_star
    r = np.linalg.norm(s)
    return float(np.linalg.norm(p.F(x) - J_star @ s) / (r * r))


# --------------------------------------------------------------------------
# trace audits
# --------------------------------------------------------------------------

@dataclass
class AuditResult:
    name: str
    passed: bool
    checked: int
    worst_slack: float
    advisory: bool = True

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = " (advisory: estimated constants)" if self.advisory else ""
        return f"{self.name}: {tag} [{self.checked} checks, min slack {self.worst_slack:.3e}]{extra}"


def _valid(records, floor=FLOOR):
    return [r for r in records if r.res_norm >= floor]


def audit_sigma_recursion(records, n, M, name="sigma recursion"):
    """``s_{k+1}^2 <= s_k^2 + 2 s_k sqrt(n) M (r_k + r_{k+1}) + n M^2 (r_k + r_{k+1})^2``."""
    worst, count, ok = math.inf, 0, True
    for a, b in zip(records, records[1:]):
        if None in (a.sigma_abs, b.sigma_abs, a.r_k, b.r_k):
            continue
        rr = a.r_k + b.r_k
        rhs = a.sigma_abs**2 + 2 * a.sigma_abs * math.sqrt(n) * M * rr + n * M * M * rr * rr
        slack = rhs - b.sigma_abs**2
        tol = 1e-12 * max(1.0, rhs)
        ok &= slack >= -tol
        worst = min(worst, slack / max(1.0, rhs))
        count += 1
    return AuditResult(name, ok, count, worst if count else 0.0)


def audit_r_recursion(records, c, M, name="r recursion"):
    """``r_{k+1} <= (3cMr_k/2 + c s_k) / (1 - c(s_k + M r_k)) r_k`` where the premise holds."""
    worst, count, ok = math.inf, 0, True
    for a, b in zip(_valid(records), _valid(records)[1:]):
        if None in (a.sigma_abs, a.r_k, b.r_k):
            continue
        if b.k != a.k + 1:
            continue
        d = 1.0 - c * (a.sigma_abs + M * a.r_k)
        if d <= 0.0:
            continue
        rhs = (1.5 * c * M * a.r_k + c * a.sigma_abs) / d * a.r_k
        slack = rhs - b.r_k
        ok &= slack >= -1e-12 * max(a.r_k, 1e-300) - 1e-15
        worst = min(worst, slack / max(a.r_k, 1e-300))
        count += 1
    return AuditResult(name, ok, count, worst if count else 0.0)


def audit_jacobian_decay(sigma_spectral, c, n, name="Jacobian decay"):
    """``c |B_k - J(x_k)| <= e (1 - 1/n)^(k/2)`` at every recorded ``k``."""
    worst, ok = math.inf, True
    for k, s in enumerate(sigma_spectral):
        bound = math.e * math.exp(0.5 * k * math.log1p(-1.0 / n))
        slack = bound - c * s
        ok &= slack >= -1e-12
        worst = min(worst, slack)
    return AuditResult(name, ok, len(sigma_spectral), worst if sigma_spectral else 0.0)


def error_ratios(records, floor=FLOOR, last=5):
    """Ratios ``r_{k+1}/r_k`` over the final ``last`` recorded iterates above ``floor``."""
    rs = [r.r_k for r in _valid(records, floor) if r.r_k is not None]
    rs = rs[-last:]
    return [b / a for a, b in zip(rs, rs[1:]) if a > 0]


def superlinear_signature(records, floor=FLOOR, last=5):
    """True when the error ratio strictly decreases over the final recorded iterates."""
    q = error_ratios(records, floor, last)
    return len(q) >= 2 and all(b < a for a, b in zip(q, q[1:]))
