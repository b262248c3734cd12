"""Test problems F(x) = 0 with analytic Jacobians.

Each problem exposes ``F(x)``, the full Jacobian ``J(x)``, a single
column ``J_column(x, i)`` and a Jacobian-vector product ``jvp(x, v)``.
Problems are immutable after construction and all evaluations are pure.
"""

import json

import numpy as np
from scipy.special import logsumexp as _lse, softmax

from .densealg import LUFactor, as_matrix, as_vector, frobenius_norm, lu_solve, spectral_norm
from .exceptions import PoleEncountered
from .rng import STREAM_PROBLEM, make_rng

POLE_TOL = 1e-12


class Problem:
    """Base class. Subclasses implement ``F`` and ``J``."""

    kind = "abstract"
    # relative central-difference step; see finite_diff_jacobian
    fd_step = 1e-6

    def __init__(self, n, seed=0):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = int(n)
        self.seed = int(seed)
        self.x_star = None
        self.x_star_residual = None
        self.x_star_source = None

    def F(self, x):
        raise NotImplementedError

    def J(self, x):
        raise NotImplementedError

    def J_column(self, x, i):
        return self.J(x)[:, i]

    def jvp(self, x, v):
        return self.J(x) @ v

    def _set_solution(self, x_star, source):
        self.x_star = np.asarray(x_star, dtype=np.float64)
        self.x_star_residual = float(np.linalg.norm(self.F(self.x_star)))
        self.x_star_source = source

    def parameters(self):
        """Kind-specific fields written next to kind/n/seed in JSON."""
        return {}

    def descriptor(self):
        """Compact JSON-able description (no solution vector)."""
        return {"kind": self.kind, "n": self.n, "seed": self.seed, **self.parameters()}

    def to_dict(self):
        d = self.descriptor()
        if self.x_star is not None:
            d["x_star"] = self.x_star.tolist()
            d["x_star_residual"] = self.x_star_residual
        return d

    def to_json(self):
        return json.dumps(self.to_dict())


# --------------------------------------------------------------------------
# linear
# --------------------------------------------------------------------------

class LinearProblem(Problem):
    """``F(x) = A x - b`` with constant Jacobian ``A``."""

    kind = "linear"
    # central differences are exact on affine maps, so a large step only cuts rounding
    fd_step = 1.0

    def __init__(self, A, b, seed=0):
        A = as_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        super().__init__(A.shape[0], seed)
        self.A = A
        self.b = as_vector(b, self.n)
        self._explicit = True
        self._set_solution(lu_solve(self.A, self.b), "lu_solve")

    def F(self, x):
        return self.A @ x - self.b

    def J(self, x):
        return self.A.copy()

    def J_column(self, x, i):
        return self.A[:, i].copy()

    def jvp(self, x, v):
        return self.A @ v

    def parameters(self):
        if self._explicit:
            return {"A": self.A.tolist(), "b": self.b.tolist()}
        return {}


def make_linear_problem(A, b):
    return LinearProblem(A, b)


def gen_linear(n, seed):
    """Random well-conditioned system: ``A = 2 I + G / (2 sqrt(n))``."""
    rng = make_rng(seed, STREAM_PROBLEM)
    G = rng.standard_normal((n, n))
    A = 2.0 * np.eye(n) + G / (2.0 * np.sqrt(n))
    b = rng.standard_normal(n)
    p = LinearProblem(A, b, seed=seed)
    p._explicit = False
    return p


# --------------------------------------------------------------------------
# regularized log-sum-exp
# --------------------------------------------------------------------------

class LogSumExpProblem(Problem):
    """Gradient system of a regularized log-sum-exp function.

    ``f(x) = ln sum_j exp(c_j.x - b_j) + 1/2 sum_j (c_j.x)^2 + gamma/2 |x|^2``
    with ``F = grad f`` and ``J = hess f``. ``C`` holds the ``c_j`` as columns.
    """

    kind = "logsumexp"

    def __init__(self, C, b, gamma, seed=0):
        C = as_matrix(C)
        super().__init__(C.shape[0], seed)
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        self.C = C
        self.m = C.shape[1]
        self.b = as_vector(b, self.m)
        self.gamma = float(gamma)

    def weights(self, x):
        return softmax(self.C.T @ x - self.b)

    def f(self, x):
        z = self.C.T @ x
        return float(_lse(z - self.b) + 0.5 * z @ z + 0.5 * self.gamma * x @ x)

    def F(self, x):
        pi = self.weights(x)
        return self.C @ pi + self.C @ (self.C.T @ x) + self.gamma * x

    def J(self, x):
        pi = self.weights(x)
        Cp = self.C * pi
        Cpi = self.C @ pi
        return Cp @ self.C.T - np.outer(Cpi, Cpi) + self.C @ self.C.T + self.gamma * np.eye(self.n)

    def J_column(self, x, i):
        pi = self.weights(x)
        ci = self.C[i]
        Cpi = self.C @ pi
        col = self.C @ (pi * ci) - Cpi * (pi @ ci) + self.C @ ci
        col[i] += self.gamma
        return col

    def jvp(self, x, v):
        pi = self.weights(x)
        z = self.C.T @ v
        return self.C @ (pi * z) - (self.C @ pi) * (pi @ z) + self.C @ z + self.gamma * v

    def smoothness(self):
        """``L = 2 lambda_max(C C^T) + gamma``, the scale of the bad initial ``L I``."""
        return 2.0 * spectral_norm(self.C) ** 2 + self.gamma

    def parameters(self):
        return {"m": self.m, "gamma": self.gamma}


def gen_logsumexp(n, m, seed, gamma=1.0):
    """Synthetic instance whose unique root is ``x* = 0``.

    Draw order from the problem stream: ``C_hat`` (n x m, row-major), then
    ``b`` (m); both Unif[-1, 1]. Columns are shifted by the gradient of the
    bare log-sum-exp term at 0.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = make_rng(seed, STREAM_PROBLEM)
    C_hat = rng.uniform(-1.0, 1.0, size=(n, m))
    b = rng.uniform(-1.0, 1.0, size=m)
    grad0 = C_hat @ softmax(-b)
    C = C_hat - grad0[:, None]
    p = LogSumExpProblem(C, b, gamma, seed=seed)
    p._set_solution(np.zeros(n), "construction")
    return p


logsumexp_F = LogSumExpProblem.F
logsumexp_J = LogSumExpProblem.J


# --------------------------------------------------------------------------
# Chandrasekhar H-equation
# --------------------------------------------------------------------------

class HEquationProblem(Problem):
    """Discretised Chandrasekhar H-equation on ``N`` nodes.

    ``F(x)_i = x_i - 1 / g_i(x)``, ``g_i(x) = 1 - c/(2N) sum_j mu_i x_j / (mu_i + mu_j)``,
    ``mu_i = (i - 0.5)/N``.
    """

    kind = "hequation"

    def __init__(self, N, c, seed=0, solve=True):
        super().__init__(N, seed)
        if not 0.0 < c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        self.c = float(c)
        self.mu = (np.arange(1, N + 1) - 0.5) / N
        self.K = self.mu[:, None] / (self.mu[:, None] + self.mu[None, :])
        self._w = self.c / (2.0 * N)
        if solve:
            self._set_solution(*_newton_root(self, np.ones(N)))

    def g(self, x):
        g = 1.0 - self._w * (self.K @ x)
        bad = np.abs(g) <= POLE_TOL
        if np.any(bad) or not np.all(np.isfinite(g)):
            raise PoleEncountered(f"denominator within {POLE_TOL:g} of zero at index {int(np.argmax(bad))}")
        return g

    def F(self, x):
        return x - 1.0 / self.g(x)

    def J(self, x):
        g = self.g(x)
        return np.eye(self.n) - (self._w / g**2)[:, None] * self.K

    def J_column(self, x, i):
        g = self.g(x)
        col = -(self._w / g**2) * self.K[:, i]
        col[i] += 1.0
        return col

    def jvp(self, x, v):
        g = self.g(x)
        return v - (self._w / g**2) * (self.K @ v)

    def parameters(self):
        return {"c": self.c}


hequation_F = HEquationProblem.F
hequation_J = HEquationProblem.J


def _newton_root(p, x0, tol=1e-13, maxiter=200):
    """Plain Newton from ``x0``; returns ``(x, source)``."""
    x = np.array(x0, dtype=np.float64)
    best, best_res = x, np.linalg.norm(p.F(x))
    for it in range(maxiter):
        fx = p.F(x)
        res = np.linalg.norm(fx)
        if res < best_res:
            best, best_res = x, res
        if res <= tol:
            return x, f"newton from ones, {it} iterations"
        x = x - lu_solve(p.J(x), fx)
    return best, f"newton from ones, stopped at {maxiter} iterations"


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------

def finite_diff_jacobian(p, x, h=None):
    """Central-difference Jacobian, one column per coordinate.

    The default step is ``p.fd_step * max(1, |x|)``: ``1e-6`` balances
    truncation against rounding on smooth problems.
    """
    x = np.asarray(x, dtype=np.float64)
    if h is None:
        h = p.fd_step * max(1.0, float(np.linalg.norm(x)))
    if not h > 0:
        raise ValueError("step must be positive")
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((p.F(x + e) - p.F(x - e)) / (2.0 * h))
    return np.column_stack(cols)


def fd_column(p, x, v, h=None):
    """Central-difference directional derivative ``J(x) v``."""
    if h is None:
        h = p.fd_step * max(1.0, float(np.linalg.norm(x)))
    scale = np.linalg.norm(v)
    d = v / scale
    return scale * (p.F(x + h * d) - p.F(x - h * d)) / (2.0 * h)


def sample_ball(center, radius, stream, r_min=0.0):
    """Point uniform in direction with ``|x - center|`` in ``[r_min, radius]``.

    With ``r_min=0`` the point is uniform in the ball.
    """
    n = center.size
    d = stream.standard_normal(n)
    d /= np.linalg.norm(d)
    u = stream.uniform()
    r = (r_min**n + u * (radius**n - r_min**n)) ** (1.0 / n)
    return center + r * d


def estimate_constants(p, radius=None, samples=100, stream=None):
    """Estimate ``c = ||J(x*)^-1||`` and a Lipschitz constant ``M`` near ``x*``.

    ``M_hat`` is the largest sampled ratio ``||J(x) - J(x*)|| / ||x - x*||`` and
    therefore a lower bound on the true constant.
    """
    if p.x_star is None:
        raise ValueError("problem has no known solution")
    xs = p.x_star
    if radius is None:
        radius = 0.1 * (1.0 + np.linalg.norm(xs))
    if stream is None:
        stream = make_rng(p.seed, STREAM_PROBLEM, 99)
    J_star = p.J(xs)
    c_hat = spectral_norm(LUFactor(J_star).inverse())
    M_hat = 0.0
    for _ in range(samples):
        x = sample_ball(xs, radius, stream)
        r = np.linalg.norm(x - xs)
        if r == 0.0:
            continue
        M_hat = max(M_hat, spectral_norm(p.J(x) - J_star) / r)
    return c_hat, M_hat


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

def problem_from_dict(d):
    kind = d["kind"]
    n, seed = int(d["n"]), int(d.get("seed", 0))
    if kind == "linear":
        if "A" in d:
            p = LinearProblem(d["A"], d["b"], seed=seed)
        else:
            p = gen_linear(n, seed)
    elif kind == "logsumexp":
        p = gen_logsumexp(n, int(d["m"]), seed, float(d["gamma"]))
    elif kind == "hequation":
        p = HEquationProblem(n, float(d["c"]), seed=seed, solve="x_star" not in d)
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    if "x_star" in d:
        p.x_star = as_vector(d["x_star"], n)
        p.x_star_residual = float(d.get("x_star_residual", np.linalg.norm(p.F(p.x_star))))
        p.x_star_source = p.x_star_source or "loaded"
    return p


def problem_from_json(text):
    return problem_from_dict(json.loads(text))


def make_problem(kind, n, seed=0, m=None, gamma=1.0, c=0.9):
    """Build a problem from CLI-style parameters."""
    if kind == "linear":
        return gen_linear(n, seed)
    if kind == "logsumexp":
        return gen_logsumexp(n, m if m is not None else 2 * n, seed, gamma)
    if kind == "hequation":
        return HEquationProblem(n, c, seed=seed)
    raise ValueError(f"unknown problem kind {kind!r}")


def jacobian_error(analytic, fd):
    """Relative Frobenius discrepancy between two Jacobians."""
    return frobenius_norm(analytic - fd) / max(frobenius_norm(analytic), 1e-300)
