"""Small dense linear algebra kernel.

Vectors and matrices are plain ``float64`` numpy arrays. The helpers
:func:`as_vector` and :func:`as_matrix` validate shape and finiteness at
the boundaries of the library; everything inside works on the arrays
directly.
"""

import warnings

import numpy as np
import scipy.linalg

from .exceptions import NonConvergence, SingularMatrix

PIVOT_RTOL = 1e-14
POWER_TOL = 1e-10
POWER_MAXITER = 10000


def as_vector(x, n=None):
    """Copy ``x`` into a finite 1-D float64 array of length ``n`` (if given)."""
    v = np.array(x, dtype=np.float64).reshape(-1)
    if v.size < 1:
        raise ValueError("vector must have at least one entry")
    if n is not None and v.size != n:
        raise ValueError(f"expected vector of length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def as_matrix(a, shape=None):
    """Copy ``a`` into a finite 2-D float64 array."""
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2 or m.size < 1:
        raise ValueError(f"expected a non-empty 2-D array, got shape {m.shape}")
    if shape is not None and m.shape != tuple(shape):
        raise ValueError(f"expected shape {tuple(shape)}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def frobenius_norm(m):
    return float(np.sqrt(np.sum(np.square(m))))


def _start_vector(n):
    # fixed start so repeated calls give identical answers
    v = np.random.default_rng(0x5EED).standard_normal(n)
    return v / np.linalg.norm(v)


def _power_iteration(apply, n, tol, maxiter):
    """Largest eigenvalue of a symmetric PSD operator given as ``apply``."""
    v = _start_vector(n)
    lam = 0.0
    for _ in range(maxiter):
        w = apply(v)
        lam_new = float(v @ w)
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return 0.0
        v = w / wn
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise NonConvergence(f"power iteration did not reach rtol={tol} in {maxiter} iterations")


def spectral_norm(m, tol=POWER_TOL, maxiter=POWER_MAXITER):
    """Largest singular value by power iteration on ``m.T @ m``."""
    m = np.asarray(m, dtype=np.float64)
    if not np.any(m):
        return 0.0
    lam = _power_iteration(lambda v: m.T @ (m @ v), m.shape[1], tol, maxiter)
    return float(np.sqrt(max(lam, 0.0)))


class LUFactor:
    """Partial-pivot LU factorisation with a scale-invariant singularity test.

    Raises :class:`SingularMatrix` when a pivot falls below
    ``1e-14 * ||A||_F``.
    """

    def __init__(self, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"LU needs a square matrix, got shape {a.shape}")
        self.n = a.shape[0]
        scale = frobenius_norm(a)
        if scale == 0.0:
            raise SingularMatrix("zero matrix")
        # exact zero pivots are reported below as SingularMatrix
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        pivots = np.abs(np.diag(lu))
        smallest = float(pivots.min())
        if not np.isfinite(smallest) or smallest < PIVOT_RTOL * scale:
            raise SingularMatrix(
                f"pivot {smallest:.3e} below {PIVOT_RTOL:g} * ||A||_F = {PIVOT_RTOL * scale:.3e}"
            )
        self._lu_piv = (lu, piv)

    def solve(self, b, trans=False):
        return scipy.linalg.lu_solve(self._lu_piv, b, trans=1 if trans else 0, check_finite=False)

    def inverse(self):
        return self.solve(np.eye(self.n))


def lu_solve(a, b):
    """Solve ``a @ x = b`` with partial pivoting."""
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape}, b has {b.shape[0]} rows")
    return LUFactor(a).solve(b)


def inverse(a):
    return LUFactor(a).inverse()


def smallest_singular_value(a, tol=POWER_TOL, maxiter=POWER_MAXITER):
    """Smallest singular value by inverse power iteration (one LU, many solves)."""
    lu = LUFactor(a)
    lam = _power_iteration(lambda v: lu.solve(lu.solve(v, trans=True)), lu.n, tol, maxiter)
    return float(1.0 / np.sqrt(lam))


def condition_number(a):
    """2-norm condition number ``s_1(A) / s_n(A)``."""
    s1 = spectral_norm(a)
    sn = smallest_singular_value(a)
    if sn < PIVOT_RTOL * s1:
        raise SingularMatrix(f"s_n = {sn:.3e} below {PIVOT_RTOL:g} * s_1")
    return s1 / sn
