"""Rank-one Jacobian updates and direction rules.

All functions return new arrays; inputs are never modified.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .densealg import frobenius_norm
from .exceptions import DegenerateUpdate, ZeroDirection

ZERO_NORM = 1e-300
SM_RTOL = 1e-12
CONSISTENCY_RTOL = 1e-8


class DirectionKind(enum.Enum):
    SECANT = "secant"
    GREEDY_BASIS = "greedy"
    RANDOM_BASIS = "basis"
    RANDOM_SPHERE = "sphere"
    RANDOM_GAUSSIAN = "gaussian"

    @property
    def is_random(self):
        return self in (DirectionKind.RANDOM_BASIS, DirectionKind.RANDOM_SPHERE,
                        DirectionKind.RANDOM_GAUSSIAN)


@dataclass(frozen=True)
class DirectionRule:
    kind: DirectionKind = DirectionKind.SECANT
    seed: int = 0


@dataclass
class JacobianPair:
    """Approximate Jacobian ``B`` and its maintained inverse ``H``.

    ``B`` may be ``None`` on execution paths that only carry the inverse
    (the "bad" method outside debug mode).
    """

    B: np.ndarray
    H: np.ndarray

    def inverse_residual(self):
        """``||B H - I||_F``, the drift of the maintained inverse."""
        n = self.H.shape[0]
        return frobenius_norm(self.B @ self.H - np.eye(n))

    def is_consistent(self, rtol=CONSISTENCY_RTOL):
        return self.inverse_residual() <= rtol * max(1.0, frobenius_norm(self.B))


def _check_direction(v, name):
    if np.linalg.norm(v) < ZERO_NORM:
        raise ZeroDirection(f"||{name}|| below {ZERO_NORM:g}")


def broyd_matrix(B, A, u):
    """``B + (A - B) u u^T / u^T u``: move ``B`` toward ``A`` along ``u``."""
    _check_direction(u, "u")
    return B + np.outer((A - B) @ u, u) / (u @ u)


def broyden_secant_update(B, y, u):
    """Good Broyden update; the result maps ``u`` to ``y``."""
    _check_direction(u, "u")
    return B + np.outer(y - B @ u, u) / (u @ u)


def broyden_bad_update(H, y, u):
    """Bad Broyden update of the inverse; the result maps ``y`` to ``u``."""
    _check_direction(y, "y")
    return H + np.outer(u - H @ y, y) / (y @ y)


def sherman_morrison_inverse(H, y, u):
    """Inverse of ``broyden_secant_update(inv(H), y, u)`` in O(n^2).

    Raises :class:`DegenerateUpdate` when ``|u^T H y|`` is below
    ``1e-12 * ||u|| ||H||_F ||y||``; the updated Jacobian would be singular.
    """
    Hy = H @ y
    denom = float(u @ Hy)
    scale = np.linalg.norm(u) * frobenius_norm(H) * np.linalg.norm(y)
    if not abs(denom) >= SM_RTOL * scale:
        raise DegenerateUpdate(f"|u^T H y| = {abs(denom):.3e} vs threshold {SM_RTOL * scale:.3e}")
    return H - np.outer(Hy - u, u @ H) / denom


def column_deficits(B, J):
    """Squared column norms of ``B - J``."""
    return np.sum(np.square(B - J), axis=0)


def greedy_direction(B, J):
    """0-based index of the column of ``B - J`` with the largest norm.

    Ties go to the lowest index.
    """
    return int(np.argmax(column_deficits(B, J)))


def basis_vector(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def random_direction(n, rule, stream):
    """Draw a direction from the isotropic distribution ``rule.kind``.

    Returns ``(u, index)`` where ``index`` is the basis index for
    ``RANDOM_BASIS`` draws and ``None`` otherwise.
    """
    kind = rule.kind
    if kind is DirectionKind.RANDOM_BASIS:
        i = int(stream.integers(n))
        return basis_vector(n, i), i
    if kind is DirectionKind.RANDOM_SPHERE:
        g = stream.standard_normal(n)
        return g / np.linalg.norm(g), None
    if kind is DirectionKind.RANDOM_GAUSSIAN:
        return stream.standard_normal(n), None
    raise ValueError(f"{kind} is not a random direction rule")
