"""Newton and Broyden-family iteration drivers.

:func:`solve` is the entry point. It never raises on numerical trouble;
singular updates, poles and overflow end the run with a terminal status
recorded in the returned :class:`IterationTrace`.
"""

import enum
import functools
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .broyden import (
    DirectionKind,
    DirectionRule,
    JacobianPair,
    basis_vector,
    broyden_bad_update,
    broyden_secant_update,
    greedy_direction,
    random_direction,
    sherman_morrison_inverse,
)
from .densealg import LUFactor, frobenius_norm, lu_solve
from .exceptions import DegenerateUpdate, DomainError, SingularMatrix, ZeroDirection
from .problems import fd_column, finite_diff_jacobian
from .rng import RNG_IDENTITY, STREAM_DIRECTIONS, STREAM_SAMPLING, make_rng

# relative probe residual |B H v - v| / |v| above which H is re-inverted from B
DRIFT_TOL = 1e-10


class Method(enum.Enum):
    NEWTON = "newton"
    CLASSICAL = "classical"
    BAD = "bad"
    GREEDY = "greedy"
    RANDOM = "random"


class InitScheme(enum.Enum):
    EXACT_J0 = "exact-j0"
    SCALED_IDENTITY = "scaled-identity"
    SCALED_J0 = "scaled-j0"
    SCALED_JSTAR = "scaled-jstar"


class Status(enum.Enum):
    RUNNING = "running"
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DEGENERATE = "degenerate"
    DOMAIN_ERROR = "domain_error"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.GREEDY
    direction: DirectionRule = DirectionRule(DirectionKind.RANDOM_BASIS)
    init: InitScheme = InitScheme.EXACT_J0
    scale: float = 1.0
    tol_residual: float = 1e-12
    max_iters: int = 500
    seed: int = 0
    record_sigma: bool = False
    # check B H = I at every iteration; the bad method also rebuilds B
    debug: bool = False
    # finite-difference Jacobian actions instead of analytic ones
    fd_jacobian: bool = False

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.init is not InitScheme.EXACT_J0 and self.scale == 0:
            raise ValueError("scale must be nonzero for scaled initialisations")
        if self.method is Method.RANDOM and not self.direction.kind.is_random:
            raise ValueError("random method needs a random direction rule")

    def to_dict(self):
        d = asdict(self)
        d["method"] = self.method.value
        d["init"] = self.init.value
        d["direction"] = {"kind": self.direction.kind.value, "seed": self.direction.seed}
        return d


@dataclass
class SolverState:
    x: np.ndarray
    fx: np.ndarray
    pair: JacobianPair = None
    k: int = 0
    status: Status = Status.RUNNING
    direction_index: int = None
    step_norm: float = None
    refreshes: int = 0


@dataclass
class IterationRecord:
    k: int
    res_norm: float
    r_k: float = None
    sigma_abs: float = None
    sigma_rel: float = None
    direction_index: int = None
    step_norm: float = None
    # debug only, not part of the CSV
    inverse_residual: float = None


CSV_FIELDS = ("k", "res_norm", "r_k", "sigma_abs", "sigma_rel", "direction_index", "step_norm")


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    status: Status = Status.RUNNING
    x: np.ndarray = None
    message: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return self.records[-1].k if self.records else 0

    @property
    def final_residual(self):
        return self.records[-1].res_norm if self.records else None

    def column(self, name):
        return [getattr(r, name) for r in self.records]


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------

def _jacobian(p, x, fd):
    return finite_diff_jacobian(p, x) if fd else p.J(x)


def _check_finite(x, fx):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(fx))):
        raise DomainError("iterate or residual is not finite")


def newton_step(p, x):
    """``x - J(x)^-1 F(x)``."""
    return x - lu_solve(p.J(x), p.F(x))


def _quasi_newton_move(p, state):
    x_new = state.x - state.pair.H @ state.fx
    f_new = p.F(x_new)
    _check_finite(x_new, f_new)
    return x_new, f_new


@functools.lru_cache(maxsize=32)
def _probe(n):
    v = make_rng(0, STREAM_SAMPLING, n).standard_normal(n)
    v.flags.writeable = False
    return v


def resync_inverse(B, H):
    """Return ``(H, refreshed)``; ``H`` is recomputed from ``B`` when it has drifted.

    Drift is measured in O(n^2) on a fixed probe vector, so the per-iteration
    cost stays quadratic and refreshes happen only when rounding in the
    Sherman-Morrison chain has accumulated.
    """
    v = _probe(B.shape[0])
    drift = np.linalg.norm(B @ (H @ v) - v) / np.linalg.norm(v)
    if drift <= DRIFT_TOL * max(1.0, frobenius_norm(B)):
        return H, False
    return LUFactor(B).inverse(), True


def _advance(state, x_new, f_new, pair, index=None, refreshed=False):
    return SolverState(x=x_new, fx=f_new, pair=pair, k=state.k + 1, status=Status.RUNNING,
                       direction_index=index, step_norm=float(np.linalg.norm(x_new - state.x)),
                       refreshes=state.refreshes + refreshed)


def classical_broyden_step(p, state):
    """Good Broyden step with secant pair ``u = x+ - x``, ``y = F(x+) - F(x)``."""
    x_new, f_new = _quasi_newton_move(p, state)
    u = x_new - state.x
    if not np.any(u):
        return _advance(state, x_new, f_new, state.pair)
    y = f_new - state.fx
    H = sherman_morrison_inverse(state.pair.H, y, u)
    if state.pair.B is None:
        return _advance(state, x_new, f_new, JacobianPair(None, H))
    B = broyden_secant_update(state.pair.B, y, u)
    H, refreshed = resync_inverse(B, H)
    return _advance(state, x_new, f_new, JacobianPair(B, H), refreshed=refreshed)


def _directional_update(state, x_new, f_new, u, y, index):
    B = broyden_secant_update(state.pair.B, y, u)
    H, refreshed = resync_inverse(B, sherman_morrison_inverse(state.pair.H, y, u))
    return _advance(state, x_new, f_new, JacobianPair(B, H), index, refreshed)


def greedy_broyden_step(p, state, fd=False):
    """Greedy Broyden step.

    The full Jacobian at the new iterate is evaluated once and used both to
    pick the basis direction and as the update target ``y = J(x+) e_i``.
    """
    x_new, f_new = _quasi_newton_move(p, state)
    J_new = _jacobian(p, x_new, fd)
    i = greedy_direction(state.pair.B, J_new)
    return _directional_update(state, x_new, f_new, basis_vector(p.n, i), J_new[:, i].copy(), i)


def random_broyden_step(p, state, stream, rule=DirectionRule(DirectionKind.RANDOM_BASIS), fd=False):
    """Random Broyden step; basis rules evaluate a single Jacobian column."""
    x_new, f_new = _quasi_newton_move(p, state)
    u, i = random_direction(p.n, rule, stream)
    if fd:
        y = fd_column(p, x_new, u)
    elif i is not None:
        y = p.J_column(x_new, i)
    else:
        y = p.jvp(x_new, u)
    return _directional_update(state, x_new, f_new, u, y, i)


def bad_broyden_step(p, state, rebuild_B=False):
    """Bad Broyden step: the inverse is updated directly."""
    x_new, f_new = _quasi_newton_move(p, state)
    u = x_new - state.x
    if not np.any(u):
        return _advance(state, x_new, f_new, state.pair)
    y = f_new - state.fx
    H = broyden_bad_update(state.pair.H, y, u)
    B = LUFactor(H).inverse() if rebuild_B else None
    return _advance(state, x_new, f_new, JacobianPair(B, H))


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def initial_jacobian(p, x0, cfg):
    """``B_0`` for the configured initialisation scheme."""
    if cfg.init is InitScheme.EXACT_J0:
        return p.J(x0)
    if cfg.init is InitScheme.SCALED_IDENTITY:
        return cfg.scale * np.eye(p.n)
    if cfg.init is InitScheme.SCALED_J0:
        return cfg.scale * p.J(x0)
    if p.x_star is None:
        raise ValueError("scaled-jstar initialisation needs a known solution")
    return cfg.scale * p.J(p.x_star)


def _make_record(p, state, cfg):
    rec = IterationRecord(k=state.k, res_norm=float(np.linalg.norm(state.fx)))
    if p.x_star is not None:
        rec.r_k = float(np.linalg.norm(state.x - p.x_star))
    if cfg.record_sigma:
        J = p.J(state.x)
        if cfg.method is Method.NEWTON:
            rec.sigma_abs = 0.0
        else:
            B = state.pair.B if state.pair.B is not None else LUFactor(state.pair.H).inverse()
            rec.sigma_abs = frobenius_norm(B - J)
        rec.sigma_rel = rec.sigma_abs / frobenius_norm(J)
    if cfg.debug and state.pair is not None and state.pair.B is not None:
        rec.inverse_residual = state.pair.inverse_residual()
    return rec


def _initial_state(p, x0, cfg, B0=None):
    fx = p.F(x0)
    _check_finite(x0, fx)
    if cfg.method is Method.NEWTON:
        return SolverState(x=x0, fx=fx)
    if B0 is None:
        B0 = initial_jacobian(p, x0, cfg)
    H0 = LUFactor(B0).inverse()
    keep_B = cfg.method is not Method.BAD or cfg.debug
    return SolverState(x=x0, fx=fx, pair=JacobianPair(B0 if keep_B else None, H0))


def solve(p, x0, cfg=SolverConfig(), observer=None, B0=None):
    """Iterate from ``x0`` until the residual drops below ``cfg.tol_residual``.

    ``observer(problem, state)`` is called once per recorded iterate, after
    the record is made; it must not modify the state. An explicit ``B0``
    overrides ``cfg.init``.
    """
    t0 = time.perf_counter()
    x0 = np.array(x0, dtype=np.float64)
    stream = make_rng(cfg.seed, STREAM_DIRECTIONS, cfg.direction.seed)
    fd = cfg.fd_jacobian
    trace = IterationTrace(metadata={
        "config": cfg.to_dict(),
        "problem": p.descriptor(),
        "rng": RNG_IDENTITY,
        "oracle_assisted": cfg.init is InitScheme.SCALED_JSTAR,
        "fd_jacobian": fd,
    })
    if B0 is not None:
        B0 = np.array(B0, dtype=np.float64)
        trace.metadata["config"]["init"] = "explicit"
    if fd:
        trace.metadata["note"] = "finite-difference Jacobian actions; outside the analysed method"

    step = {
        Method.CLASSICAL: lambda s: classical_broyden_step(p, s),
        Method.BAD: lambda s: bad_broyden_step(p, s, rebuild_B=cfg.debug),
        Method.GREEDY: lambda s: greedy_broyden_step(p, s, fd=fd),
        Method.RANDOM: lambda s: random_broyden_step(p, s, stream, cfg.direction, fd=fd),
    }.get(cfg.method)

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            state = _initial_state(p, x0, cfg, B0)
        except SingularMatrix as exc:
            trace.status, trace.message = Status.DEGENERATE, f"B0 singular: {exc}"
            state = None
            # x0 itself is fine, so the trace still gets its k=0 row
            trace.records.append(_make_record(p, SolverState(x=x0, fx=p.F(x0)), config_with(cfg, record_sigma=False)))
            trace.x = x0
        except DomainError as exc:
            trace.status, trace.message = Status.DOMAIN_ERROR, str(exc)
            state = None

        while state is not None:
            rec = _make_record(p, state, cfg)
            trace.records.append(rec)
            trace.x = state.x
            if observer is not None:
                observer(p, state)
            if rec.res_norm <= cfg.tol_residual:
                trace.status = Status.CONVERGED
                break
            if state.k >= cfg.max_iters:
                trace.status = Status.MAX_ITERS
                break
            try:
                if step is None:
                    x_new = newton_step(p, state.x)
                    f_new = p.F(x_new)
                    _check_finite(x_new, f_new)
                    new = _advance(state, x_new, f_new, None)
                else:
                    new = step(state)
            except (DegenerateUpdate, ZeroDirection, SingularMatrix) as exc:
                trace.status, trace.message = Status.DEGENERATE, f"{type(exc).__name__}: {exc}"
                break
            except DomainError as exc:
                trace.status, trace.message = Status.DOMAIN_ERROR, f"{type(exc).__name__}: {exc}"
                break
            rec.step_norm = new.step_norm
            rec.direction_index = new.direction_index
            state = new

    trace.metadata["inverse_refreshes"] = state.refreshes if state is not None else 0
    trace.metadata["status"] = trace.status.value
    trace.metadata["message"] = trace.message
    trace.metadata["wall_time_s"] = time.perf_counter() - t0
    return trace


def config_with(cfg, **changes):
    return replace(cfg, **changes)
