"""Game data model: polyhedral strategy spaces, derivative oracles, projections.

Conventions used throughout the package:

* followers MINIMIZE their objective (oracles stored on ``FollowerSpec`` are
  already in minimization orientation; game builders that are naturally
  stated as payoffs negate when wiring the spec),
* the leader MAXIMIZES her payoff; the optimizer works on the negated value,
* leader constraints use the ``g(x, pi) <= 0`` orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import DimensionMismatch, InfeasibleSpace, NonConvergence

Array = np.ndarray

_RANK_TOL = 1e-10


def _as_2d(M, ncols):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return M.reshape(0, ncols)
    if M.ndim != 2 or M.shape[1] != ncols:
        raise DimensionMismatch(f"expected matrix with {ncols} columns, got shape {M.shape}")
    return M


def _box_bounds_from_rows(G, h):
    """If every row of G is +/- a coordinate axis, return (lower, upper) bounds.

    Returns None when any row involves more than one variable or a non-unit
    coefficient.
    """
    dim = G.shape[1]
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    for row, rhs in zip(G, h):
        nz = np.nonzero(row)[0]
        if len(nz) != 1:
            return None
        j = nz[0]
        c = row[j]
        if np.isclose(c, 1.0):
            upper[j] = min(upper[j], rhs)
        elif np.isclose(c, -1.0):
            lower[j] = max(lower[j], -rhs)
        else:
            return None
    return lower, upper


@dataclass(frozen=True)
class StrategySpace:
    """Polyhedron ``{x : A x = b, G x <= h}`` for one follower.

    ``sample_lower``/``sample_upper`` bound the box from which random
    initializations are drawn (then projected). They default to the box
    implied by single-coordinate rows of G, with unbounded sides widened to a
    span of 10.
    """

    A: Array
    b: Array
    G: Array
    h: Array
    dim: int
    sample_lower: Array | None = None
    sample_upper: Array | None = None
    # derived at construction
    kind: str = field(init=False, default="general")
    box_lower: Array | None = field(init=False, default=None)
    box_upper: Array | None = field(init=False, default=None)
    cap: float = field(init=False, default=np.inf)

    def __post_init__(self):
        if self.dim <= 0:
            raise DimensionMismatch("dim must be positive")
        A = _as_2d(self.A, self.dim)
        G = _as_2d(self.G, self.dim)
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if A.shape[0] == 0:
            b = b.reshape(0)
        if G.shape[0] == 0:
            h = h.reshape(0)
        if A.shape[0] != b.shape[0] or G.shape[0] != h.shape[0]:
            raise DimensionMismatch("constraint matrix / rhs row counts differ")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

        if A.shape[0] > 0:
            # full row rank check via pivoted QR
            _, R, _ = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
            diag = np.abs(np.diag(R))
            rank = int(np.sum(diag > _RANK_TOL * max(1.0, diag.max(initial=0.0))))
            if rank < A.shape[0]:
                raise DimensionMismatch("equality matrix A does not have full row rank")

        object.__setattr__(self, "kind", self._classify())

        lo, up = self._sampling_box()
        object.__setattr__(self, "sample_lower", lo)
        object.__setattr__(self, "sample_upper", up)

        # nonemptiness certificate: one successful projection
        center = 0.5 * (lo + up)
        project_to_space(center, self)

    def _classify(self):
        A, b, G, h, dim = self.A, self.b, self.G, self.h, self.dim
        bounds = _box_bounds_from_rows(G, h) if G.shape[0] > 0 else (
            np.full(dim, -np.inf), np.full(dim, np.inf))
        if A.shape[0] == 0 and bounds is not None:
            lower, upper = bounds
            object.__setattr__(self, "box_lower", lower)
            object.__setattr__(self, "box_upper", upper)
            return "box"
        if (A.shape[0] == 1 and np.allclose(A, 1.0) and np.isclose(b[0], 1.0)
                and bounds is not None):
            lower, upper = bounds
            if np.allclose(lower, 0.0) and np.all(upper >= 1.0 - 1e-12):
                object.__setattr__(self, "box_lower", lower)
                object.__setattr__(self, "box_upper", upper)
                return "simplex"
        if A.shape[0] == 0 and G.shape[0] > 0:
            # box rows plus a single all-ones capacity row
            ones_rows = [k for k, row in enumerate(G) if np.allclose(row, 1.0) and dim > 1]
            if len(ones_rows) == 1:
                rest = np.delete(np.arange(G.shape[0]), ones_rows[0])
                sub = _box_bounds_from_rows(G[rest], h[rest])
                if sub is not None:
                    lower, upper = sub
                    if np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)):
                        object.__setattr__(self, "box_lower", lower)
                        object.__setattr__(self, "box_upper", upper)
                        object.__setattr__(self, "cap", float(h[ones_rows[0]]))
                        return "capped_box"
        return "general"

    def _sampling_box(self):
        if self.sample_lower is not None and self.sample_upper is not None:
            return (np.asarray(self.sample_lower, dtype=float),
                    np.asarray(self.sample_upper, dtype=float))
        if self.box_lower is not None:
            lo = self.box_lower.copy()
            up = self.box_upper.copy()
        else:
            lo = np.full(self.dim, -np.inf)
            up = np.full(self.dim, np.inf)
        lo = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up - 10.0, 0.0))
        up = np.where(np.isfinite(up), up, lo + 10.0)
        return lo, up


def project_simplex(y):
    """Euclidean projection onto the probability simplex (sort-based)."""
    y = np.asarray(y, dtype=float)
    m = y.size
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, m + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def _project_capped_box(y, lower, upper, cap, tol):
    """Project onto {lower <= x <= upper, sum(x) <= cap} by bisection on the
    shift of the clamped point (exact KKT solution of the projection QP)."""
    z = np.clip(y, lower, upper)
    if z.sum() <= cap + tol:
        return z
    if lower.sum() > cap + tol:
        raise InfeasibleSpace("capacity cap below the sum of lower bounds")
    tau_lo, tau_hi = 0.0, float(np.max(y - lower))
    for _ in range(200):
        tau = 0.5 * (tau_lo + tau_hi)
        s = np.clip(y - tau, lower, upper).sum()
        if s > cap:
            tau_lo = tau
        else:
            tau_hi = tau
        if tau_hi - tau_lo < 1e-15 * max(1.0, tau_hi):
            break
    return np.clip(y - 0.5 * (tau_lo + tau_hi), lower, upper)


def _feasible_point(A, b, G, h):
    """Phase-1 feasibility via LP; raises InfeasibleSpace when empty."""
    dim = A.shape[1] if A.shape[0] else G.shape[1]
    res = linprog(np.zeros(dim),
                  A_ub=G if G.shape[0] else None, b_ub=h if G.shape[0] else None,
                  A_eq=A if A.shape[0] else None, b_eq=b if A.shape[0] else None,
                  bounds=[(None, None)] * dim, method="highs")
    if not res.success:
        raise InfeasibleSpace("no feasible point (phase-1 LP failed)")
    return np.asarray(res.x, dtype=float)


def _project_general(y, space, tol):
    """Primal active-set solve of min ||x-y||^2 over the polyhedron."""
    A, b, G, h = space.A, space.b, space.G, space.h
    x = _feasible_point(A, b, G, h)
    n_eq = A.shape[0]
    work = set(np.nonzero(G @ x >= h - tol)[0].tolist())
    max_iter = 10 * space.dim + 10

    for _ in range(max_iter):
        W = sorted(work)
        C = np.vstack([A, G[W]]) if (n_eq or W) else np.zeros((0, space.dim))
        d = np.concatenate([b, h[W]]) if (n_eq or W) else np.zeros(0)
        if C.shape[0]:
            mu, *_ = np.linalg.lstsq(C @ C.T, C @ y - d, rcond=None)
            x_eq = y - C.T @ mu
        else:
            mu = np.zeros(0)
            x_eq = y.copy()
        step = x_eq - x
        if np.max(np.abs(step), initial=0.0) <= tol:
            lam = mu[n_eq:]
            if lam.size == 0 or lam.min() >= -tol:
                return x_eq
            # drop the most negative multiplier's constraint
            work.discard(W[int(np.argmin(lam))])
            continue
        # ratio test against inactive inequalities
        alpha = 1.0
        block = None
        if G.shape[0]:
            Gs = G @ step
            slack = h - G @ x
            for j in range(G.shape[0]):
                if j in work or Gs[j] <= tol:
                    continue
                a_j = slack[j] / Gs[j]
                if a_j < alpha:
                    alpha = a_j
                    block = j
        x = x + alpha * step
        if block is not None:
            work.add(block)
    raise NonConvergence("active-set projection exceeded its iteration cap")


def project_to_space(y, space: StrategySpace, tol: float = 1e-9) -> Array:
    """Euclidean projection of y onto the strategy space.

    Closed-form paths for simplices and boxes; bisection for box+capacity
    polytopes; active-set QP otherwise.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (space.dim,):
        raise DimensionMismatch(f"point has shape {y.shape}, space dim is {space.dim}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if space.kind == "simplex":
        return project_simplex(y)
    if space.kind == "box":
        if np.any(space.box_lower > space.box_upper):
            raise InfeasibleSpace("box has lower > upper")
        return np.clip(y, space.box_lower, space.box_upper)
    if space.kind == "capped_box":
        return _project_capped_box(y, space.box_lower, space.box_upper, space.cap, tol)
    return _project_general(y, space, tol)


def simplex_space(m, with_upper=True):
    """The probability simplex on m coordinates as a StrategySpace.

    ``with_upper`` includes the (redundant) x <= 1 rows so the inequality
    count matches the usual KKT bookkeeping for mixed strategies.
    """
    A = np.ones((1, m))
    b = np.array([1.0])
    if with_upper:
        G = np.vstack([-np.eye(m), np.eye(m)])
        h = np.concatenate([np.zeros(m), np.ones(m)])
    else:
        G = -np.eye(m)
        h = np.zeros(m)
    return StrategySpace(A=A, b=b, G=G, h=h, dim=m)


def box_space(lower, upper, sample_lower=None, sample_upper=None):
    """Axis-aligned box as a StrategySpace; infinite bounds drop their row."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    dim = lower.size
    rows, rhs = [], []
    for j in range(dim):
        if np.isfinite(lower[j]):
            e = np.zeros(dim)
            e[j] = -1.0
            rows.append(e)
            rhs.append(-lower[j])
        if np.isfinite(upper[j]):
            e = np.zeros(dim)
            e[j] = 1.0
            rows.append(e)
            rhs.append(upper[j])
    G = np.array(rows) if rows else np.zeros((0, dim))
    h = np.array(rhs) if rhs else np.zeros(0)
    return StrategySpace(A=np.zeros((0, dim)), b=np.zeros(0), G=G, h=h, dim=dim,
                         sample_lower=sample_lower, sample_upper=sample_upper)


@dataclass(frozen=True)
class JointStrategy:
    """Per-follower strategy blocks with a concatenated view."""

    blocks: tuple[Array, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks",
                           tuple(np.asarray(v, dtype=float) for v in self.blocks))

    @property
    def concat(self) -> Array:
        return np.concatenate(self.blocks) if self.blocks else np.zeros(0)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.blocks)

    @staticmethod
    def from_concat(x, dims: Sequence[int]) -> "JointStrategy":
        x = np.asarray(x, dtype=float)
        if x.size != sum(dims):
            raise DimensionMismatch("concatenated length does not match block dims")
        out = []
        k = 0
        for d in dims:
            out.append(x[k:k + d].copy())
            k += d
        return JointStrategy(blocks=tuple(out))


@dataclass(frozen=True)
class FollowerSpec:
    """One follower: strategy space plus derivative oracles (minimization
    orientation).

    ``hess_x(blocks, pi)`` returns the list of blocks
    d(grad_i)/d x_j for every follower j; ``hess_pi`` the (dim_i, dim_pi)
    block d(grad_i)/d pi. ``closed_form_br``, when provided, returns the
    exact best response and is used by the oracle instead of projected
    gradient.
    """

    index: int
    space: StrategySpace
    value: Callable[[Sequence[Array], Array], float]
    grad: Callable[[Sequence[Array], Array], Array]
    hess_x: Callable[[Sequence[Array], Array], Sequence[Array]]
    hess_pi: Callable[[Sequence[Array], Array], Array]
    closed_form_br: Callable[[Sequence[Array], Array], Array] | None = None


@dataclass(frozen=True)
class LeaderProblem:
    """Leader payoff (maximized), constraints (g <= 0), and their partials."""

    value: Callable[[Sequence[Array], Array], float]
    grad_x: Callable[[Sequence[Array], Array], Array]
    grad_pi: Callable[[Sequence[Array], Array], Array]
    constraints: Callable[[Sequence[Array], Array], Array]
    cons_jac_x: Callable[[Sequence[Array], Array], Array]
    cons_jac_pi: Callable[[Sequence[Array], Array], Array]
    param_dim: int
    param_lower: Array
    param_upper: Array
    n_constraints: int = 0

    def __post_init__(self):
        if self.param_dim <= 0:
            raise DimensionMismatch("param_dim must be positive")
        lo = np.broadcast_to(np.asarray(self.param_lower, dtype=float),
                             (self.param_dim,)).copy()
        up = np.broadcast_to(np.asarray(self.param_upper, dtype=float),
                             (self.param_dim,)).copy()
        object.__setattr__(self, "param_lower", lo)
        object.__setattr__(self, "param_upper", up)


@dataclass(frozen=True)
class GameInstance:
    """Immutable bundle of follower specs and the leader problem."""

    followers: tuple[FollowerSpec, ...]
    leader: LeaderProblem

    @property
    def n_followers(self) -> int:
        return len(self.followers)

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(f.space.dim for f in self.followers)

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    def split(self, x: Array) -> JointStrategy:
        return JointStrategy.from_concat(x, self.block_dims)


def feasibility_residual(x: JointStrategy, game: GameInstance) -> float:
    """Max over followers of max(||A x - b||_inf, max(G x - h, 0)_inf)."""
    if len(x.blocks) != game.n_followers:
        raise DimensionMismatch("joint strategy block count != follower count")
    worst = 0.0
    for xi, spec in zip(x.blocks, game.followers):
        sp = spec.space
        if xi.shape != (sp.dim,):
            raise DimensionMismatch("strategy block of wrong dimension")
        if sp.A.shape[0]:
            worst = max(worst, float(np.max(np.abs(sp.A @ xi - sp.b))))
        if sp.G.shape[0]:
            worst = max(worst, float(np.max(np.maximum(sp.G @ xi - sp.h, 0.0))))
    return worst
