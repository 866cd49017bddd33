"""Differentiation through the concatenated KKT system of the followers' game.

At a sampled equilibrium with recovered duals, the total derivative of the
stacked KKT conditions gives a square linear system

    [ grad_x F        G^T              A^T ] [ dx/dpi  ]   [ -grad_pi F ]
    [ Diag(l*) G   Diag(G x* - h)      0   ] [ dl/dpi  ] = [     0      ]
    [ A                0               0   ] [ dnu/dpi ]   [     0      ]

whose solution carries the equilibrium sensitivity dx*/dpi. Constraint data
is constant, so no dG/dh/dA/db terms appear.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .equilibrium import (EquilibriumPoint, OracleConfig, polish_equilibrium,
                          sample_equilibrium)
from .errors import BranchJump, DimensionMismatch, SingularSystem
from .model import Array, GameInstance

DEFAULT_RIDGE = 1e-8
COND_THRESHOLD = 1e12
RESIDUAL_BOUND = 1e-8


@dataclass(frozen=True)
class BlockRanges:
    """Row/column ranges of one follower inside the concatenated system."""

    primal: range
    ineq: range
    eq: range


@dataclass(frozen=True)
class KktAssembly:
    """Square KKT Jacobian M and right-hand side R = [-grad_pi F; 0; 0]."""

    M: Array
    R: Array
    index: tuple[BlockRanges, ...]
    n_primal: int
    n_ineq: int
    n_eq: int

    @property
    def size(self) -> int:
        return self.M.shape[0]


def assemble_kkt(game: GameInstance, eq: EquilibriumPoint, pi: Array) -> KktAssembly:
    """Populate M and R at the equilibrium ``eq`` (duals must be present)."""
    n = game.n_followers
    if len(eq.x.blocks) != n or len(eq.duals_ineq) != n or len(eq.duals_eq) != n:
        raise DimensionMismatch("equilibrium point does not match the game")
    dims = game.block_dims
    n_ineq_i = [f.space.G.shape[0] for f in game.followers]
    n_eq_i = [f.space.A.shape[0] for f in game.followers]
    Lx, Lg, La = sum(dims), sum(n_ineq_i), sum(n_eq_i)
    L = Lx + Lg + La
    pi = np.asarray(pi, dtype=float)
    P = pi.size

    x_off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    g_off = np.concatenate([[0], np.cumsum(n_ineq_i)]).astype(int)
    a_off = np.concatenate([[0], np.cumsum(n_eq_i)]).astype(int)
    index = tuple(
        BlockRanges(primal=range(x_off[i], x_off[i + 1]),
                    ineq=range(Lx + g_off[i], Lx + g_off[i + 1]),
                    eq=range(Lx + Lg + a_off[i], Lx + Lg + a_off[i + 1]))
        for i in range(n))

    M = np.zeros((L, L))
    R = np.zeros((L, P))
    blocks = list(eq.x.blocks)
    for i, spec in enumerate(game.followers):
        ri = index[i]
        hx = spec.hess_x(blocks, pi)
        for j in range(n):
            M[np.ix_(ri.primal, index[j].primal)] = hx[j]
        M[np.ix_(ri.primal, ri.ineq)] = spec.space.G.T
        M[np.ix_(ri.primal, ri.eq)] = spec.space.A.T
        if n_ineq_i[i]:
            lam = eq.duals_ineq[i]
            M[np.ix_(ri.ineq, ri.primal)] = lam[:, None] * spec.space.G
            slack = spec.space.G @ blocks[i] - spec.space.h
            M[np.ix_(ri.ineq, ri.ineq)] = np.diag(slack)
        if n_eq_i[i]:
            M[np.ix_(ri.eq, ri.primal)] = spec.space.A
        R[ri.primal, :] = -np.asarray(spec.hess_pi(blocks, pi), dtype=float)
    return KktAssembly(M=M, R=R, index=index, n_primal=Lx, n_ineq=Lg, n_eq=La)


@dataclass(frozen=True)
class EquilibriumJacobian:
    """Solution blocks of the KKT linear system."""

    dx_dpi: Array
    dlambda_dpi: Array
    dnu_dpi: Array
    condition_estimate: float
    regularized: bool
    ridge: float


def _lu_condition(M):
    """LU factorization plus a 1-norm condition estimate via LAPACK gecon."""
    anorm = np.linalg.norm(M, 1) if M.size else 0.0
    lu, piv, info = lapack.dgetrf(M)
    if info != 0:
        return None, None, np.inf
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if (info != 0 or rcond == 0.0) else 1.0 / rcond
    return lu, piv, cond


def solve_equilibrium_jacobian(asm: KktAssembly, ridge: float = DEFAULT_RIDGE,
                               cond_threshold: float = COND_THRESHOLD) -> EquilibriumJacobian:
    """Solve M J = R by pivoted LU; fall back to M + ridge*I when the matrix
    is singular or badly conditioned (flagged in the result)."""
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    M, R = asm.M, asm.R
    regularized = False
    lu, piv, cond = _lu_condition(M)
    J = None
    if lu is not None and cond <= cond_threshold:
        J, info = lapack.dgetrs(lu, piv, R)
        if info != 0:
            J = None
        else:
            resid = np.max(np.abs(M @ J - R), initial=0.0)
            if resid > RESIDUAL_BOUND * (1.0 + np.max(np.abs(R), initial=0.0)):
                J = None
    if J is None:
        regularized = True
        lu_r, piv_r, cond_r = _lu_condition(M + ridge * np.eye(asm.size))
        if lu_r is None:
            raise SingularSystem("KKT matrix singular even after ridge regularization")
        J, info = lapack.dgetrs(lu_r, piv_r, R)
        if info != 0:
            raise SingularSystem("regularized KKT solve failed")
    Lx, Lg = asm.n_primal, asm.n_ineq
    return EquilibriumJacobian(dx_dpi=J[:Lx], dlambda_dpi=J[Lx:Lx + Lg],
                               dnu_dpi=J[Lx + Lg:], condition_estimate=cond,
                               regularized=regularized,
                               ridge=ridge if regularized else 0.0)


def equilibrium_jacobian(game: GameInstance, eq: EquilibriumPoint, pi: Array,
                         ridge: float = DEFAULT_RIDGE) -> EquilibriumJacobian:
    """Convenience wrapper: assemble at ``eq`` and solve."""
    return solve_equilibrium_jacobian(assemble_kkt(game, eq, pi), ridge=ridge)


def finite_difference_jacobian(game: GameInstance, pi: Array, seed: int,
                               h: float = 1e-5,
                               cfg: OracleConfig | None = None,
                               base: EquilibriumPoint | None = None) -> Array:
    """Independent testing oracle: warm-started central differences of the
    sampled equilibrium, one leader coordinate at a time.

    Each perturbed solve is polished from the base equilibrium so the probe
    stays on the same equilibrium branch; a displacement larger than 10*h
    raises BranchJump (the oracle is invalid there, not the solver).
    """
    cfg = cfg or OracleConfig()
    fd_cfg = replace(cfg, br_tol=min(cfg.br_tol, 1e-14),
                     step_tol=min(cfg.step_tol, 3e-15))
    pi = np.asarray(pi, dtype=float)
    if base is None:
        base = sample_equilibrium(game, pi, seed, fd_cfg)
    # drive the reference point to the contraction floor: the central
    # quotient divides fixed-point noise by 2h, so probe accuracy must sit
    # near machine precision for small Jacobian entries to be meaningful
    x0 = polish_equilibrium(game, base.x, pi, fd_cfg, step_tol=fd_cfg.step_tol)
    x0_cat = x0.concat
    cols = []
    for j in range(pi.size):
        shifted = {}
        for sign in (1.0, -1.0):
            pi_s = pi.copy()
            pi_s[j] += sign * h
            xs = polish_equilibrium(game, x0, pi_s, fd_cfg, step_tol=fd_cfg.step_tol)
            if np.max(np.abs(xs.concat - x0_cat), initial=0.0) > 10.0 * h:
                raise BranchJump(
                    f"perturbed equilibrium moved more than 10*h along pi[{j}]")
            shifted[sign] = xs.concat
        cols.append((shifted[1.0] - shifted[-1.0]) / (2.0 * h))
    return np.stack(cols, axis=1)


def forward_backward_timing(game: GameInstance, pi: Array, seed: int,
                            cfg: OracleConfig | None = None):
    """Wall time of one forward (relaxation) vs backward (assemble+solve)
    pass, for the cost-shape observation."""
    cfg = cfg or OracleConfig()
    t0 = time.perf_counter()
    eq = sample_equilibrium(game, pi, seed, cfg)
    t1 = time.perf_counter()
    asm = assemble_kkt(game, eq, pi)
    solve_equilibrium_jacobian(asm)
    t2 = time.perf_counter()
    return (t1 - t0) * 1e3, (t2 - t1) * 1e3
