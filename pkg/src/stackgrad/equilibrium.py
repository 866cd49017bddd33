"""Nash equilibrium oracle: damped best-response relaxation with random
initialization, Nikaido-Isoda convergence certificates, and dual recovery.

``sample_equilibrium`` realizes the stochastic oracle O(pi): a seeded uniform
draw over each follower's sampling box, projected to feasibility, then
relaxed to a fixed point of the damped best-response map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .errors import (DimensionMismatch, DualRecoveryFailure, InfeasibleSpace,
                     NonConvergence)
from .model import (Array, FollowerSpec, GameInstance, JointStrategy,
                    feasibility_residual, project_to_space)

_ARMIJO = 1e-4
_NI_SLACK = 1e-10


@dataclass(frozen=True)
class OracleConfig:
    """Knobs of the relaxation oracle.

    ``eq_tol`` is the Nikaido-Isoda certificate; ``step_tol`` additionally
    polishes the fixed point (the NI value scales with the squared distance
    to the equilibrium, so it cannot certify the accuracy that downstream
    derivative checks need on its own).
    """

    relax_weight: float = 0.5
    max_outer_iters: int = 500
    br_tol: float = 1e-9
    br_max_iters: int = 5000
    eq_tol: float = 1e-6
    step_tol: float = 1e-9
    init_distribution: str = "uniform-box"

    def __post_init__(self):
        if not (0.0 < self.relax_weight <= 1.0):
            raise ValueError("relax_weight must be in (0, 1]")
        for name in ("br_tol", "eq_tol", "step_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.init_distribution != "uniform-box":
            raise ValueError(f"unknown init distribution {self.init_distribution!r}")


@dataclass(frozen=True)
class EquilibriumPoint:
    """A sampled equilibrium with residual certificates and recovered duals."""

    x: JointStrategy
    duals_ineq: tuple[Array, ...]
    duals_eq: tuple[Array, ...]
    ni_residual: float
    kkt_residual: float
    init_seed: int
    converged: bool = True
    dual_ok: bool = True
    outer_iterations: int = 0
    ni_history: tuple[float, ...] = ()


def best_response(game: GameInstance, i: int, x: JointStrategy, pi: Array,
                  tol: float = 1e-10, max_iters: int = 5000):
    """Best response of follower i against x_{-i}, warm-started from x_i.

    Returns ``(y, converged)``. Uses the follower's closed-form response when
    available, otherwise projected gradient with a growing trial step and
    Armijo backtracking (halving). Convergence is certified by the unit-step
    projected-gradient fixed-point residual ``||y - P(y - grad)||_inf``.
    """
    spec = game.followers[i]
    blocks = list(x.blocks)
    if spec.closed_form_br is not None:
        y = spec.closed_form_br(blocks, pi)
        return np.asarray(y, dtype=float), True

    space = spec.space

    def f(v):
        blocks[i] = v
        return spec.value(blocks, pi)

    def gradf(v):
        blocks[i] = v
        return spec.grad(blocks, pi)

    y = project_to_space(np.asarray(x.blocks[i], dtype=float), space)
    fy = f(y)
    step = 1.0
    best_y, best_res = y, np.inf
    stagnant = 0
    evals = 0

    def residual(v, g):
        return float(np.max(np.abs(v - project_to_space(v - g, space)), initial=0.0))

    # descent phase: growing trial step, Armijo backtracking by halving.
    # The f comparison cannot resolve progress below sqrt(eps |f|), so this
    # phase only needs to land in the basin; the polish phase finishes.
    while evals < max_iters:
        g = gradf(y)
        evals += 1
        res = residual(y, g)
        if res < 0.9 * best_res:
            best_y, best_res = y, res
            stagnant = 0
        else:
            stagnant += 1
        if best_res <= tol or stagnant >= 8:
            break
        step = min(step * 2.0, 1e12)
        while True:
            y_new = project_to_space(y - step * g, space)
            d = y_new - y
            if f(y_new) <= fy + _ARMIJO * float(g @ d) + 1e-14 * (1.0 + abs(fy)):
                break
            step *= 0.5
            if step < 1e-18:
                break
        if step < 1e-18 or not np.any(d):
            break
        y, fy = y_new, f(y_new)

    # polish phase: fixed-step projected gradient, no objective comparisons,
    # so accuracy is limited by gradient roundoff instead of f roundoff
    eta = 0.5 * step
    y = best_y
    stagnant = 0
    shrinks = 0
    while evals < max_iters and best_res > tol and shrinks < 10:
        g = gradf(y)
        evals += 1
        res = residual(y, g)
        if res < 0.9 * best_res:
            best_y, best_res = y, res
            stagnant = 0
        else:
            stagnant += 1
            if res > 4.0 * best_res:
                # step too long for the local curvature
                eta *= 0.5
                shrinks += 1
                y = best_y
                continue
            if stagnant >= 40:
                break
        y = project_to_space(y - eta * g, space)
    blocks[i] = x.blocks[i]
    return best_y, bool(best_res <= tol)


def _br_sweep(game, x: JointStrategy, pi, cfg: OracleConfig):
    """Best responses and improvement gaps for all followers at x.

    Returns (responses, gaps, all_converged). Gaps are in minimization
    orientation: f_i(x) - f_i(br_i, x_{-i}) >= 0 up to solver slack.
    """
    responses = []
    gaps = []
    ok = True
    blocks = list(x.blocks)
    for i, spec in enumerate(game.followers):
        f_cur = spec.value(blocks, pi)
        y, conv = best_response(game, i, x, pi, tol=cfg.br_tol,
                                max_iters=cfg.br_max_iters)
        ok = ok and conv
        swap = blocks[i]
        blocks[i] = y
        f_br = spec.value(blocks, pi)
        blocks[i] = swap
        responses.append(y)
        gaps.append(f_cur - f_br)
    return responses, gaps, ok


def nikaido_isoda_residual(game: GameInstance, x: JointStrategy, pi: Array,
                           cfg: OracleConfig | None = None) -> float:
    """Sum over followers of their best-response improvement gaps.

    Zero exactly at a Nash equilibrium; tiny negatives from solver slack
    are clamped to 0.
    """
    cfg = cfg or OracleConfig()
    _, gaps, ok = _br_sweep(game, x, pi, cfg)
    if not ok:
        raise NonConvergence("best response did not converge inside the NI evaluation")
    total = float(np.sum(gaps))
    if total < -_NI_SLACK:
        raise NonConvergence(f"Nikaido-Isoda value {total} below the numerical slack")
    return max(total, 0.0)


def recover_duals(game: GameInstance, x_star: JointStrategy, pi: Array,
                  active_tol: float = 1e-7, residual_tol: float = 1e-5,
                  strict: bool = True):
    """Recover (lambda*, nu*) from per-follower stationarity at x_star.

    Inequality j of follower i is marked active iff h_j - (G x)_j <= active_tol;
    active multipliers are fit by non-negative least squares (equality duals
    free), inactive multipliers are zero. Returns
    ``(duals_ineq, duals_eq, kkt_residual)``; raises DualRecoveryFailure when
    strict and the residual exceeds ``residual_tol``.
    """
    blocks = list(x_star.blocks)
    lams, nus = [], []
    worst = 0.0
    for i, spec in enumerate(game.followers):
        sp = spec.space
        grad = np.asarray(spec.grad(blocks, pi), dtype=float)
        n_ineq, n_eq = sp.G.shape[0], sp.A.shape[0]
        lam = np.zeros(n_ineq)
        if n_ineq:
            slack = sp.h - sp.G @ blocks[i]
            active = np.nonzero(slack <= active_tol)[0]
        else:
            active = np.zeros(0, dtype=int)
        cols = []
        if active.size:
            cols.append(sp.G[active].T)
        if n_eq:
            cols.append(sp.A.T)
        if cols:
            C = np.hstack(cols)
            if active.size:
                lb = np.concatenate([np.zeros(active.size), np.full(n_eq, -np.inf)])
                ub = np.full(active.size + n_eq, np.inf)
                sol = lsq_linear(C, -grad, bounds=(lb, ub), tol=1e-14)
                z = sol.x
            else:
                z, *_ = np.linalg.lstsq(C, -grad, rcond=None)
            lam[active] = np.maximum(z[:active.size], 0.0)
            nu = z[active.size:]
        else:
            nu = np.zeros(0)
        stat = grad.copy()
        if n_ineq:
            stat = stat + sp.G.T @ lam
        if n_eq:
            stat = stat + sp.A.T @ nu
        res = float(np.max(np.abs(stat), initial=0.0))
        if n_ineq:
            res = max(res, float(np.max(np.abs(lam * (sp.G @ blocks[i] - sp.h)),
                                        initial=0.0)))
        worst = max(worst, res)
        lams.append(lam)
        nus.append(nu)
    if strict and worst > residual_tol:
        raise DualRecoveryFailure(
            f"KKT residual {worst:.3e} exceeds {residual_tol:.3e} "
            "(degenerate active-set geometry?)",
            duals_ineq=tuple(lams), duals_eq=tuple(nus), residual=worst)
    return tuple(lams), tuple(nus), worst


def relaxation_solve(game: GameInstance, pi: Array, init: JointStrategy,
                     cfg: OracleConfig | None = None, init_seed: int = -1,
                     dual_residual_tol: float | None = None) -> EquilibriumPoint:
    """Damped best-response iteration x <- (1-a) x + a BR(x) to a certified
    Nash equilibrium.

    Stops when the NI residual is within ``cfg.eq_tol`` and the applied step
    is within ``cfg.step_tol``; on iteration exhaustion the best iterate is
    returned with ``converged=False`` (the caller decides).
    """
    cfg = cfg or OracleConfig()
    if feasibility_residual(init, game) > 1e-8:
        raise InfeasibleSpace("relaxation init is not feasible")
    alpha = cfg.relax_weight
    x = init
    history = []
    best_x, best_ni = x, np.inf
    converged = False
    iters = 0
    ni = np.inf
    for k in range(1, cfg.max_outer_iters + 1):
        iters = k
        responses, gaps, ok = _br_sweep(game, x, pi, cfg)
        ni = max(float(np.sum(gaps)), 0.0)
        history.append(ni)
        if ni < best_ni:
            best_x, best_ni = x, ni
        step = max((float(np.max(np.abs(r - b), initial=0.0))
                    for r, b in zip(responses, x.blocks)), default=0.0)
        if ok and ni <= cfg.eq_tol and alpha * step <= cfg.step_tol:
            converged = True
            break
        x = JointStrategy(blocks=tuple(
            (1.0 - alpha) * b + alpha * r for b, r in zip(x.blocks, responses)))
    if not converged:
        x, ni = best_x, best_ni

    tol = dual_residual_tol if dual_residual_tol is not None else 10.0 * cfg.eq_tol
    try:
        lams, nus, kkt_res = recover_duals(game, x, pi, residual_tol=tol, strict=True)
        dual_ok = True
    except DualRecoveryFailure as err:
        lams, nus, kkt_res = err.duals_ineq, err.duals_eq, err.residual
        dual_ok = False
    return EquilibriumPoint(x=x, duals_ineq=lams, duals_eq=nus,
                            ni_residual=ni, kkt_residual=kkt_res,
                            init_seed=init_seed, converged=converged,
                            dual_ok=dual_ok, outer_iterations=iters,
                            ni_history=tuple(history))


def random_feasible_init(game: GameInstance, rng: np.random.Generator) -> JointStrategy:
    """Uniform draw over each follower's sampling box, projected to X_i."""
    blocks = []
    for spec in game.followers:
        sp = spec.space
        y = rng.uniform(sp.sample_lower, sp.sample_upper)
        blocks.append(project_to_space(y, sp))
    return JointStrategy(blocks=tuple(blocks))


def sample_equilibrium(game: GameInstance, pi: Array, rng_seed: int,
                       cfg: OracleConfig | None = None) -> EquilibriumPoint:
    """The stochastic equilibrium oracle O(pi): seeded random initialization
    followed by relaxation. Deterministic in ``rng_seed``."""
    cfg = cfg or OracleConfig()
    rng = np.random.default_rng(int(rng_seed))
    init = random_feasible_init(game, rng)
    return relaxation_solve(game, pi, init, cfg, init_seed=int(rng_seed))


def polish_equilibrium(game: GameInstance, x: JointStrategy, pi: Array,
                       cfg: OracleConfig, step_tol: float,
                       max_iters: int = 400, stall_tol: float = 1e-10) -> JointStrategy:
    """Warm-started damped best-response iteration without certificates.

    Used by finite-difference probes that need the fixed point to much higher
    accuracy than the NI certificate can resolve. Near machine precision the
    step size stops contracting; iteration ends once it stagnates below
    ``stall_tol``.
    """
    alpha = cfg.relax_weight
    best_step = np.inf
    since_improved = 0
    for _ in range(max_iters):
        responses, _, _ = _br_sweep(game, x, pi, cfg)
        step = max((float(np.max(np.abs(r - b), initial=0.0))
                    for r, b in zip(responses, x.blocks)), default=0.0)
        x = JointStrategy(blocks=tuple(
            (1.0 - alpha) * b + alpha * r for b, r in zip(x.blocks, responses)))
        if alpha * step <= step_tol:
            return x
        if step < 0.9 * best_step:
            best_step, since_improved = step, 0
        else:
            since_improved += 1
            if since_improved >= 5 and step <= stall_tol:
                return x  # contraction floor reached (roundoff)
    raise NonConvergence("equilibrium polish exhausted its iteration budget")
