"""Leader optimization: stochastic gradient descent on the penalized
augmented Lagrangian with slack variables and periodic multiplier updates.

The minimized objective for leader strategy pi, slack s >= 0, multipliers
lam and penalty mu is

    L(pi, s; lam) = -f(x*, pi) + lam . (g(x*, pi) + s)
                    + (mu/2) ||g(x*, pi) + s||^2

with x* drawn from the stochastic equilibrium oracle each step (single-sample
estimate of the expectation; mini-batching is a config option). The
multiplier step is lam <- lam + mu (g + s): the ascent direction for the
stated Lagrangian, which drives violations down.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumPoint, OracleConfig, sample_equilibrium
from .errors import DimensionMismatch
from .kkt import EquilibriumJacobian, assemble_kkt, solve_equilibrium_jacobian
from .model import Array, GameInstance


@dataclass
class LagrangianState:
    """Mutable optimizer state; slack stays non-negative and pi stays inside
    the leader's box at every iterate."""

    pi: Array
    slack: Array
    multipliers: Array
    penalty: float
    step_size: float
    period: int
    iteration: int = 0


@dataclass(frozen=True)
class TrajectoryRecord:
    iteration: int
    sample_seed: int
    objective: float
    constraints: tuple[float, ...]
    lagrangian: float
    violation: float
    ni_residual: float
    regularized: bool
    converged: bool
    forward_ms: float
    backward_ms: float
    wall_ms: float


@dataclass
class RunTrajectory:
    """Append-only per-iteration log of one optimization run."""

    records: list[TrajectoryRecord] = field(default_factory=list)

    def append(self, rec: TrajectoryRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class OptimizerConfig:
    """Algorithm defaults follow the experimental setup: learning rate 0.01,
    5000 gradient steps, multiplier update period 100."""

    step_size: float = 0.01
    period: int = 100
    penalty: float = 10.0
    total_iters: int = 5000
    seed: int = 1
    batch_size: int = 1

    def __post_init__(self):
        if self.step_size <= 0 or self.penalty <= 0:
            raise ValueError("step_size and penalty must be positive")
        if self.period < 1 or self.total_iters < 1 or self.batch_size < 1:
            raise ValueError("period, total_iters and batch_size must be >= 1")


def lagrangian_value(f_val: float, g_val: Array, state: LagrangianState) -> float:
    """Single-sample estimate -f + lam.(g+s) + (mu/2)||g+s||^2."""
    g_val = np.asarray(g_val, dtype=float)
    if g_val.shape != state.slack.shape:
        raise DimensionMismatch("constraint vector does not match the slack")
    gs = g_val + state.slack
    return float(-f_val + state.multipliers @ gs
                 + 0.5 * state.penalty * gs @ gs)


def sampled_lagrangian_gradient(game: GameInstance, state: LagrangianState,
                                eq: EquilibriumPoint, J: EquilibriumJacobian):
    """(dL/dpi, dL/ds) at one sampled equilibrium.

    The pi-gradient chains the explicit partials with the equilibrium
    response: dL/dpi = L_pi + L_x . dx*/dpi.
    """
    blocks = list(eq.x.blocks)
    lead = game.leader
    pi = state.pi
    g_val = lead.constraints(blocks, pi)
    weight = state.multipliers + state.penalty * (g_val + state.slack)

    grad_pi = -lead.grad_pi(blocks, pi)
    grad_x = -lead.grad_x(blocks, pi)
    if lead.n_constraints:
        grad_pi = grad_pi + weight @ lead.cons_jac_pi(blocks, pi)
        grad_x = grad_x + weight @ lead.cons_jac_x(blocks, pi)
    grad_pi = grad_pi + grad_x @ J.dx_dpi
    grad_s = weight.copy()
    return grad_pi, grad_s


def _violation(g_val):
    return float(np.max(np.maximum(g_val, 0.0), initial=0.0))


def augmented_lagrangian_solve(game: GameInstance, pi0: Array,
                               cfg: OptimizerConfig | None = None,
                               oracle_cfg: OracleConfig | None = None,
                               ridge: float = 1e-8, on_iteration=None):
    """Run the stochastic augmented-Lagrangian loop; returns (pi, trajectory).

    Oracle non-convergence and regularized KKT solves are recorded in the
    trajectory, never raised: the loop continues with the sampled iterate.
    ``on_iteration(state)`` is invoked after every update when given.
    """
    cfg = cfg or OptimizerConfig()
    oracle_cfg = oracle_cfg or OracleConfig()
    lead = game.leader
    lo, hi = lead.param_lower, lead.param_upper
    pi = np.clip(np.asarray(pi0, dtype=float), lo, hi)
    if pi.shape != (lead.param_dim,):
        raise DimensionMismatch("pi0 does not match the leader's parameter dim")

    # one seed per (iteration, batch member), plus one for slack initialization
    seed_rng = np.random.default_rng(cfg.seed)
    seeds = seed_rng.integers(0, 2**62, size=cfg.total_iters * cfg.batch_size + 1)

    eq0 = sample_equilibrium(game, pi, int(seeds[0]), oracle_cfg)
    g0 = lead.constraints(list(eq0.x.blocks), pi)
    state = LagrangianState(pi=pi, slack=np.maximum(-g0, 0.0),
                            multipliers=np.zeros(lead.n_constraints),
                            penalty=cfg.penalty, step_size=cfg.step_size,
                            period=cfg.period)

    traj = RunTrajectory()
    for it in range(1, cfg.total_iters + 1):
        t_start = time.perf_counter()
        grad_pi = np.zeros_like(state.pi)
        grad_s = np.zeros_like(state.slack)
        f_acc = 0.0
        g_acc = np.zeros(lead.n_constraints)
        ni_worst = 0.0
        regularized = False
        converged = True
        forward_ms = backward_ms = 0.0
        first_seed = int(seeds[1 + (it - 1) * cfg.batch_size])
        for b in range(cfg.batch_size):
            seed = int(seeds[1 + (it - 1) * cfg.batch_size + b])
            t0 = time.perf_counter()
            eq = sample_equilibrium(game, state.pi, seed, oracle_cfg)
            t1 = time.perf_counter()
            J = solve_equilibrium_jacobian(assemble_kkt(game, eq, state.pi),
                                           ridge=ridge)
            gp, gs = sampled_lagrangian_gradient(game, state, eq, J)
            t2 = time.perf_counter()
            forward_ms += (t1 - t0) * 1e3
            backward_ms += (t2 - t1) * 1e3
            grad_pi += gp / cfg.batch_size
            grad_s += gs / cfg.batch_size
            blocks = list(eq.x.blocks)
            f_acc += lead.value(blocks, state.pi) / cfg.batch_size
            g_acc += lead.constraints(blocks, state.pi) / cfg.batch_size
            ni_worst = max(ni_worst, eq.ni_residual)
            regularized = regularized or J.regularized
            converged = converged and eq.converged
        lag = lagrangian_value(f_acc, g_acc, state)

        state.pi = np.clip(state.pi - state.step_size * grad_pi, lo, hi)
        state.slack = np.maximum(state.slack - state.step_size * grad_s, 0.0)
        state.iteration = it
        if it % cfg.period == 0:
            state.multipliers = state.multipliers + state.penalty * (g_acc + state.slack)

        traj.append(TrajectoryRecord(
            iteration=it, sample_seed=first_seed, objective=f_acc,
            constraints=tuple(float(v) for v in g_acc), lagrangian=lag,
            violation=_violation(g_acc), ni_residual=ni_worst,
            regularized=regularized, converged=converged,
            forward_ms=forward_ms, backward_ms=backward_ms,
            wall_ms=(time.perf_counter() - t_start) * 1e3))
        if on_iteration is not None:
            on_iteration(state)
    return state.pi, traj
