"""Security games with multiple independent defenders and a reimbursing
coordinator.

Defender i spreads effort x_{i,t} in [0,1] over her targets T_i with total
effort at most b_i. A target covered by several defenders stays unprotected
with probability u_t = prod_i (1 - x_{i,t}); the attacker picks target t with
probability p_t = softmax(-omega (1-u_t) + a_t)_t. Every payoff in sight has
the shared shape

    V(w) = sum_t w_t u_t p_t

for per-target weights w: defender i uses w_t = U_{i,t} + pi_{i,t} on T_i,
the leader uses her penalties U_t, and the paid reimbursement uses
w_t = sum_i pi_{i,t}. Gradients and Hessians below differentiate V through u
and the softmax; follower oracles negate into minimization orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..model import FollowerSpec, GameInstance, LeaderProblem, StrategySpace


@dataclass(frozen=True)
class SsgInstance:
    seed: int
    n: int
    num_targets: int
    m: int
    target_sets: np.ndarray        # (n, m) target indices per defender
    defender_penalties: np.ndarray  # (n, m) U_{i,t} < 0, aligned with target_sets
    leader_penalties: np.ndarray    # (T,)  U_t < 0
    attractiveness: np.ndarray      # (T,)  a_t
    budgets: np.ndarray             # (n,)  effort caps b_i
    omega: float = 5.0
    budget: float = 1.0

    kind = "ssg"

    @property
    def param_dim(self) -> int:
        return self.n * self.m


def generate(seed: int, n: int = 5, num_targets: int = 100, m: int = 50,
             omega: float = 5.0, budget: float = 1.0) -> SsgInstance:
    """Seeded instance: penalties U(-10, 0), attractiveness N(0, 1), target
    subsets sampled without replacement, effort caps b_i = m/5 (< m so the
    effort polytope has interior; reproduces b=10 at the full m=50 scale)."""
    if seed < 1:
        raise ValueError("seed must be >= 1")
    if m > num_targets:
        raise ValueError("each defender's subset cannot exceed the target set")
    rng = np.random.default_rng(seed)
    target_sets = np.stack([
        np.sort(rng.choice(num_targets, size=m, replace=False)) for _ in range(n)])
    defender_penalties = rng.uniform(-10.0, 0.0, size=(n, m))
    leader_penalties = rng.uniform(-10.0, 0.0, size=num_targets)
    attractiveness = rng.standard_normal(num_targets)
    budgets = np.full(n, m / 5.0)
    return SsgInstance(seed=seed, n=n, num_targets=num_targets, m=m,
                       target_sets=target_sets,
                       defender_penalties=defender_penalties,
                       leader_penalties=leader_penalties,
                       attractiveness=attractiveness, budgets=budgets,
                       omega=omega, budget=budget)


class _Coverage:
    """Per-point shared quantities: unprotected products with leave-one-out /
    leave-two-out variants, attack softmax, and its slopes."""

    def __init__(self, inst: SsgInstance, xflat):
        n, m, T = inst.n, inst.m, inst.num_targets
        self.inst = inst
        self.tau = inst.target_sets.reshape(-1)           # target of coordinate
        self.owner = np.repeat(np.arange(n), m)           # follower of coordinate
        self.v = 1.0 - xflat
        members = [[] for _ in range(T)]
        for alpha, t in enumerate(self.tau):
            members[t].append(alpha)
        self.members = [np.array(mm, dtype=int) for mm in members]
        self.u = np.ones(T)
        self.e = np.zeros(xflat.size)                     # leave-one-out products
        for t, mm in enumerate(self.members):
            if mm.size == 0:
                continue
            vals = self.v[mm]
            self.u[t] = np.prod(vals)
            for pos, alpha in enumerate(mm):
                self.e[alpha] = np.prod(np.delete(vals, pos))
        z = -inst.omega * (1.0 - self.u) + inst.attractiveness
        z = z - z.max()
        ez = np.exp(z)
        self.p = ez / ez.sum()
        self.zeta = -inst.omega * self.e                  # dz_{tau_a}/dx_a

    def pair_products(self, t):
        """Leave-two-out products g[a,b] for all member pairs of target t."""
        mm = self.members[t]
        vals = self.v[mm]
        k = mm.size
        g = np.zeros((k, k))
        for a in range(k):
            for b in range(a + 1, k):
                keep = np.delete(vals, [a, b])
                g[a, b] = g[b, a] = np.prod(keep)
        return g

    def value(self, w):
        return float(np.sum(w * self.u * self.p))

    def grad(self, w):
        """dV/dx over all coordinates."""
        a = self.tau
        s1 = w * self.u * self.p
        phi = s1.sum()
        return -w[a] * self.e * self.p[a] + self.zeta * (s1[a] - self.p[a] * phi)

    def hess(self, w):
        """d2V/dx2 over all coordinates."""
        a = self.tau
        s1 = w * self.u * self.p
        phi = s1.sum()
        q1 = w[a] * self.e * self.p[a]
        zp = self.zeta * self.p[a]
        zs = self.zeta * s1[a]
        H = (np.outer(q1, zp) + np.outer(zp, q1)
             - np.outer(zs, zp) - np.outer(zp, zs)
             + 2.0 * phi * np.outer(zp, zp))
        for t, mm in enumerate(self.members):
            if mm.size == 0:
                continue
            zt = self.zeta[mm]
            q1t = q1[mm]
            diag_term = s1[t] - self.p[t] * phi
            block = (-np.outer(q1t, zt) - np.outer(zt, q1t)
                     + diag_term * np.outer(zt, zt))
            g = self.pair_products(t)
            block += g * (w[t] * self.p[t] + self.inst.omega * diag_term)
            H[np.ix_(mm, mm)] += block
        return H

    def grad_weight_cross(self, rows):
        """d(grad_alpha)/dw_t for coordinates ``rows``: an (len(rows), T)
        matrix; used for the pi-cross blocks (w is affine in pi)."""
        a = self.tau[rows]
        up = self.u * self.p
        out = -self.zeta[rows, None] * np.outer(self.p[a], up)
        cols = a
        out[np.arange(len(rows)), cols] += (-self.e[rows] * self.p[a]
                                            + self.zeta[rows] * up[a])
        return out


def coverage_and_attack(inst: SsgInstance, blocks):
    """(effective coverage y, attack distribution p) at the joint strategy."""
    xflat = np.concatenate([np.asarray(b, dtype=float) for b in blocks])
    if xflat.size != inst.n * inst.m:
        raise DimensionMismatch("joint strategy does not match the instance")
    ctx = _Coverage(inst, xflat)
    return 1.0 - ctx.u, ctx.p


def _follower_weights(inst: SsgInstance, pi, i):
    w = np.zeros(inst.num_targets)
    w[inst.target_sets[i]] = inst.defender_penalties[i] + pi[i * inst.m:(i + 1) * inst.m]
    return w


def _paid_weights(inst: SsgInstance, pi):
    w = np.zeros(inst.num_targets)
    np.add.at(w, inst.target_sets.reshape(-1), pi)
    return w


def objective_values(inst: SsgInstance, blocks, pi):
    """(follower payoffs, leader payoff, budget constraint value)."""
    pi = np.asarray(pi, dtype=float)
    xflat = np.concatenate([np.asarray(b, dtype=float) for b in blocks])
    ctx = _Coverage(inst, xflat)
    followers = np.array([ctx.value(_follower_weights(inst, pi, i))
                          for i in range(inst.n)])
    leader = ctx.value(inst.leader_penalties)
    paid = ctx.value(_paid_weights(inst, pi)) - inst.budget
    return followers, leader, paid


def _effort_space(inst: SsgInstance, i) -> StrategySpace:
    m = inst.m
    G = np.vstack([-np.eye(m), np.eye(m), np.ones((1, m))])
    h = np.concatenate([np.zeros(m), np.ones(m), [inst.budgets[i]]])
    return StrategySpace(A=np.zeros((0, m)), b=np.zeros(0), G=G, h=h, dim=m)


def build_game(inst: SsgInstance) -> GameInstance:
    n, m = inst.n, inst.m

    def flat(blocks):
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])

    def follower(i):
        space = _effort_space(inst, i)
        rows = np.arange(i * m, (i + 1) * m)

        def value(blocks, pi):
            ctx = _Coverage(inst, flat(blocks))
            return -ctx.value(_follower_weights(inst, pi, i))

        def grad(blocks, pi):
            ctx = _Coverage(inst, flat(blocks))
            return -ctx.grad(_follower_weights(inst, pi, i))[rows]

        def hess_x(blocks, pi):
            ctx = _Coverage(inst, flat(blocks))
            H = -ctx.hess(_follower_weights(inst, pi, i))
            return [H[np.ix_(rows, np.arange(j * m, (j + 1) * m))] for j in range(n)]

        def hess_pi(blocks, pi):
            ctx = _Coverage(inst, flat(blocks))
            cross_w = -ctx.grad_weight_cross(rows)      # (m, T)
            out = np.zeros((m, n * m))
            # only follower i's own subsidies enter her weights
            out[:, i * m:(i + 1) * m] = cross_w[:, inst.target_sets[i]]
            return out

        return FollowerSpec(index=i, space=space, value=value, grad=grad,
                            hess_x=hess_x, hess_pi=hess_pi)

    def lead_value(blocks, pi):
        ctx = _Coverage(inst, flat(blocks))
        return ctx.value(inst.leader_penalties)

    def lead_grad_x(blocks, pi):
        ctx = _Coverage(inst, flat(blocks))
        return ctx.grad(inst.leader_penalties)

    def lead_grad_pi(blocks, pi):
        return np.zeros(inst.param_dim)

    def constraints(blocks, pi):
        ctx = _Coverage(inst, flat(blocks))
        return np.array([ctx.value(_paid_weights(inst, np.asarray(pi))) - inst.budget])

    def cons_jac_x(blocks, pi):
        ctx = _Coverage(inst, flat(blocks))
        return ctx.grad(_paid_weights(inst, np.asarray(pi)))[None, :]

    def cons_jac_pi(blocks, pi):
        ctx = _Coverage(inst, flat(blocks))
        up = ctx.u * ctx.p
        return up[inst.target_sets.reshape(-1)][None, :]

    leader = LeaderProblem(
        value=lead_value, grad_x=lead_grad_x, grad_pi=lead_grad_pi,
        constraints=constraints, cons_jac_x=cons_jac_x, cons_jac_pi=cons_jac_pi,
        param_dim=inst.param_dim,
        param_lower=np.zeros(inst.param_dim),
        param_upper=np.full(inst.param_dim, np.inf),
        n_constraints=1)

    return GameInstance(followers=tuple(follower(i) for i in range(n)),
                        leader=leader)
