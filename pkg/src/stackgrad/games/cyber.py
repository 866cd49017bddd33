"""Cyber insurance game: interconnected agents choose protection effort, an
insurer sets per-agent plans (compensation I_i, premium rho_i).

Agent i is attacked with probability q_i = sigmoid(-sum_j w_ij x_j + v L_i)
and maximizes

    -c_i x_i - rho_i - (L_i - I_i) q_i - gamma |L_i - I_i| sqrt(q_i (1-q_i)).

The insurer maximizes total revenue sum_i (-I_i q_i + rho_i) subject to each
agent's individual-rationality constraint (insured payoff no worse than the
uninsured payoff). Leader parameter layout: pi = [I_1..I_n, rho_1..rho_n].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatch
from ..model import FollowerSpec, GameInstance, LeaderProblem, box_space

# q is strictly interior for finite inputs; the clip only guards exp underflow
# in the sqrt(q(1-q)) derivatives at extreme intermediate iterates.
_Q_CLIP = 1e-12


@dataclass(frozen=True)
class CyberInstance:
    seed: int
    n: int
    costs: np.ndarray            # c_i ~ U(5, 10)
    losses: np.ndarray           # L_i ~ U(50, 100)
    weights: np.ndarray          # w_ij ~ U(0,1) off-diagonal, U(1,2) diagonal
    risk_aversion: float = 0.01  # gamma
    value_preference: float = 0.0  # v in the attack probability

    kind = "cyber"

    @property
    def param_dim(self) -> int:
        return 2 * self.n


def generate(seed: int, n: int = 10, risk_aversion: float = 0.01,
             value_preference: float = 0.0) -> CyberInstance:
    """Seeded instance; diagonal weights dominate to reflect self-investment."""
    if seed < 1:
        raise ValueError("seed must be >= 1")
    rng = np.random.default_rng(seed)
    costs = rng.uniform(5.0, 10.0, size=n)
    losses = rng.uniform(50.0, 100.0, size=n)
    weights = rng.uniform(0.0, 1.0, size=(n, n))
    weights[np.diag_indices(n)] = rng.uniform(1.0, 2.0, size=n)
    return CyberInstance(seed=seed, n=n, costs=costs, losses=losses,
                         weights=weights, risk_aversion=risk_aversion,
                         value_preference=value_preference)


def attack_probabilities(inst: CyberInstance, xflat) -> np.ndarray:
    xflat = np.asarray(xflat, dtype=float)
    if xflat.size != inst.n:
        raise DimensionMismatch("effort vector length != number of agents")
    return expit(-inst.weights @ xflat + inst.value_preference * inst.losses)


def _split_plan(inst: CyberInstance, pi):
    pi = np.asarray(pi, dtype=float)
    if pi.size != 2 * inst.n:
        raise DimensionMismatch("insurance plan vector must have length 2n")
    return pi[:inst.n], pi[inst.n:]


def _risk_terms(q):
    """sqrt(q(1-q)) and its first two derivatives in q."""
    q = np.clip(q, _Q_CLIP, 1.0 - _Q_CLIP)
    q1 = q * (1.0 - q)
    r = np.sqrt(q1)
    rp = (1.0 - 2.0 * q) / (2.0 * r)
    rpp = -1.0 / r - (1.0 - 2.0 * q) ** 2 / (4.0 * r ** 3)
    return r, rp, rpp


def objective_values(inst: CyberInstance, blocks, pi):
    """(follower payoffs, insurer revenue, IR constraint values g <= 0)."""
    x = np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks])
    I, rho = _split_plan(inst, pi)
    q = attack_probabilities(inst, x)
    r, _, _ = _risk_terms(q)
    gap = inst.losses - I
    gam = inst.risk_aversion
    followers = (-inst.costs * x - rho - gap * q - gam * np.abs(gap) * r)
    leader = float(np.sum(-I * q + rho))
    uninsured = -inst.costs * x - inst.losses * q - gam * inst.losses * r
    ir = uninsured - followers
    return followers, leader, ir


def build_game(inst: CyberInstance) -> GameInstance:
    n = inst.n
    gam = inst.risk_aversion
    W = inst.weights

    def flat(blocks):
        return np.concatenate([np.atleast_1d(np.asarray(b, dtype=float))
                               for b in blocks])

    def common(blocks, pi):
        x = flat(blocks)
        I, rho = _split_plan(inst, pi)
        q = attack_probabilities(inst, x)
        q1 = np.clip(q, _Q_CLIP, 1.0 - _Q_CLIP) * (1.0 - np.clip(q, _Q_CLIP, 1.0 - _Q_CLIP))
        Dq = -W * q1[:, None]              # dq_i/dx_j
        return x, I, rho, q, q1, Dq

    def follower(i):
        space = box_space(lower=[0.0], upper=[np.inf],
                          sample_lower=[0.0], sample_upper=[5.0])

        def value(blocks, pi):
            vals, _, _ = objective_values(inst, blocks, pi)
            return -float(vals[i])

        def grad(blocks, pi):
            x, I, rho, q, q1, Dq = common(blocks, pi)
            r, rp, _ = _risk_terms(q)
            gap = inst.losses[i] - I[i]
            phi = gap + gam * abs(gap) * rp[i]
            # max-orientation dF_i/dx_i, negated
            return -np.array([-inst.costs[i] - phi * Dq[i, i]])

        def hess_x(blocks, pi):
            x, I, rho, q, q1, Dq = common(blocks, pi)
            r, rp, rpp = _risk_terms(q)
            gap = inst.losses[i] - I[i]
            phi = gap + gam * abs(gap) * rp[i]
            psi = (-gam * abs(gap) * rpp[i] * q1[i] ** 2
                   - phi * (1.0 - 2.0 * q[i]) * q1[i])
            # max orientation: d2F_i/dx_j dx_k = psi * w_ij w_ik; negate
            return [-np.array([[psi * W[i, i] * W[i, j]]]) for j in range(n)]

        def hess_pi(blocks, pi):
            x, I, rho, q, q1, Dq = common(blocks, pi)
            r, rp, _ = _risk_terms(q)
            gap = inst.losses[i] - I[i]
            out = np.zeros((1, 2 * n))
            # d/dI_i of the max-orientation gradient, negated
            out[0, i] = -(1.0 + gam * np.sign(gap) * rp[i]) * Dq[i, i]
            return out

        return FollowerSpec(index=i, space=space, value=value, grad=grad,
                            hess_x=hess_x, hess_pi=hess_pi)

    def lead_value(blocks, pi):
        _, leader, _ = objective_values(inst, blocks, pi)
        return leader

    def lead_grad_x(blocks, pi):
        x, I, rho, q, q1, Dq = common(blocks, pi)
        return -(I @ Dq)

    def lead_grad_pi(blocks, pi):
        x, I, rho, q, q1, Dq = common(blocks, pi)
        return np.concatenate([-q, np.ones(n)])

    def constraints(blocks, pi):
        _, _, ir = objective_values(inst, blocks, pi)
        return ir

    def cons_jac_x(blocks, pi):
        x, I, rho, q, q1, Dq = common(blocks, pi)
        r, rp, _ = _risk_terms(q)
        gap = inst.losses - I
        coef = -I + gam * (np.abs(gap) - inst.losses) * rp
        return coef[:, None] * Dq

    def cons_jac_pi(blocks, pi):
        x, I, rho, q, q1, Dq = common(blocks, pi)
        r, _, _ = _risk_terms(q)
        gap = inst.losses - I
        out = np.zeros((n, 2 * n))
        out[np.arange(n), np.arange(n)] = -q - gam * np.sign(gap) * r
        out[np.arange(n), n + np.arange(n)] = 1.0
        return out

    leader = LeaderProblem(
        value=lead_value, grad_x=lead_grad_x, grad_pi=lead_grad_pi,
        constraints=constraints, cons_jac_x=cons_jac_x, cons_jac_pi=cons_jac_pi,
        param_dim=2 * n,
        param_lower=np.zeros(2 * n),
        param_upper=np.full(2 * n, np.inf),
        n_constraints=n)

    return GameInstance(followers=tuple(follower(i) for i in range(n)),
                        leader=leader)
