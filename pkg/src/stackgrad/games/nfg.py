"""Normal-form games with entropic risk penalty (unique QRE) and a leader
paying per-profile subsidies under a budget.

Follower i maximizes  U_i(x) + pi_i(x) - H(x_i)/lambda  with
H(x) = sum_j x_j log x_j; the wired oracles are negated into the package-wide
minimization convention. The leader maximizes social welfare sum_i U_i(x)
subject to the expected-subsidy budget sum_i pi_i(x) <= B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..model import (FollowerSpec, GameInstance, LeaderProblem, simplex_space)

ENTROPY_FLOOR = 1e-12
MAX_PROFILE_CELLS = 10_000


@dataclass(frozen=True)
class NfgInstance:
    seed: int
    n: int
    m: tuple[int, ...]
    payoffs: tuple[np.ndarray, ...]
    lambda_risk: float = 1.0
    budget: float = 1.0

    kind = "nfg"

    @property
    def profile_cells(self) -> int:
        return int(np.prod(self.m))

    @property
    def param_dim(self) -> int:
        return self.n * self.profile_cells


def generate(seed: int, n: int = 3, m: int = 3, lambda_risk: float = 1.0,
             budget: float = 1.0, allow_large: bool = False) -> NfgInstance:
    """Seeded instance with payoff entries drawn from U(0, 10)."""
    if seed < 1:
        raise ValueError("seed must be >= 1")
    shape = (m,) * n
    cells = int(np.prod(shape))
    if cells > MAX_PROFILE_CELLS and not allow_large:
        raise ValueError(
            f"profile tensor has {cells} cells (> {MAX_PROFILE_CELLS}); "
            "pass allow_large=True to override")
    rng = np.random.default_rng(seed)
    payoffs = tuple(rng.uniform(0.0, 10.0, size=shape) for _ in range(n))
    return NfgInstance(seed=seed, n=n, m=(m,) * n, payoffs=payoffs,
                       lambda_risk=lambda_risk, budget=budget)


def contract_all(T, blocks):
    """Multilinear contraction of a joint-profile tensor with every mixed
    strategy: sum over pure profiles of T[profile] * prod_i x_i[profile_i].

    Contracts the trailing axis repeatedly, so every step is a plain
    reshaped matrix-vector product.
    """
    out = np.asarray(T, dtype=float)
    if out.ndim != len(blocks):
        raise DimensionMismatch("tensor order differs from the number of followers")
    for x in reversed(blocks):
        out = out.reshape(-1, x.size) @ x
    return float(out[0])


def contract_except(T, blocks, keep):
    """Contraction leaving the ``keep`` axis free: an m_keep vector."""
    out = np.asarray(T, dtype=float)
    n = len(blocks)
    for j in range(n - 1, keep, -1):
        out = out.reshape(-1, blocks[j].size) @ blocks[j]
    for j in range(keep):
        out = blocks[j] @ out.reshape(blocks[j].size, -1)
    return out


def contract_except_pair(T, blocks, i, j):
    """Contraction leaving axes i and j free: an (m_i, m_j) matrix."""
    out = np.moveaxis(np.asarray(T, dtype=float), (i, j), (0, 1))
    mi, mj = blocks[i].size, blocks[j].size
    for k in range(len(blocks) - 1, -1, -1):
        if k in (i, j):
            continue
        out = out.reshape(-1, blocks[k].size) @ blocks[k]
    return out.reshape(mi, mj)


def expected_payoff(T, blocks) -> float:
    """Expected value of the profile tensor under mixed strategies."""
    return contract_all(T, blocks)


def _outer_except(blocks, skip=None):
    """Joint-profile tensor of prod_{l != skip} x_l, ones along axis skip
    (plain outer product of all blocks when skip is None)."""
    out = np.ones(1)
    for l, x in enumerate(blocks):
        v = np.ones_like(x) if l == skip else x
        out = np.multiply.outer(out, v)
    return out[0]


def _subsidy_block(inst: NfgInstance, pi, i):
    pi = np.asarray(pi, dtype=float)
    cells = inst.profile_cells
    if pi.size != inst.n * cells:
        raise DimensionMismatch("leader parameter has wrong length for this NFG")
    return pi[i * cells:(i + 1) * cells].reshape(inst.m)


def _subsidy_blocks(inst: NfgInstance, pi):
    return [_subsidy_block(inst, pi, i) for i in range(inst.n)]


def follower_gradient(inst: NfgInstance, i, blocks, pi) -> np.ndarray:
    """Gradient of follower i's minimized objective at interior x_i.

    The maximized form is (U_i + pi_i)(x_{-i}) - (1 + log x_i)/lambda
    componentwise; this returns its negation.
    """
    C = inst.payoffs[i] + _subsidy_block(inst, pi, i)
    xi = np.maximum(blocks[i], ENTROPY_FLOOR)
    ent = ((1.0 + np.log(xi)) / inst.lambda_risk
           if np.isfinite(inst.lambda_risk) else 0.0)
    return -contract_except(C, blocks, i) + ent


def build_game(inst: NfgInstance) -> GameInstance:
    """Wire the instance into FollowerSpec/LeaderProblem oracles."""
    n = inst.n
    lam_risk = inst.lambda_risk
    entropic = np.isfinite(lam_risk)

    cells = inst.profile_cells
    shape = inst.m

    def follower(i):
        space = simplex_space(inst.m[i])
        U_i = inst.payoffs[i]
        lo, hi = i * cells, (i + 1) * cells

        def value(blocks, pi):
            C = U_i + np.asarray(pi, dtype=float)[lo:hi].reshape(shape)
            v = -contract_all(C, blocks)
            if entropic:
                xi = np.maximum(blocks[i], ENTROPY_FLOOR)
                v += float(xi @ np.log(xi)) / lam_risk
            return v

        def grad(blocks, pi):
            return follower_gradient(inst, i, blocks, pi)

        def hess_x(blocks, pi):
            C = U_i + np.asarray(pi, dtype=float)[lo:hi].reshape(shape)
            out = []
            for j in range(n):
                if j == i:
                    if entropic:
                        xi = np.maximum(blocks[i], ENTROPY_FLOOR)
                        out.append(np.diag(1.0 / (lam_risk * xi)))
                    else:
                        out.append(np.zeros((inst.m[i], inst.m[i])))
                else:
                    out.append(-contract_except_pair(C, blocks, i, j))
            return out

        def hess_pi(blocks, pi):
            outer = _outer_except(blocks, i)
            Z = np.zeros((inst.m[i],) + shape)
            idx = [slice(None)] * n
            for a in range(inst.m[i]):
                idx[i] = a
                Z[(a, *idx)] = outer[tuple(idx)]
            full = np.zeros((inst.m[i], n * cells))
            full[:, lo:hi] = -Z.reshape(inst.m[i], cells)
            return full

        def closed_form_br(blocks, pi):
            # exact minimizer of -c.x + sum x log x / lambda over the simplex
            C = U_i + np.asarray(pi, dtype=float)[lo:hi].reshape(shape)
            c = contract_except(C, blocks, i)
            if not entropic:
                y = np.zeros(inst.m[i])
                y[int(np.argmax(c))] = 1.0  # linear objective: lowest-index argmax
                return y
            z = lam_risk * c
            z -= z.max()
            e = np.exp(z)
            return e / e.sum()

        return FollowerSpec(index=i, space=space, value=value, grad=grad,
                            hess_x=hess_x, hess_pi=hess_pi,
                            closed_form_br=closed_form_br)

    def lead_value(blocks, pi):
        return float(sum(contract_all(U, blocks) for U in inst.payoffs))

    def lead_grad_x(blocks, pi):
        out = []
        for j in range(n):
            out.append(sum(contract_except(U, blocks, j) for U in inst.payoffs))
        return np.concatenate(out)

    def lead_grad_pi(blocks, pi):
        return np.zeros(inst.param_dim)

    def constraints(blocks, pi):
        paid = sum(contract_all(P, blocks) for P in _subsidy_blocks(inst, pi))
        return np.array([paid - inst.budget])

    def cons_jac_x(blocks, pi):
        subs = _subsidy_blocks(inst, pi)
        row = np.concatenate([
            np.sum([contract_except(P, blocks, j) for P in subs], axis=0)
            for j in range(n)])
        return row[None, :]

    def cons_jac_pi(blocks, pi):
        full_outer = _outer_except(blocks)
        return np.tile(full_outer.ravel(), n)[None, :]

    leader = LeaderProblem(
        value=lead_value, grad_x=lead_grad_x, grad_pi=lead_grad_pi,
        constraints=constraints, cons_jac_x=cons_jac_x, cons_jac_pi=cons_jac_pi,
        param_dim=inst.param_dim,
        param_lower=np.zeros(inst.param_dim),
        param_upper=np.full(inst.param_dim, np.inf),
        n_constraints=1)

    return GameInstance(followers=tuple(follower(i) for i in range(n)),
                        leader=leader)
