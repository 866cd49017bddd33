"""Central finite-difference checks for the analytic derivative oracles."""

from __future__ import annotations

import numpy as np

from .model import GameInstance

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
SMALL_ENTRY = 1e-8


def central_diff_grad(f, x, h=DEFAULT_STEP):
    """Central-difference gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def central_diff_jac(f, x, h=DEFAULT_STEP):
    """Central-difference Jacobian of a vector function of a vector."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def max_relative_error(a, b, floor=SMALL_ENTRY):
    """Max elementwise relative error over resolvable entries.

    An entry participates only when its magnitude AND its discrepancy exceed
    ``floor``: central differences at step 1e-5 carry an absolute noise floor
    of roughly eps/(2h) ~ 1e-9, so sub-floor disagreements on near-floor
    entries measure roundoff, not the derivative. Genuine errors (wrong term,
    wrong sign) produce discrepancies at the entry's own scale and are never
    masked.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    scale = np.maximum(np.abs(a), np.abs(b))
    mask = (scale >= floor) & (diff >= floor)
    if not np.any(mask):
        return 0.0
    return float(np.max(diff[mask] / scale[mask]))


def check_follower_oracles(game: GameInstance, blocks, pi, h=DEFAULT_STEP):
    """FD-validate every follower's gradient, Hessian blocks, and pi-cross
    block at the given point. Returns {oracle name: max relative error}."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    pi = np.asarray(pi, dtype=float)
    report = {}
    for i, spec in enumerate(game.followers):
        def value_of_own(v, i=i, spec=spec):
            mod = list(blocks)
            mod[i] = v
            return spec.value(mod, pi)

        grad = spec.grad(blocks, pi)
        report[f"follower{i}.grad"] = max_relative_error(
            grad, central_diff_grad(value_of_own, blocks[i], h))

        hess = spec.hess_x(blocks, pi)
        for j in range(game.n_followers):
            def grad_vs_j(v, i=i, j=j, spec=spec):
                mod = list(blocks)
                mod[j] = v
                return spec.grad(mod, pi)

            report[f"follower{i}.hess_x[{j}]"] = max_relative_error(
                hess[j], central_diff_jac(grad_vs_j, blocks[j], h))

        def grad_vs_pi(p, i=i, spec=spec):
            return spec.grad(blocks, p)

        report[f"follower{i}.hess_pi"] = max_relative_error(
            spec.hess_pi(blocks, pi), central_diff_jac(grad_vs_pi, pi, h))
    return report


def check_leader_oracles(game: GameInstance, blocks, pi, h=DEFAULT_STEP):
    """FD-validate the leader's payoff/constraint partials at the point."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    pi = np.asarray(pi, dtype=float)
    dims = game.block_dims
    lead = game.leader

    def split(xcat):
        out, k = [], 0
        for d in dims:
            out.append(xcat[k:k + d])
            k += d
        return out

    xcat = np.concatenate(blocks)
    report = {
        "leader.grad_x": max_relative_error(
            lead.grad_x(blocks, pi),
            central_diff_grad(lambda v: lead.value(split(v), pi), xcat, h)),
        "leader.grad_pi": max_relative_error(
            lead.grad_pi(blocks, pi),
            central_diff_grad(lambda p: lead.value(blocks, p), pi, h)),
    }
    if lead.n_constraints:
        report["leader.cons_jac_x"] = max_relative_error(
            lead.cons_jac_x(blocks, pi),
            central_diff_jac(lambda v: lead.constraints(split(v), pi), xcat, h))
        report["leader.cons_jac_pi"] = max_relative_error(
            lead.cons_jac_pi(blocks, pi),
            central_diff_jac(lambda p: lead.constraints(blocks, p), pi, h))
    return report
