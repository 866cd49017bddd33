"""Small hand-built games: quadratic toys for exact-answer checks and the
two-basin coordination game used for the stochastic-gradient validation.

All toy follower objectives are written directly in minimization orientation.
"""

from __future__ import annotations

import numpy as np

from ..model import FollowerSpec, GameInstance, LeaderProblem, box_space


def _leader(value, grad_x, grad_pi, param_dim, lower, upper,
            constraints=None, jac_x=None, jac_pi=None, n_constraints=0):
    if constraints is None:
        constraints = lambda blocks, pi: np.zeros(0)
        jac_x = lambda blocks, pi: np.zeros((0, sum(np.size(b) for b in blocks)))
        jac_pi = lambda blocks, pi: np.zeros((0, param_dim))
    return LeaderProblem(value=value, grad_x=grad_x, grad_pi=grad_pi,
                         constraints=constraints, cons_jac_x=jac_x,
                         cons_jac_pi=jac_pi, param_dim=param_dim,
                         param_lower=lower, param_upper=upper,
                         n_constraints=n_constraints)


def single_quadratic_game(lower=0.0, upper=1.0) -> GameInstance:
    """One follower minimizing (x - pi)^2 / 2 on a box; leader payoff is x*.

    Interior response is x* = pi with dx*/dpi = 1.
    """
    space = box_space(lower=[lower], upper=[upper])

    spec = FollowerSpec(
        index=0, space=space,
        value=lambda blocks, pi: 0.5 * float((blocks[0][0] - pi[0]) ** 2),
        grad=lambda blocks, pi: np.array([blocks[0][0] - pi[0]]),
        hess_x=lambda blocks, pi: [np.array([[1.0]])],
        hess_pi=lambda blocks, pi: np.array([[-1.0]]))

    leader = _leader(
        value=lambda blocks, pi: float(blocks[0][0]),
        grad_x=lambda blocks, pi: np.array([1.0]),
        grad_pi=lambda blocks, pi: np.zeros(1),
        param_dim=1, lower=[-10.0], upper=[10.0])
    return GameInstance(followers=(spec,), leader=leader)


def two_quadratic_game(coupling=0.5) -> GameInstance:
    """Two coupled quadratic followers on [-10, 10]:

        f1 = (x1 - c x2 - pi)^2 / 2,   f2 = (x2 - c x1)^2 / 2,

    whose unique equilibrium solves x1 = c x2 + pi, x2 = c x1; at c = 1/2 the
    closed form is x* = (4 pi / 3, 2 pi / 3). Leader payoff is x1 + x2.
    """
    c = float(coupling)

    def space():
        return box_space(lower=[-10.0], upper=[10.0])

    f1 = FollowerSpec(
        index=0, space=space(),
        value=lambda blocks, pi: 0.5 * float((blocks[0][0] - c * blocks[1][0] - pi[0]) ** 2),
        grad=lambda blocks, pi: np.array([blocks[0][0] - c * blocks[1][0] - pi[0]]),
        hess_x=lambda blocks, pi: [np.array([[1.0]]), np.array([[-c]])],
        hess_pi=lambda blocks, pi: np.array([[-1.0]]))
    f2 = FollowerSpec(
        index=1, space=space(),
        value=lambda blocks, pi: 0.5 * float((blocks[1][0] - c * blocks[0][0]) ** 2),
        grad=lambda blocks, pi: np.array([blocks[1][0] - c * blocks[0][0]]),
        hess_x=lambda blocks, pi: [np.array([[-c]]), np.array([[1.0]])],
        hess_pi=lambda blocks, pi: np.array([[0.0]]))

    leader = _leader(
        value=lambda blocks, pi: float(blocks[0][0] + blocks[1][0]),
        grad_x=lambda blocks, pi: np.ones(2),
        grad_pi=lambda blocks, pi: np.zeros(1),
        param_dim=1, lower=[-10.0], upper=[10.0])
    return GameInstance(followers=(f1, f2), leader=leader)


def leader_only_game(target=3.0) -> GameInstance:
    """Leader maximizes -(pi - target)^2; the single follower is inert."""
    space = box_space(lower=[-1.0], upper=[1.0])
    spec = FollowerSpec(
        index=0, space=space,
        value=lambda blocks, pi: 0.5 * float(blocks[0][0] ** 2),
        grad=lambda blocks, pi: np.array([blocks[0][0]]),
        hess_x=lambda blocks, pi: [np.array([[1.0]])],
        hess_pi=lambda blocks, pi: np.array([[0.0]]))
    leader = _leader(
        value=lambda blocks, pi: -float((pi[0] - target) ** 2),
        grad_x=lambda blocks, pi: np.zeros(1),
        grad_pi=lambda blocks, pi: np.array([-2.0 * (pi[0] - target)]),
        param_dim=1, lower=[-100.0], upper=[100.0])
    return GameInstance(followers=(spec,), leader=leader)


def pinned_vertex_game(cap=0.5) -> GameInstance:
    """Follower minimizes (x - pi)^2 / 2 on [0, cap]; for pi > cap the
    solution is pinned at the cap with a strictly positive multiplier and
    dx*/dpi = 0."""
    space = box_space(lower=[0.0], upper=[cap])
    spec = FollowerSpec(
        index=0, space=space,
        value=lambda blocks, pi: 0.5 * float((blocks[0][0] - pi[0]) ** 2),
        grad=lambda blocks, pi: np.array([blocks[0][0] - pi[0]]),
        hess_x=lambda blocks, pi: [np.array([[1.0]])],
        hess_pi=lambda blocks, pi: np.array([[-1.0]]))
    leader = _leader(
        value=lambda blocks, pi: float(blocks[0][0]),
        grad_x=lambda blocks, pi: np.array([1.0]),
        grad_pi=lambda blocks, pi: np.zeros(1),
        param_dim=1, lower=[-10.0], upper=[10.0])
    return GameInstance(followers=(spec,), leader=leader)


def two_basin_game(beta=2.0, half_width=3.0, leader_coefs=(0.3, 0.5, 0.4)) -> GameInstance:
    """Coordination game with two isolated stable equilibria selected by the
    random initialization.

        f1 = (x1 - (1 + pi) tanh(beta x2))^2 / 2
        f2 = (x2 - tanh(beta x1))^2 / 2          on [-w, w]^2.

    The best-response map is odd in x, so the two stable fixed points are
    +/- xbar(pi) and a symmetric initialization lands in either basin with
    probability exactly 1/2, independent of pi: the selection probability is
    locally fixed, the KKT matrix at each basin is invertible, and the
    sampled-equilibrium gradient estimator should be unbiased. The leader
    payoff a1 x1 + a2 x2 + a3 x1^2 differs across basins, so the estimator
    has genuine across-basin variance.
    """
    a1, a2, a3 = (float(v) for v in leader_coefs)
    w = float(half_width)

    def space():
        return box_space(lower=[-w], upper=[w])

    def t(z):
        return np.tanh(beta * z)

    def tp(z):
        return beta / np.cosh(beta * z) ** 2

    f1 = FollowerSpec(
        index=0, space=space(),
        value=lambda blocks, pi: 0.5 * float(
            (blocks[0][0] - (1.0 + pi[0]) * t(blocks[1][0])) ** 2),
        grad=lambda blocks, pi: np.array(
            [blocks[0][0] - (1.0 + pi[0]) * t(blocks[1][0])]),
        hess_x=lambda blocks, pi: [np.array([[1.0]]),
                                   np.array([[-(1.0 + pi[0]) * tp(blocks[1][0])]])],
        hess_pi=lambda blocks, pi: np.array([[-t(blocks[1][0])]]),
        closed_form_br=lambda blocks, pi: np.array(
            [np.clip((1.0 + pi[0]) * t(blocks[1][0]), -w, w)]))
    f2 = FollowerSpec(
        index=1, space=space(),
        value=lambda blocks, pi: 0.5 * float((blocks[1][0] - t(blocks[0][0])) ** 2),
        grad=lambda blocks, pi: np.array([blocks[1][0] - t(blocks[0][0])]),
        hess_x=lambda blocks, pi: [np.array([[-tp(blocks[0][0])]]),
                                   np.array([[1.0]])],
        hess_pi=lambda blocks, pi: np.array([[0.0]]),
        closed_form_br=lambda blocks, pi: np.array(
            [np.clip(t(blocks[0][0]), -w, w)]))

    leader = _leader(
        value=lambda blocks, pi: float(a1 * blocks[0][0] + a2 * blocks[1][0]
                                       + a3 * blocks[0][0] ** 2),
        grad_x=lambda blocks, pi: np.array(
            [a1 + 2.0 * a3 * blocks[0][0], a2]),
        grad_pi=lambda blocks, pi: np.zeros(1),
        param_dim=1, lower=[0.0], upper=[1.0])
    return GameInstance(followers=(f1, f2), leader=leader)
