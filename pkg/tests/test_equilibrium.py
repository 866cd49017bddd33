import dataclasses

import numpy as np
import pytest

from stackgrad.equilibrium import (EquilibriumPoint, OracleConfig,
                                   best_response, nikaido_isoda_residual,
                                   recover_duals, relaxation_solve,
                                   sample_equilibrium)
from stackgrad.errors import InfeasibleSpace
from stackgrad.games import nfg, toys
from stackgrad.model import (FollowerSpec, GameInstance, JointStrategy,
                             LeaderProblem, simplex_space)


def zero_payoff_nfg(n=3, m=3, lam=1.0):
    return nfg.build_game(nfg.NfgInstance(
        seed=1, n=n, m=(m,) * n,
        payoffs=tuple(np.zeros((m,) * n) for _ in range(n)),
        lambda_risk=lam, budget=1.0))


def identical_interest_mixed_game(payoff):
    """Two followers sharing a payoff matrix, mixed strategies, no entropy
    (lambda = inf drops the risk penalty so pure equilibria survive)."""
    payoff = np.asarray(payoff, dtype=float)
    m = payoff.shape[0]
    # follower 1 picks the column, follower 2 the row: store as tensor
    # indexed (follower1 strategy, follower2 strategy)
    U = payoff.T.copy()
    return nfg.build_game(nfg.NfgInstance(
        seed=1, n=2, m=(m, m), payoffs=(U, U),
        lambda_risk=np.inf, budget=1.0))


class TestBestResponse:
    def test_entropy_only_gives_uniform(self):
        game = zero_payoff_nfg()
        x = JointStrategy(blocks=tuple(np.array([0.7, 0.2, 0.1]) for _ in range(3)))
        y, ok = best_response(game, 0, x, np.zeros(game.leader.param_dim))
        assert ok
        np.testing.assert_allclose(y, np.full(3, 1 / 3), atol=1e-12)

    def test_quadratic_interior(self):
        game = toys.single_quadratic_game(0.0, 1.0)
        x = JointStrategy(blocks=(np.array([0.9]),))
        y, ok = best_response(game, 0, x, np.array([0.4]), tol=1e-10)
        assert ok
        assert y[0] == pytest.approx(0.4, abs=1e-9)

    def test_cyber_full_insurance_prefers_zero_effort(self):
        from stackgrad.games import cyber
        inst = cyber.generate(1, n=3)
        game = cyber.build_game(inst)
        pi = np.concatenate([inst.losses, np.full(3, 2.0)])  # I_i = L_i
        x = JointStrategy(blocks=tuple(np.array([1.0]) for _ in range(3)))
        y, ok = best_response(game, 0, x, pi, tol=1e-9)
        assert ok
        assert y[0] == pytest.approx(0.0, abs=1e-9)


class TestRelaxationSolve:
    def test_zero_payoff_nfg_reaches_uniform(self):
        game = zero_payoff_nfg()
        init = JointStrategy(blocks=tuple(
            np.array([0.6, 0.3, 0.1]) for _ in range(3)))
        eq = relaxation_solve(game, np.zeros(game.leader.param_dim), init)
        assert eq.converged
        assert eq.ni_residual <= 1e-6
        for b in eq.x.blocks:
            np.testing.assert_allclose(b, np.full(3, 1 / 3), atol=1e-9)

    def test_two_follower_quadratic_closed_form(self):
        # independent oracle: plain fixed-point iteration of the stationarity
        # system x1 = 0.5 x2 + pi, x2 = 0.5 x1
        pi = 1.0
        x1 = x2 = 0.0
        for _ in range(200):
            x1, x2 = 0.5 * x2 + pi, 0.5 * x1
        assert x1 == pytest.approx(4 / 3, abs=1e-12)
        game = toys.two_quadratic_game()
        init = JointStrategy(blocks=(np.zeros(1), np.zeros(1)))
        eq = relaxation_solve(game, np.array([pi]), init)
        assert eq.converged
        np.testing.assert_allclose(eq.x.concat, [x1, x2], atol=1e-8)

    def test_refeeding_converged_point_returns_immediately(self):
        game = toys.two_quadratic_game()
        init = JointStrategy(blocks=(np.zeros(1), np.zeros(1)))
        eq = relaxation_solve(game, np.array([1.0]), init)
        again = relaxation_solve(game, np.array([1.0]), eq.x)
        assert again.outer_iterations <= 1
        np.testing.assert_allclose(again.x.concat, eq.x.concat, atol=1e-6)

    def test_infeasible_init_rejected(self):
        game = zero_payoff_nfg()
        init = JointStrategy(blocks=tuple(np.array([0.5, 0.5, 0.5])
                                          for _ in range(3)))
        with pytest.raises(InfeasibleSpace):
            relaxation_solve(game, np.zeros(game.leader.param_dim), init)

    def test_ni_history_decays_on_entropic_nfg(self):
        # Strict per-step NI monotonicity fails for damped best-response
        # dynamics (the iteration contracts anisotropically and can transit
        # near unstable stationary points, where NI rises for a stretch
        # before the final approach). The sanity that does hold: one-step
        # growth stays bounded, the run certifies, and the tail is settled.
        for inst_seed, init_seed in ((3, 11), (1, 2), (2, 5), (3, 1)):
            game = nfg.build_game(nfg.generate(inst_seed))
            eq = sample_equilibrium(game, np.zeros(game.leader.param_dim),
                                    init_seed)
            hist = np.array(eq.ni_history)
            assert eq.converged and hist[-1] <= 1e-6
            prev, nxt = hist[:-1], hist[1:]
            mask = prev > 1e-12
            assert np.all(nxt[mask] <= 3.0 * prev[mask] + 1e-9)
            assert np.all(hist[-10:] <= 1e-4)


class TestSampleEquilibrium:
    def test_unique_equilibrium_sseed_independent(self):
        game = nfg.build_game(nfg.generate(1))
        pi = np.zeros(game.leader.param_dim)
        sols = [sample_equilibrium(game, pi, s).x.concat for s in range(1, 11)]
        for s in sols[1:]:
            assert np.max(np.abs(s - sols[0])) <= 1e-5

    def test_identical_interest_game_reaches_multiple_equilibria(self):
        game = identical_interest_mixed_game(np.eye(3))
        pi = np.zeros(game.leader.param_dim)
        found = set()
        for seed in range(1, 25):
            eq = sample_equilibrium(game, pi, seed)
            if not eq.converged:
                continue
            vertex = tuple(int(np.argmax(b)) for b in eq.x.blocks)
            np.testing.assert_allclose(
                eq.x.concat,
                np.concatenate([np.eye(3)[v] for v in vertex]), atol=1e-6)
            assert vertex[0] == vertex[1]  # diagonal coordination equilibria
            found.add(vertex)
        assert len(found) >= 2

    def test_bitwise_determinism(self):
        game = nfg.build_game(nfg.generate(2))
        pi = np.full(game.leader.param_dim, 0.05)
        a = sample_equilibrium(game, pi, 7)
        b = sample_equilibrium(game, pi, 7)
        assert all(np.array_equal(x, y) for x, y in zip(a.x.blocks, b.x.blocks))
        assert all(np.array_equal(x, y)
                   for x, y in zip(a.duals_ineq, b.duals_ineq))
        assert all(np.array_equal(x, y) for x, y in zip(a.duals_eq, b.duals_eq))
        assert a.ni_residual == b.ni_residual
        assert a.kkt_residual == b.kkt_residual


class TestNikaidoIsoda:
    def test_zero_at_equilibrium(self):
        game = toys.two_quadratic_game()
        eq = sample_equilibrium(game, np.array([1.0]), 1)
        assert nikaido_isoda_residual(game, eq.x, np.array([1.0])) <= 1e-6

    def test_single_follower_gap(self):
        game = toys.single_quadratic_game(0.0, 1.0)
        x = JointStrategy(blocks=(np.array([0.0]),))
        val = nikaido_isoda_residual(game, x, np.array([1.0]))
        assert val == pytest.approx(0.5, abs=1e-8)

    def test_two_follower_quadratic_at_origin(self):
        game = toys.two_quadratic_game()
        x = JointStrategy(blocks=(np.zeros(1), np.zeros(1)))
        # direct evaluation oracle: f1 gap = f1(0,0) - f1(1,0) = 0.5, f2 gap = 0
        val = nikaido_isoda_residual(game, x, np.array([1.0]))
        assert val == pytest.approx(0.5, abs=1e-8)

    def test_non_negative_on_random_points(self):
        game = nfg.build_game(nfg.generate(4))
        pi = np.zeros(game.leader.param_dim)
        rng = np.random.default_rng(0)
        for _ in range(40):
            x = JointStrategy(blocks=tuple(rng.dirichlet(np.ones(3))
                                           for _ in range(3)))
            assert nikaido_isoda_residual(game, x, pi) >= 0.0


class TestRecoverDuals:
    def test_interior_quadratic_has_zero_duals(self):
        game = toys.two_quadratic_game()
        eq = sample_equilibrium(game, np.array([1.0]), 1)
        lams, nus, res = recover_duals(game, eq.x, np.array([1.0]))
        assert res <= 1e-8
        for lam in lams:
            np.testing.assert_allclose(lam, 0.0, atol=1e-10)

    def test_uniform_qre_equality_dual_value(self):
        lam_risk = 1.0
        game = zero_payoff_nfg(lam=lam_risk)
        x = JointStrategy(blocks=tuple(np.full(3, 1 / 3) for _ in range(3)))
        lams, nus, res = recover_duals(game, x, np.zeros(game.leader.param_dim))
        assert res <= 1e-9
        expected_nu = -(1 + np.log(1 / 3)) / lam_risk
        for nu in nus:
            assert nu[0] == pytest.approx(expected_nu, abs=1e-9)

    def test_vertex_pinned_by_dominant_payoff(self):
        # one simplex follower with linear payoff dominating strategy 0
        c = np.array([10.0, 0.0, 0.0])
        space = simplex_space(3)
        spec = FollowerSpec(
            index=0, space=space,
            value=lambda blocks, pi: -float(c @ blocks[0]),
            grad=lambda blocks, pi: -c,
            hess_x=lambda blocks, pi: [np.zeros((3, 3))],
            hess_pi=lambda blocks, pi: np.zeros((3, 1)))
        leader = LeaderProblem(
            value=lambda blocks, pi: 0.0,
            grad_x=lambda blocks, pi: np.zeros(3),
            grad_pi=lambda blocks, pi: np.zeros(1),
            constraints=lambda blocks, pi: np.zeros(0),
            cons_jac_x=lambda blocks, pi: np.zeros((0, 3)),
            cons_jac_pi=lambda blocks, pi: np.zeros((0, 1)),
            param_dim=1, param_lower=[0.0], param_upper=[1.0])
        game = GameInstance(followers=(spec,), leader=leader)
        x = JointStrategy(blocks=(np.array([1.0, 0.0, 0.0]),))
        lams, nus, res = recover_duals(game, x, np.zeros(1))
        assert res <= 1e-8
        lam = lams[0]
        assert np.all(lam >= 0.0)
        # complementary slackness exactly: inactive rows carry zero duals
        slack = space.h - space.G @ x.blocks[0]
        np.testing.assert_allclose(lam * slack, 0.0, atol=1e-10)


class TestCertificates:
    def test_converged_points_carry_certified_residuals(self):
        for builder, pi_dim, seeds in (
                (lambda: nfg.build_game(nfg.generate(1)), None, (1, 2)),
                (toys.two_quadratic_game, 1, (3,)),
                (toys.two_basin_game, 1, (4, 5))):
            game = builder()
            pi = np.zeros(game.leader.param_dim)
            for seed in seeds:
                eq = sample_equilibrium(game, pi, seed)
                assert eq.converged
                assert eq.ni_residual <= 1e-6
                assert eq.kkt_residual <= 1e-5
                assert all(np.all(lam >= 0) for lam in eq.duals_ineq)
