import numpy as np
import pytest

from stackgrad.equilibrium import sample_equilibrium
from stackgrad.errors import UnknownKind
from stackgrad.fdcheck import check_follower_oracles, check_leader_oracles
from stackgrad.games import (DESK_SIZES, build_game, cyber,
                             deserialize_instance, generate_instance, nfg,
                             serialize_instance, ssg)
from stackgrad.model import JointStrategy, project_to_space

FD_TOL = 1e-4


def interior_blocks(game, seed):
    rng = np.random.default_rng(seed)
    blocks = []
    for spec in game.followers:
        sp = spec.space
        y = rng.uniform(sp.sample_lower, sp.sample_upper)
        x = project_to_space(y, sp)
        center = project_to_space(0.5 * (sp.sample_lower + sp.sample_upper), sp)
        blocks.append(0.75 * x + 0.25 * center)
    return blocks


class TestNfg:
    def test_expected_payoff_all_ones(self):
        U = np.ones((2, 2, 2))
        blocks = [np.array([0.3, 0.7])] * 3
        assert nfg.expected_payoff(U, blocks) == pytest.approx(1.0, abs=1e-12)

    def test_expected_payoff_matching_pennies_mix(self):
        U = np.array([[1.0, 0.0], [0.0, 1.0]])
        blocks = [np.array([0.5, 0.5])] * 2
        assert nfg.expected_payoff(U, blocks) == pytest.approx(0.5)

    def test_expected_payoff_pure_profile(self):
        U = np.array([[1.0, 2.0], [3.0, 4.0]])
        blocks = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        assert nfg.expected_payoff(U, blocks) == pytest.approx(2.0)

    def test_uniform_gradient_entries_equal(self):
        inst = nfg.NfgInstance(seed=1, n=2, m=(3, 3),
                               payoffs=(np.zeros((3, 3)), np.zeros((3, 3))),
                               lambda_risk=1.0)
        blocks = [np.full(3, 1 / 3)] * 2
        g = nfg.follower_gradient(inst, 0, blocks, np.zeros(18))
        expected = (1 + np.log(1 / 3))  # minimization orientation
        np.testing.assert_allclose(g, expected, atol=1e-12)

    def test_uniform_own_hessian(self):
        game = build_game(nfg.NfgInstance(
            seed=1, n=2, m=(3, 3), payoffs=(np.zeros((3, 3)),) * 2,
            lambda_risk=1.0))
        blocks = [np.full(3, 1 / 3)] * 2
        H = game.followers[0].hess_x(blocks, np.zeros(18))
        # min orientation: +diag(1/(lambda x)) = diag(3,3,3)
        np.testing.assert_allclose(H[0], np.diag([3.0, 3.0, 3.0]), atol=1e-12)

    def test_budget_at_zero_subsidy(self):
        game = build_game(nfg.generate(1, budget=2.5))
        blocks = [np.full(3, 1 / 3)] * 3
        g = game.leader.constraints(blocks, np.zeros(game.leader.param_dim))
        assert g[0] == pytest.approx(-2.5, abs=1e-12)

    def test_generator_ranges_and_guard(self):
        inst = nfg.generate(1)
        for U in inst.payoffs:
            assert U.min() >= 0.0 and U.max() <= 10.0
        with pytest.raises(ValueError):
            nfg.generate(1, n=3, m=22)          # 22^3 > 10^4
        nfg.generate(1, n=3, m=22, allow_large=True)

    def test_qre_uniqueness_across_seeds(self):
        game = build_game(nfg.generate(5))
        pi = np.zeros(game.leader.param_dim)
        a = sample_equilibrium(game, pi, 1).x.concat
        b = sample_equilibrium(game, pi, 2).x.concat
        assert np.max(np.abs(a - b)) <= 1e-5


class TestSsg:
    def test_zero_coverage_uniform_attack(self):
        inst = generate_instance("ssg", 1, **DESK_SIZES["ssg"])
        inst = ssg.SsgInstance(**{**inst.__dict__,
                                  "attractiveness": np.zeros(inst.num_targets)})
        blocks = [np.zeros(inst.m) for _ in range(inst.n)]
        y, p = ssg.coverage_and_attack(inst, blocks)
        np.testing.assert_allclose(y, 0.0, atol=1e-15)
        np.testing.assert_allclose(p, 1.0 / inst.num_targets, atol=1e-12)

    def test_single_full_coverage(self):
        inst = generate_instance("ssg", 1, **DESK_SIZES["ssg"])
        blocks = [np.zeros(inst.m) for _ in range(inst.n)]
        blocks[0][0] = 1.0
        y, p = ssg.coverage_and_attack(inst, blocks)
        assert y[inst.target_sets[0][0]] == pytest.approx(1.0)

    def test_two_defender_overlap(self):
        # force both defenders onto a shared target at effort 0.5
        inst = generate_instance("ssg", 1, **DESK_SIZES["ssg"])
        shared = set(inst.target_sets[0]) & set(inst.target_sets[1])
        t = sorted(shared)[0]
        blocks = [np.zeros(inst.m) for _ in range(inst.n)]
        blocks[0][list(inst.target_sets[0]).index(t)] = 0.5
        blocks[1][list(inst.target_sets[1]).index(t)] = 0.5
        y, _ = ssg.coverage_and_attack(inst, blocks)
        assert y[t] == pytest.approx(0.75)

    def test_leader_value_at_rest(self):
        inst = generate_instance("ssg", 1, **DESK_SIZES["ssg"])
        inst = ssg.SsgInstance(**{**inst.__dict__,
                                  "attractiveness": np.zeros(inst.num_targets)})
        blocks = [np.zeros(inst.m) for _ in range(inst.n)]
        _, leader, g = ssg.objective_values(inst, blocks,
                                            np.zeros(inst.param_dim))
        assert leader == pytest.approx(inst.leader_penalties.mean(), abs=1e-12)
        assert g == pytest.approx(-inst.budget, abs=1e-12)

    def test_attack_distribution_is_probability(self):
        inst = generate_instance("ssg", 2, **DESK_SIZES["ssg"])
        rng = np.random.default_rng(0)
        for _ in range(20):
            blocks = [rng.uniform(0, 1, inst.m) for _ in range(inst.n)]
            y, p = ssg.coverage_and_attack(inst, blocks)
            assert np.all(y >= -1e-12) and np.all(y <= 1 + 1e-12)
            assert np.all(p >= 0)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)


class TestCyber:
    def test_attack_probability_at_rest(self):
        inst = cyber.generate(1, n=4)
        q = cyber.attack_probabilities(inst, np.zeros(4))
        np.testing.assert_allclose(q, 0.5, atol=1e-12)  # v = 0

    def test_full_insurance_drops_risk_terms(self):
        inst = cyber.generate(1, n=3)
        x = np.array([0.7, 0.1, 0.4])
        rho = np.array([2.0, 3.0, 4.0])
        pi = np.concatenate([inst.losses, rho])
        followers, _, _ = cyber.objective_values(inst, [x[[i]] for i in range(3)], pi)
        np.testing.assert_allclose(followers, -inst.costs * x - rho, atol=1e-12)

    def test_ir_zero_without_insurance(self):
        inst = cyber.generate(2, n=3)
        blocks = [np.array([v]) for v in (0.2, 1.0, 0.6)]
        _, _, ir = cyber.objective_values(inst, blocks, np.zeros(6))
        np.testing.assert_allclose(ir, 0.0, atol=1e-12)

    def test_generator_ranges(self):
        inst = cyber.generate(1)
        assert inst.costs.min() >= 5 and inst.costs.max() <= 10
        assert inst.losses.min() >= 50 and inst.losses.max() <= 100
        diag = np.diag(inst.weights)
        off = inst.weights[~np.eye(inst.n, dtype=bool)]
        assert diag.min() >= 1 and diag.max() <= 2
        assert off.min() >= 0 and off.max() <= 1

    def test_q_strictly_interior(self):
        inst = cyber.generate(3, n=5)
        rng = np.random.default_rng(0)
        for _ in range(20):
            q = cyber.attack_probabilities(inst, rng.uniform(0, 5, 5))
            assert np.all(q > 0) and np.all(q < 1)


class TestDerivativeOracles:
    @pytest.mark.parametrize("kind", ["nfg", "ssg", "cyber"])
    def test_analytic_matches_fd_on_five_seeds(self, kind):
        for seed in range(1, 6):
            inst = generate_instance(kind, seed, **DESK_SIZES[kind])
            game = build_game(inst)
            blocks = interior_blocks(game, seed)
            rng = np.random.default_rng(seed + 100)
            pi = rng.uniform(0.0, 0.5, size=game.leader.param_dim)
            report = check_follower_oracles(game, blocks, pi)
            report.update(check_leader_oracles(game, blocks, pi))
            worst = max(report.values())
            assert worst <= FD_TOL, f"{kind} seed {seed}: {report}"


class TestGeneration:
    def test_determinism(self):
        for kind in ("nfg", "ssg", "cyber"):
            a = serialize_instance(generate_instance(kind, 3, **DESK_SIZES[kind]))
            b = serialize_instance(generate_instance(kind, 3, **DESK_SIZES[kind]))
            assert a == b

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            generate_instance("nfg", 0)

    def test_unknown_kind(self):
        with pytest.raises(UnknownKind):
            generate_instance("chess", 1)

    @pytest.mark.parametrize("kind", ["nfg", "ssg", "cyber"])
    def test_serialization_round_trip(self, kind):
        inst = generate_instance(kind, 7, **DESK_SIZES[kind])
        text = serialize_instance(inst)
        back = deserialize_instance(text)
        assert serialize_instance(back) == text
        # and the round-tripped instance builds an identical game
        g1, g2 = build_game(inst), build_game(back)
        blocks = interior_blocks(g1, 0)
        pi = np.full(g1.leader.param_dim, 0.1)
        assert g1.leader.value(blocks, pi) == g2.leader.value(blocks, pi)
