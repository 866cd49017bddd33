import numpy as np
import pytest
from hypothesis import given, strategies as st

from stackgrad.errors import DimensionMismatch, InfeasibleSpace
from stackgrad.games import toys
from stackgrad.model import (JointStrategy, StrategySpace, box_space,
                             feasibility_residual, project_to_space,
                             simplex_space)


def general_space(dim=3):
    """A simplex written with a scaled equality row so it defeats the
    pattern matcher and exercises the active-set path."""
    A = 2.0 * np.ones((1, dim))
    b = np.array([2.0])
    return StrategySpace(A=A, b=b, G=-np.eye(dim), h=np.zeros(dim), dim=dim)


class TestStrategySpace:
    def test_simplex_is_detected(self):
        assert simplex_space(3).kind == "simplex"

    def test_box_is_detected(self):
        assert box_space([0.0, 0.0], [1.0, 1.0]).kind == "box"

    def test_capped_box_is_detected(self):
        G = np.vstack([-np.eye(3), np.eye(3), np.ones((1, 3))])
        h = np.concatenate([np.zeros(3), np.ones(3), [1.5]])
        sp = StrategySpace(A=np.zeros((0, 3)), b=np.zeros(0), G=G, h=h, dim=3)
        assert sp.kind == "capped_box"

    def test_rank_deficient_equalities_rejected(self):
        A = np.array([[1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DimensionMismatch):
            StrategySpace(A=A, b=np.array([1.0, 2.0]),
                          G=np.zeros((0, 2)), h=np.zeros(0), dim=2)

    def test_empty_polytope_rejected(self):
        # x >= 1 and x <= 0 simultaneously
        G = np.array([[-1.0], [1.0]])
        h = np.array([-1.0, 0.0])
        with pytest.raises(InfeasibleSpace):
            StrategySpace(A=np.zeros((0, 1)), b=np.zeros(0), G=G, h=h, dim=1)


class TestProjection:
    def test_simplex_center(self):
        sp = simplex_space(3)
        np.testing.assert_allclose(project_to_space(np.full(3, 0.5), sp),
                                   np.full(3, 1 / 3), atol=1e-12)

    def test_already_feasible_fixed_point(self):
        sp = simplex_space(3)
        y = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(project_to_space(y, sp), y, atol=1e-12)

    def test_box_clamp(self):
        sp = box_space([0.0, 0.0], [1.0, 1.0])
        np.testing.assert_allclose(project_to_space(np.array([2.0, -0.5]), sp),
                                   [1.0, 0.0], atol=1e-15)

    def test_general_path_matches_simplex_projection(self):
        gen = general_space(3)
        assert gen.kind == "general"
        rng = np.random.default_rng(0)
        for _ in range(25):
            y = rng.normal(size=3)
            got = project_to_space(y, gen)
            want = project_to_space(y, simplex_space(3))
            np.testing.assert_allclose(got, want, atol=1e-7)

    def test_capped_box_projection_is_optimal(self):
        G = np.vstack([-np.eye(4), np.eye(4), np.ones((1, 4))])
        h = np.concatenate([np.zeros(4), np.ones(4), [1.2]])
        sp = StrategySpace(A=np.zeros((0, 4)), b=np.zeros(0), G=G, h=h, dim=4)
        rng = np.random.default_rng(3)
        for _ in range(200):
            y = rng.normal(scale=2.0, size=4)
            x = project_to_space(y, sp)
            assert x.min() >= -1e-12 and x.max() <= 1 + 1e-12
            assert x.sum() <= 1.2 + 1e-9
            z = project_to_space(rng.uniform(0, 1, 4), sp)  # random feasible
            assert np.linalg.norm(x - y) <= np.linalg.norm(z - y) + 1e-9

    def test_idempotence(self):
        rng = np.random.default_rng(1)
        for sp in (simplex_space(4), box_space([0, 0], [1, 2]), general_space()):
            for _ in range(50):
                y = rng.normal(scale=3.0, size=sp.dim)
                p1 = project_to_space(y, sp)
                p2 = project_to_space(p1, sp)
                assert np.max(np.abs(p2 - p1)) <= 2e-9

    def test_optimality_against_random_feasible_points(self):
        # 1000 trials: no feasible point is closer than the projection
        rng = np.random.default_rng(2)
        sp = simplex_space(5)
        for _ in range(1000):
            y = rng.normal(scale=2.0, size=5)
            x = project_to_space(y, sp)
            z = rng.dirichlet(np.ones(5))
            assert np.linalg.norm(x - y) <= np.linalg.norm(z - y) + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            project_to_space(np.zeros(2), simplex_space(3))


class TestJointStrategy:
    @given(st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=4),
           st.integers(0, 2**32 - 1))
    def test_split_concat_bijection(self, dims, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=sum(dims))
        js = JointStrategy.from_concat(x, dims)
        np.testing.assert_array_equal(js.concat, x)
        assert js.dims == tuple(dims)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            JointStrategy.from_concat(np.zeros(3), [2, 2])


class TestFeasibilityResidual:
    def setup_method(self):
        self.game = toys.two_quadratic_game()

    def test_feasible_is_zero(self):
        x = JointStrategy(blocks=(np.array([0.3]), np.array([-0.2])))
        assert feasibility_residual(x, self.game) == 0.0

    def test_simplex_inequality_violation(self):
        import stackgrad.games.nfg as nfg
        inst = nfg.generate(1)
        game = nfg.build_game(inst)
        blocks = [np.array([0.6, 0.6, -0.2])] + \
            [np.array([1.0, 0.0, 0.0])] * 2
        res = feasibility_residual(JointStrategy(blocks=tuple(blocks)), game)
        assert res == pytest.approx(0.2, abs=1e-12)

    def test_simplex_equality_violation(self):
        import stackgrad.games.nfg as nfg
        game = nfg.build_game(nfg.generate(1))
        blocks = [np.array([0.5, 0.5, 0.5])] + [np.array([1.0, 0.0, 0.0])] * 2
        res = feasibility_residual(JointStrategy(blocks=tuple(blocks)), game)
        assert res == pytest.approx(0.5, abs=1e-12)

    def test_block_count_mismatch(self):
        with pytest.raises(DimensionMismatch):
            feasibility_residual(JointStrategy(blocks=(np.array([0.0]),)),
                                 self.game)
