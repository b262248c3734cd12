import numpy as np
import pytest

from broyden_lab.broyden import (
    DirectionKind,
    DirectionRule,
    JacobianPair,
    broyd_matrix,
    broyden_bad_update,
    broyden_secant_update,
    greedy_direction,
    random_direction,
    sherman_morrison_inverse,
)
from broyden_lab.exceptions import DegenerateUpdate, ZeroDirection
from broyden_lab.rng import make_rng


class TestUpdates:
    def test_broyd_examples(self):
        np.testing.assert_allclose(broyd_matrix(np.array([[2.0]]), np.array([[5.0]]), np.array([1.0])), [[5.0]])
        np.testing.assert_allclose(broyd_matrix(np.eye(2), np.diag([3.0, 1.0]), np.array([1.0, 0.0])),
                                   np.diag([3.0, 1.0]))
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(broyd_matrix(np.zeros((2, 2)), A, np.ones(2)), [[1.5, 1.5], [3.5, 3.5]])

    def test_secant_examples(self):
        np.testing.assert_allclose(broyden_secant_update(np.eye(2), np.array([3.0, 0.0]), np.array([1.0, 0.0])),
                                   np.diag([3.0, 1.0]))
        B = np.diag([2.0, 2.0])
        np.testing.assert_allclose(broyden_secant_update(B, np.array([0.0, 2.0]), np.array([0.0, 1.0])), B)
        np.testing.assert_allclose(broyden_secant_update(np.zeros((2, 2)), np.array([3.0, 7.0]), np.ones(2)),
                                   [[1.5, 1.5], [3.5, 3.5]])

    def test_secant_matches_broyd(self):
        rng = np.random.default_rng(42)
        B, A = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
        u = rng.standard_normal(4)
        np.testing.assert_allclose(broyden_secant_update(B, A @ u, u), broyd_matrix(B, A, u), atol=1e-13)

    def test_bad_examples(self):
        np.testing.assert_allclose(broyden_bad_update(np.eye(2), np.array([1.0, 0.0]), np.array([0.5, 0.0])),
                                   np.diag([0.5, 1.0]))
        H = np.array([[1.0, 2.0], [0.5, 3.0]])
        y = np.array([1.0, -1.0])
        np.testing.assert_allclose(broyden_bad_update(H, y, H @ y), H)
        np.testing.assert_allclose(broyden_bad_update(np.zeros((2, 2)), np.ones(2), np.array([2.0, 4.0])),
                                   [[1.0, 1.0], [2.0, 2.0]])

    def test_zero_direction(self):
        with pytest.raises(ZeroDirection):
            broyd_matrix(np.eye(2), np.eye(2), np.zeros(2))
        with pytest.raises(ZeroDirection):
            broyden_secant_update(np.eye(2), np.ones(2), np.zeros(2))
        with pytest.raises(ZeroDirection):
            broyden_bad_update(np.eye(2), np.zeros(2), np.ones(2))


class TestShermanMorrison:
    def test_diagonal_example(self):
        # B = diag(2, 2) moved to map e1 to (4, 0) is diag(4, 2)
        H = sherman_morrison_inverse(np.diag([0.5, 0.5]), np.array([4.0, 0.0]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(H, np.diag([0.25, 0.5]))

    def test_noop(self):
        u = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(sherman_morrison_inverse(np.eye(3), u, u), np.eye(3))

    def test_consistent_pair(self):
        rng = np.random.default_rng(42)
        B = np.eye(5) * 3 + rng.standard_normal((5, 5))
        H = np.linalg.inv(B)
        y, u = rng.standard_normal(5), rng.standard_normal(5)
        pair = JacobianPair(broyden_secant_update(B, y, u), sherman_morrison_inverse(H, y, u))
        assert pair.inverse_residual() <= 1e-8
        assert pair.is_consistent()

    def test_degenerate(self):
        # B = I, u = e1, y = e2: B+ e1 = e2 and B+ e2 = e2, so B+ is singular
        with pytest.raises(DegenerateUpdate):
            sherman_morrison_inverse(np.eye(2), np.array([0.0, 1.0]), np.array([1.0, 0.0]))


class TestDirections:
    def test_greedy_examples(self):
        J = np.zeros((2, 2))
        assert greedy_direction(np.diag([1.0, 2.0]), J) == 1
        assert greedy_direction(J, J) == 0
        D = np.array([[3.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 4.0]])
        assert greedy_direction(D, np.zeros((3, 3))) == 1

    def test_greedy_tie_lowest(self):
        assert greedy_direction(np.eye(4), np.zeros((4, 4))) == 0

    def test_sphere_unit(self):
        rng = make_rng(0, 2)
        for _ in range(10):
            u, i = random_direction(6, DirectionRule(DirectionKind.RANDOM_SPHERE), rng)
            assert i is None
            assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)

    def test_basis_frequencies(self):
        rng = make_rng(0, 2)
        rule = DirectionRule(DirectionKind.RANDOM_BASIS)
        counts = np.zeros(4)
        for _ in range(40_000):
            counts[random_direction(4, rule, rng)[1]] += 1
        np.testing.assert_allclose(counts / 40_000, 0.25, atol=0.01)

    def test_basis_isotropy(self):
        rng = make_rng(1, 2)
        rule = DirectionRule(DirectionKind.RANDOM_BASIS)
        n, draws = 5, 100_000
        M = np.zeros((n, n))
        for _ in range(draws):
            u, _ = random_direction(n, rule, rng)
            M += np.outer(u, u) / (u @ u)
        np.testing.assert_allclose(M / draws, np.eye(n) / n, atol=0.01)

    def test_rejects_non_random(self):
        with pytest.raises(ValueError):
            random_direction(3, DirectionRule(DirectionKind.SECANT), make_rng(0))
