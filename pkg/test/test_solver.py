import itertools
import unittest

import numpy as np
from numpy.testing import assert_allclose

from csnet.cs_core import (
    DimensionError,
    MeasurementMatrix,
    NonzeroLaw,
    generate_bernoulli_matrix,
    generate_gaussian_matrix,
    generate_sparse_signal,
    identity_matrix,
    measure,
)
from csnet.solver import (
    CapExceededError,
    DenoiseConfig,
    RecoveryStatus,
    basis_pursuit,
    basis_pursuit_denoise,
    certify_unique_minimizer,
    l0_oracle,
    support_threshold,
)


def full_rank_subsets(phi: MeasurementMatrix, size: int) -> bool:
    return all(
        np.linalg.matrix_rank(phi.entries[:, list(subset)]) == size
        for subset in itertools.combinations(range(phi.cols), size)
    )


class TestBasisPursuit(unittest.TestCase):
    def test_identity_returns_y(self):
        y = np.array([1.5, 0.0, -2.0, 0.25])

        result = basis_pursuit(identity_matrix(4), y)

        self.assertIs(result.status, RecoveryStatus.OPTIMAL)
        assert_allclose(result.x, y, atol=1e-12)

    def test_zero_measurements(self):
        phi = generate_bernoulli_matrix(3, 6, seed=1)

        result = basis_pursuit(phi, np.zeros(3))

        assert_allclose(result.x, np.zeros(6))
        self.assertEqual(result.objective, 0.0)

    def test_one_sparse_matches_oracle(self):
        # Arrange
        phi = generate_bernoulli_matrix(6, 8, seed=11)
        x0 = np.zeros(8)
        x0[3] = 5.0
        y = measure(phi, x0)
        oracle = l0_oracle(phi, y, 2)

        # Act
        result = basis_pursuit(phi, y)

        # Assert
        columns = phi.entries
        parallel = [j for j in range(8) if np.isclose(abs(columns[:, j] @ columns[:, 3]), 1.0)]
        self.assertEqual(oracle.support, (parallel[0],))
        if parallel == [3] and certify_unique_minimizer(phi, y, result):
            assert_allclose(result.x, x0, atol=1e-6)

    def test_recovers_sparse_signal_and_objective(self):
        # Arrange
        phi = generate_bernoulli_matrix(42, 128, seed=3)
        x0 = generate_sparse_signal(128, 4, NonzeroLaw.gaussian(), seed=4)
        y = measure(phi, x0)

        # Act
        result = basis_pursuit(phi, y)

        # Assert
        self.assertTrue(result.ok)
        assert_allclose(result.x, x0.entries, atol=1e-6)
        self.assertAlmostEqual(result.objective, float(np.abs(result.x).sum()), delta=1e-9)
        self.assertLessEqual(result.residual_norm, 1e-8 * np.linalg.norm(y))
        self.assertGreater(result.op_count, 0)

    def test_scaling_equivariance(self):
        phi = generate_bernoulli_matrix(20, 40, seed=2)
        y = measure(phi, generate_sparse_signal(40, 3, NonzeroLaw.gaussian(), seed=5))

        base = basis_pursuit(phi, y)
        scaled = basis_pursuit(phi, -2.5 * y)

        assert_allclose(scaled.x, -2.5 * base.x, atol=1e-6)

    def test_inconsistent_system_is_infeasible(self):
        entries = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])

        result = basis_pursuit(MeasurementMatrix(entries), np.array([1.0, 2.0]))

        self.assertIs(result.status, RecoveryStatus.INFEASIBLE)
        self.assertFalse(result.ok)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            basis_pursuit(identity_matrix(3), np.ones(2))

    def test_op_count_is_reproducible(self):
        phi = generate_bernoulli_matrix(10, 20, seed=7)
        y = measure(phi, generate_sparse_signal(20, 2, NonzeroLaw.gaussian(), seed=8))

        self.assertEqual(basis_pursuit(phi, y).op_count, basis_pursuit(phi, y).op_count)

    def test_agrees_with_oracle_on_small_instances(self):
        for seed in range(5):
            # Arrange
            phi = generate_gaussian_matrix(8, 12, seed=seed)
            if not full_rank_subsets(phi, 8):
                continue
            x0 = generate_sparse_signal(12, 2, NonzeroLaw.gaussian(), seed=100 + seed)
            y = measure(phi, x0)

            # Act
            result = basis_pursuit(phi, y)
            oracle = l0_oracle(phi, y, 2)

            # Assert
            if len(result.support) <= 2:
                assert_allclose(result.x, oracle.x, atol=1e-6)

    def test_certified_unique_solutions_match_the_oracle(self):
        certified = 0
        for seed in range(500):
            # Arrange
            n = 8 + seed % 9
            k = 1 + seed % 2
            phi = generate_gaussian_matrix(3 * n // 4, n, seed=seed)
            x0 = generate_sparse_signal(n, k, NonzeroLaw.gaussian(), seed=1000 + seed)
            y = measure(phi, x0)

            # Act
            result = basis_pursuit(phi, y)
            if len(result.support) > k or not certify_unique_minimizer(phi, y, result):
                continue
            oracle = l0_oracle(phi, y, 2)

            # Assert
            certified += 1
            assert_allclose(result.x, oracle.x, atol=1e-6, err_msg=f"seed {seed}")

        self.assertGreaterEqual(certified, 350)


class TestSupportThreshold(unittest.TestCase):
    def test_threshold_floor_and_scale(self):
        self.assertEqual(support_threshold(np.array([0.1, -0.2])), 1e-6)
        self.assertAlmostEqual(support_threshold(np.array([0.0, -300.0])), 3e-4)

    def test_round_off_is_not_support(self):
        result = basis_pursuit(identity_matrix(3), np.array([1.0, 1e-9, 0.0]))

        self.assertEqual(result.support, (0,))


class TestBasisPursuitDenoise(unittest.TestCase):
    def test_epsilon_zero_matches_basis_pursuit(self):
        phi = generate_bernoulli_matrix(20, 40, seed=9)
        y = measure(phi, generate_sparse_signal(40, 3, NonzeroLaw.gaussian(), seed=10))

        exact = basis_pursuit(phi, y)
        denoised = basis_pursuit_denoise(phi, y, DenoiseConfig(epsilon=0.0))

        assert_allclose(denoised.x, exact.x, atol=1e-5)

    def test_identity_with_zero_epsilon(self):
        y = np.array([3.0, -1.0])

        result = basis_pursuit_denoise(identity_matrix(2), y, DenoiseConfig(epsilon=0.0))

        assert_allclose(result.x, y, atol=1e-12)

    def test_large_epsilon_gives_zero(self):
        phi = generate_gaussian_matrix(2, 4, seed=1)
        y = np.array([0.3, -0.4])

        result = basis_pursuit_denoise(phi, y, DenoiseConfig(epsilon=10 * np.linalg.norm(y)))

        assert_allclose(result.x, np.zeros(4))
        self.assertTrue(result.ok)

    def test_noisy_recovery_is_feasible_and_close(self):
        # Arrange
        phi = generate_bernoulli_matrix(60, 128, seed=21)
        x0 = generate_sparse_signal(128, 4, NonzeroLaw.gaussian(), seed=22)
        rng = np.random.default_rng(23)
        epsilon = 0.05
        noise = rng.normal(size=60)
        y = measure(phi, x0) + epsilon * noise / np.linalg.norm(noise)

        # Act
        result = basis_pursuit_denoise(phi, y, DenoiseConfig(epsilon=epsilon, max_iterations=20_000))

        # Assert
        self.assertLessEqual(result.residual_norm, epsilon * (1 + 1e-4) + 1e-12)
        self.assertLess(np.linalg.norm(result.x - x0.entries), 10 * epsilon)

    def test_epsilon_below_range_distance_is_infeasible(self):
        entries = np.array([[1.0, 1.0], [1.0, 1.0]])

        result = basis_pursuit_denoise(MeasurementMatrix(entries), np.array([1.0, 3.0]), DenoiseConfig(epsilon=0.1))

        self.assertIs(result.status, RecoveryStatus.INFEASIBLE)

    def test_iteration_budget_exhaustion_is_a_status(self):
        phi = generate_bernoulli_matrix(30, 80, seed=5)
        y = measure(phi, generate_sparse_signal(80, 5, NonzeroLaw.gaussian(), seed=6))

        result = basis_pursuit_denoise(phi, y, DenoiseConfig(epsilon=1e-3, max_iterations=3))

        self.assertIs(result.status, RecoveryStatus.MAX_ITER)
        self.assertLessEqual(result.residual_norm, 1e-3 * (1 + 1e-9))

    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            DenoiseConfig(epsilon=-1.0)
        with self.assertRaises(ValueError):
            DenoiseConfig(epsilon=1.0, max_iterations=0)


class TestL0Oracle(unittest.TestCase):
    def test_identity_two_sparse(self):
        y = np.array([0.0, 2.0, 0.0, -1.0])

        result = l0_oracle(identity_matrix(4), y, 2)

        assert_allclose(result.x, y, atol=1e-12)

    def test_duplicated_columns_break_ties_by_index(self):
        entries = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])

        result = l0_oracle(MeasurementMatrix(entries), entries[:, 2], 1)

        self.assertEqual(result.support, (0,))

    def test_random_two_sparse(self):
        phi = generate_gaussian_matrix(6, 12, seed=13)
        self.assertTrue(full_rank_subsets(phi, 4))
        x0 = generate_sparse_signal(12, 2, NonzeroLaw.gaussian(), seed=14)

        result = l0_oracle(phi, measure(phi, x0), 2)

        assert_allclose(result.x, x0.entries, atol=1e-8)

    def test_cap(self):
        with self.assertRaises(CapExceededError):
            l0_oracle(identity_matrix(30), np.ones(30), 10, cap=1000)

    def test_no_consistent_support(self):
        y = np.ones(4)

        with self.assertRaises(ValueError):
            l0_oracle(identity_matrix(4), y, 2)


if __name__ == "__main__":
    unittest.main()
