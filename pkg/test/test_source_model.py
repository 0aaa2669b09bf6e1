import math
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from csnet.cs_core import NonzeroLaw, binary_entropy, generate_sparse_signal, identity_matrix
from csnet.solver import CapExceededError
from csnet.source_model import (
    SourceEnsemble,
    SourceMode,
    analytic_entropies,
    exact_latent_entropy,
    make_ensemble,
    per_source_entropy,
    plugin_entropy_with_error,
    plugin_joint_entropy,
    sample_messages,
)


class TestEnsemble(unittest.TestCase):
    def test_transform_is_nonsingular(self):
        ens = make_ensemble(16, 3, 4, "fixed_k", seed=1)

        self.assertEqual(np.linalg.matrix_rank(ens.transform.entries), 16)
        self.assertAlmostEqual(ens.alpha, 3 / 16)
        self.assertEqual(ens.levels, 16)

    def test_invalid_ensembles(self):
        with self.assertRaises(ValueError):
            SourceEnsemble(n=2, k=1, alpha=0.5, transform=identity_matrix(2), symbol_rate=0)
        with self.assertRaises(ValueError):
            SourceEnsemble(n=2, k=1, alpha=1.0, transform=identity_matrix(2), symbol_rate=1)
        with self.assertRaises(ValueError):
            SourceEnsemble(n=3, k=1, alpha=0.5, transform=identity_matrix(2), symbol_rate=1)

    def test_singular_transform_is_rejected(self):
        from csnet.cs_core import MeasurementMatrix

        with self.assertRaises(ValueError):
            SourceEnsemble(n=2, k=1, alpha=0.5, transform=MeasurementMatrix(np.ones((2, 2))), symbol_rate=1)


class TestSampleMessages(unittest.TestCase):
    def test_k_zero_is_silent(self):
        ens = make_ensemble(6, 0, 2, "fixed_k", seed=2)

        msg = sample_messages(ens, 0, seed=3)

        assert_array_equal(msg.latent.entries, np.zeros(6))
        assert_array_equal(msg.observed, np.zeros(6))

    def test_identity_transform_observes_latent(self):
        # Arrange
        ens = SourceEnsemble(n=4, k=1, alpha=0.25, transform=identity_matrix(4), symbol_rate=1)

        # Act
        msg = sample_messages(ens, 5, seed=9)

        # Assert
        assert_array_equal(msg.observed, msg.latent.entries)
        self.assertEqual(msg.latent.sparsity, 1)
        self.assertIn(msg.latent.entries[msg.latent.support[0]], (1.0, 2.0))

    def test_observed_is_transform_of_latent(self):
        ens = make_ensemble(12, 3, 4, "fixed_k", seed=4)

        for t in range(5):
            msg = sample_messages(ens, t, seed=5)

            assert_allclose(msg.observed, ens.transform.entries @ msg.latent.entries, atol=1e-9)
            assert_allclose(np.linalg.solve(ens.transform.entries, msg.observed), msg.latent.entries, atol=1e-6)

    def test_deterministic_per_time_index(self):
        ens = make_ensemble(8, 2, 3, "bernoulli_support", seed=6, alpha=0.3)

        first = sample_messages(ens, 4, seed=7)
        again = sample_messages(ens, 4, seed=7)

        assert_array_equal(first.latent.entries, again.latent.entries)
        assert_array_equal(first.observed, again.observed)

    def test_bernoulli_support_values_are_uniform(self):
        # Arrange
        law = NonzeroLaw.bernoulli_support(0.1, 8)

        # Act
        x = generate_sparse_signal(10_000, 0, law, seed=3)

        # Assert
        values = x.entries[list(x.support)]
        count = values.size
        sigma = math.sqrt(count * (1 / 8) * (7 / 8))
        for level in range(1, 9):
            self.assertLessEqual(abs(np.count_nonzero(values == level) - count / 8), 4 * sigma)


class TestAnalyticEntropies(unittest.TestCase):
    def test_worked_example(self):
        # Arrange
        ens = make_ensemble(10, 2, 4, "fixed_k", seed=1)

        # Act
        report = analytic_entropies(ens, 6)

        # Assert
        self.assertAlmostEqual(report.joint, 10 * binary_entropy(0.2) + 10, places=9)
        self.assertAlmostEqual(report.joint, 17.2193, places=4)
        self.assertAlmostEqual(report.joint_approx, 10 * binary_entropy(0.2) + 8, places=9)
        self.assertEqual(report.per_source, 4.5)
        self.assertEqual(report.sum_active, 27.0)
        self.assertEqual(report.sum_all, 45.0)
        self.assertEqual(report.subset_m, report.joint)
        self.assertEqual(report.ordering_violations(), [])

    def test_single_nonzero_has_no_log_term(self):
        ens = make_ensemble(8, 1, 4, "fixed_k", seed=1)

        self.assertEqual(per_source_entropy(ens), 4.0)

    def test_violations_are_logged_not_raised(self):
        ens = make_ensemble(4, 2, 1, "fixed_k", seed=1)

        with self.assertLogs("csnet.source_model", level="WARNING"):
            report = analytic_entropies(ens, 1)

        self.assertTrue(report.ordering_violations())

    def test_exact_entropy(self):
        ens = make_ensemble(1, 1, 1, "bernoulli_support", seed=0, alpha=0.5)
        fixed = make_ensemble(6, 2, 3, "fixed_k", seed=0)

        self.assertAlmostEqual(exact_latent_entropy(ens), 1.5)
        self.assertAlmostEqual(exact_latent_entropy(fixed), math.log2(15) + 6)


class TestPluginEntropy(unittest.TestCase):
    def test_three_outcome_law(self):
        ens = make_ensemble(1, 1, 1, "bernoulli_support", seed=0, alpha=0.5)

        bits = plugin_joint_entropy(ens, 1_000_000, seed=1)

        self.assertAlmostEqual(bits, 1.5, delta=0.01)

    def test_deterministic_ensemble(self):
        ens = make_ensemble(3, 0, 1, "fixed_k", seed=0)

        self.assertEqual(plugin_joint_entropy(ens, 10_000, seed=1), 0.0)

    def test_matches_exact_entropy_for_independent_coordinates(self):
        # Arrange
        ens = make_ensemble(8, 2, 2, "bernoulli_support", seed=3, alpha=0.25)
        exact = 8 * (binary_entropy(0.25) + 0.25 * 2)

        # Act
        bits = plugin_joint_entropy(ens, 200_000, seed=4)

        # Assert
        self.assertAlmostEqual(exact_latent_entropy(ens), exact)
        self.assertLessEqual(abs(bits - exact) / exact, 0.05)

    def test_estimate_is_stable_when_samples_double(self):
        ens = make_ensemble(2, 1, 1, "bernoulli_support", seed=5, alpha=0.4)

        small = plugin_entropy_with_error(ens, 20_000, seed=6)
        large = plugin_entropy_with_error(ens, 40_000, seed=6)

        self.assertGreater(small.standard_error, 0.0)
        self.assertLessEqual(abs(small.bits - large.bits), 3 * (small.standard_error + large.standard_error))

    def test_caps(self):
        with self.assertRaises(CapExceededError):
            plugin_joint_entropy(make_ensemble(11, 2, 1, "fixed_k", seed=0), 10_000, seed=0)
        with self.assertRaises(CapExceededError):
            plugin_joint_entropy(make_ensemble(4, 1, 4, "fixed_k", seed=0), 10_000, seed=0)
        with self.assertRaises(ValueError):
            plugin_joint_entropy(make_ensemble(4, 1, 1, "fixed_k", seed=0), 100, seed=0)


if __name__ == "__main__":
    unittest.main()
