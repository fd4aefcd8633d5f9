import math
import unittest
import warnings

import numpy as np
import numpy.testing as npt

from ractc import population
from ractc.autodiff import Tape


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestLogisticLevels(unittest.TestCase):

    def test_two_value_fit(self):
        fit = population.fit_logistic([0, 10])
        self.assertEqual((fit.mu, fit.sigma), (5.0, 5.0))
        self.assertEqual((fit.min_pop, fit.max_pop), (0.0, 10.0))

    def test_constant_populations_are_refused(self):
        with self.assertRaises(population.DegeneratePopulationError) as context:
            population.fit_logistic([300, 300, 300])
        self.assertIn('no_pop', str(context.exception))
        with self.assertRaises(population.DegeneratePopulationError):
            population.fit_logistic([12])

    def test_recovers_location_of_logistic_sample(self):
        sample = np.random.default_rng(0).logistic(loc=1000.0, scale=100.0, size=100000)
        fit = population.fit_logistic(sample)
        self.assertLess(abs(fit.mu - 1000.0) / 1000.0, 0.01)

    def test_cdf_values(self):
        fit = population.LogisticFit(mu=50.0, sigma=8.0, min_pop=0.0, max_pop=100.0)
        self.assertAlmostEqual(float(population.logistic_cdf(50.0, fit)), 0.5, delta=1e-15)
        upper_quartile = 50.0 + math.sqrt(3.0) * 8.0 * math.log(3.0) / math.pi
        self.assertAlmostEqual(float(population.logistic_cdf(upper_quartile, fit)), 0.75,
                               delta=1e-12)
        values = population.logistic_cdf(np.linspace(0, 100, 50), fit)
        self.assertTrue(np.all(np.diff(values) > 0))

    def test_range_end_levels(self):
        fit = population.fit_logistic([10, 40, 55, 90])
        self.assertEqual(population.population_level(10, fit, 5), 0)
        self.assertEqual(population.population_level(90, fit, 5), 4)

    def test_symmetric_range_midpoint(self):
        fit = population.LogisticFit(mu=200.0, sigma=30.0, min_pop=150.0, max_pop=250.0)
        self.assertEqual(population.population_level(200.0, fit, 5), 2)

    def test_out_of_range_values_are_clamped_with_warning(self):
        fit = population.LogisticFit(mu=200.0, sigma=30.0, min_pop=150.0, max_pop=250.0)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            levels = population.population_level([10.0, 900.0], fit, 4)
        npt.assert_array_equal(levels, [0, 3])
        self.assertTrue(any(issubclass(item.category, population.PopulationRangeWarning)
                            for item in caught))

    def test_levels_are_monotone(self):
        populations = np.random.default_rng(1).lognormal(7.0, 0.5, size=300)
        fit = population.fit_logistic(populations)
        order = np.argsort(populations)
        levels = population.population_level(populations[order], fit, 10)
        self.assertTrue(np.all(np.diff(levels) >= 0))

    def test_quantile_balance(self):
        k1 = 5
        sample = np.random.default_rng(2).logistic(loc=1000.0, scale=100.0, size=100000)
        fit = population.fit_logistic(sample)
        levels = population.population_level(sample, fit, k1)
        shares = np.bincount(levels, minlength=k1) / float(sample.size)
        npt.assert_allclose(shares, np.full(k1, 1.0 / k1), rtol=0, atol=0.01)

    def test_similarity_is_block_structured(self):
        _, levels = population.population_levels([5, 500, 7, 480, 6, 250], 3)
        similarity = levels.similarity
        npt.assert_array_equal(similarity, similarity.T)
        npt.assert_array_equal(np.diag(similarity), np.ones(6))
        order = np.argsort(levels.levels, kind='stable')
        permuted = similarity[np.ix_(order, order)]
        sorted_levels = levels.levels[order]
        npt.assert_array_equal(permuted, (sorted_levels[:, None] == sorted_levels[None, :]))


class TestPopGcn(unittest.TestCase):

    def test_identity_similarity(self):
        rng = np.random.default_rng(3)
        g, w = rng.normal(size=(3, 2)), rng.normal(size=(2, 2))
        out = population.pop_gcn(Tape(), g, np.eye(3), w)
        npt.assert_allclose(out.value, sigmoid(g.dot(w)), rtol=0, atol=1e-12)

    def test_zero_embeddings(self):
        out = population.pop_gcn(Tape(), np.zeros((4, 3)), np.ones((4, 4)), np.ones((3, 3)))
        npt.assert_array_equal(out.value, np.full((4, 3), 0.5))

    def test_three_regions_two_levels(self):
        similarity = population.similarity_matrix([0, 1, 0])
        g = np.array([[0.2, -0.1], [0.4, 0.9], [-0.6, 0.3]])
        w = np.array([[1.0, -2.0], [0.5, 0.25]])
        degree = similarity.sum(axis=1)
        d = np.diag(1.0 / np.sqrt(degree))
        expected = sigmoid(d.dot(similarity).dot(d).dot(g).dot(w))
        out = population.pop_gcn(Tape(), g, similarity, w)
        npt.assert_allclose(out.value, expected, rtol=0, atol=1e-12)

    def test_same_level_same_rows_give_same_output(self):
        similarity = population.similarity_matrix([2, 2, 0])
        g = np.array([[0.3, 0.1], [0.3, 0.1], [-1.0, 2.0]])
        out = population.pop_gcn(Tape(), g, similarity, np.array([[0.5, 1.0], [-1.0, 0.2]]))
        npt.assert_array_equal(out.value[0], out.value[1])


class TestEnhanceOrigin(unittest.TestCase):

    def test_zero_gate_zeroes_origin(self):
        rng = np.random.default_rng(4)
        out = population.enhance_origin(Tape(), rng.normal(size=(2, 3)), rng.normal(size=(2, 3)),
                                        np.zeros((3, 3)), np.zeros((1, 3)), np.array([0.25]))
        npt.assert_array_equal(out.value, np.zeros((2, 3)))

    def test_unit_slope_is_linear(self):
        rng = np.random.default_rng(5)
        g_out, o_prime = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        w, b = rng.normal(size=(3, 3)), rng.normal(size=(1, 3))
        out = population.enhance_origin(Tape(), g_out, o_prime, w, b, np.array([1.0]))
        npt.assert_allclose(out.value, (g_out.dot(w) + b) * o_prime, rtol=0, atol=1e-12)

    def test_two_region_hand_evaluation(self):
        g_out = np.array([[1.0, -2.0], [0.5, 0.5]])
        o_prime = np.array([[2.0, 3.0], [-1.0, 4.0]])
        w = np.array([[1.0, 0.0], [0.0, 1.0]])
        b = np.array([[0.5, 0.5]])
        # pre-activations [[1.5, -1.5], [1.0, 1.0]]
        expected = np.array([[1.5 * 2.0, -1.5 * 0.25 * 3.0], [1.0 * -1.0, 1.0 * 4.0]])
        out = population.enhance_origin(Tape(), g_out, o_prime, w, b, np.array([0.25]))
        npt.assert_allclose(out.value, expected, rtol=0, atol=1e-12)


if __name__ == '__main__':
    unittest.main()
