import math
import unittest
import warnings

import numpy as np
import numpy.testing as npt

from ractc import competition
from ractc.autodiff import ParameterStore, Tape


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def two_groups(count=6):
    """ Regions 0..count/2-1 share attributes 0,1 near one point; the rest share 2,3 far away """
    half = count // 2
    attributes = np.zeros((count, 4), dtype=np.int64)
    attributes[:half, :2] = 1
    attributes[half:, 2:] = 1
    coordinates = np.array([0.0] * half + [50.0] * half)
    distances = np.abs(coordinates[:, None] - coordinates[None, :])
    return attributes, distances


class TestKmeans(unittest.TestCase):

    def test_single_cluster_is_the_mean(self):
        points = np.random.default_rng(0).normal(size=(20, 3))
        model = competition.kmeans(points, 1, seed=0)
        npt.assert_allclose(model.centroids[0], points.mean(axis=0), rtol=0, atol=1e-12)
        self.assertAlmostEqual(model.inertia, np.sum((points - points.mean(axis=0)) ** 2),
                               delta=1e-9)

    def test_two_points_two_clusters(self):
        model = competition.kmeans(np.array([[0.0, 1.0], [4.0, -2.0]]), 2, seed=3)
        self.assertEqual(sorted(model.labels.tolist()), [0, 1])
        self.assertEqual(model.inertia, 0.0)

    def test_separated_blobs(self):
        rng = np.random.default_rng(1)
        blob_a = rng.normal(size=(40, 2))
        blob_b = rng.normal(size=(40, 2)) + np.array([10.0, 0.0])
        model = competition.kmeans(np.vstack([blob_a, blob_b]), 2, seed=4)
        self.assertEqual(len(set(model.labels[:40])), 1)
        self.assertEqual(len(set(model.labels[40:])), 1)
        self.assertNotEqual(model.labels[0], model.labels[40])
        self.assertTrue(model.converged)

    def test_labels_are_nearest_centroids_and_inertia_never_rises(self):
        points = np.random.default_rng(2).normal(size=(60, 4))
        model = competition.kmeans(points, 5, seed=2)
        distances = np.sum((points[:, None, :] - model.centroids[None, :, :]) ** 2, axis=2)
        npt.assert_array_equal(model.labels, np.argmin(distances, axis=1))
        self.assertTrue(all(later <= earlier + 1e-9 for earlier, later in
                            zip(model.history, model.history[1:])))

    def test_k_above_point_count_is_refused(self):
        with self.assertRaises(competition.ClusteringError):
            competition.kmeans(np.zeros((3, 2)), 4)


class TestCompetitionLabels(unittest.TestCase):

    def test_identical_rows_single_cluster(self):
        labels = competition.cluster_labels(np.ones((5, 3)), 1, seed=0)
        npt.assert_array_equal(labels, np.zeros(5))

    def test_disjoint_groups_are_separated(self):
        attributes, _ = two_groups()
        labels = competition.cluster_labels(attributes, 2, seed=0)
        self.assertEqual(len(set(labels[:3])), 1)
        self.assertEqual(len(set(labels[3:])), 1)
        self.assertNotEqual(labels[0], labels[3])

    def test_same_seed_same_labels(self):
        attributes = np.random.default_rng(5).integers(0, 2, size=(30, 6))
        npt.assert_array_equal(competition.cluster_labels(attributes, 4, seed=9),
                               competition.cluster_labels(attributes, 4, seed=9))

    def test_single_cluster_gives_all_ones(self):
        attributes, distances = two_groups()
        comp = competition.competition_matrix(attributes, distances, 1, seed=0)
        npt.assert_array_equal(comp.values, np.ones((6, 6)))

    def test_separated_groups_give_block_pattern(self):
        attributes, distances = two_groups()
        comp = competition.competition_matrix(attributes, distances, 2, seed=0)
        expected = np.zeros((6, 6), dtype=np.int64)
        expected[:3, :3] = 1
        expected[3:, 3:] = 1
        npt.assert_array_equal(comp.values, expected)

    def test_matrix_is_an_equivalence_indicator(self):
        rng = np.random.default_rng(6)
        attributes = rng.integers(0, 2, size=(12, 5))
        points = rng.uniform(0, 100, size=12)
        comp = competition.competition_matrix(
            attributes, np.abs(points[:, None] - points[None, :]), 3, seed=1).values
        npt.assert_array_equal(comp, comp.T)
        npt.assert_array_equal(np.diag(comp), np.ones(12))
        npt.assert_array_equal((comp.dot(comp) > 0).astype(np.int64), comp)

    def test_standardized_constant_column_is_zero(self):
        scaled = competition.standardize_columns(np.array([[1.0, 2.0], [1.0, 4.0]]))
        npt.assert_array_equal(scaled[:, 0], [0.0, 0.0])
        npt.assert_allclose(scaled[:, 1], [-1.0, 1.0])


class TestClusterLoss(unittest.TestCase):

    def test_zero_classifier_gives_log_class_count(self):
        tape = Tape()
        loss = competition.cluster_loss(tape, tape.constant(np.ones((4, 3))),
                                        [0, 1, 2, 1], tape.constant(np.zeros((3, 3))))
        self.assertAlmostEqual(float(loss.value), math.log(3), delta=1e-12)

    def test_saturated_correct_logits(self):
        tape = Tape()
        loss = competition.cluster_loss(tape, tape.constant([[1.0, 0.0]]), [0],
                                        tape.constant([[100.0, 0.0], [0.0, 0.0]]))
        self.assertLess(float(loss.value), 1e-8)

    def test_two_region_hand_evaluation(self):
        d = np.array([[0.5, -1.0], [2.0, 0.25]])
        w_n = np.array([[1.0, 0.5], [-0.5, 2.0]])
        labels = [1, 0]
        logits = d.dot(w_n.T)
        expected = np.mean([math.log(np.exp(row).sum()) - row[label]
                            for row, label in zip(logits, labels)])
        tape = Tape()
        loss = competition.cluster_loss(tape, tape.constant(d), labels, tape.constant(w_n))
        self.assertAlmostEqual(float(loss.value), expected, delta=1e-12)

    def test_label_out_of_range(self):
        tape = Tape()
        with self.assertRaises(competition.LabelRangeError):
            competition.cluster_loss(tape, tape.constant(np.ones((2, 2))), [0, 2],
                                     tape.constant(np.ones((2, 2))))

    def test_reversal_negates_embedding_gradient(self):
        rng = np.random.default_rng(7)
        store = ParameterStore()
        store.add('d', (3, 2), rng)
        store.add('w_n', (2, 2), rng)

        def gradients(reverse):
            tape = Tape(store)
            return tape.backward(competition.cluster_loss(
                tape, tape.param('d'), [0, 1, 1], tape.param('w_n'), reverse=reverse))

        reversed_grads = gradients(True)
        plain_grads = gradients(False)
        npt.assert_array_equal(reversed_grads['d'], -plain_grads['d'])
        npt.assert_array_equal(reversed_grads['w_n'], plain_grads['w_n'])


class TestEdgeLoss(unittest.TestCase):

    def test_degenerate_competition_skips_every_edge(self):
        tape = Tape()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            loss = competition.edge_loss(
                tape, np.ones((3, 2)), np.ones((3, 2)), np.ones((3, 2)), [[0, 1], [2, 0]],
                comp=np.eye(3), w_eg=np.ones((4, 2)), rng=np.random.default_rng(0))
        self.assertEqual(float(loss.value), 0.0)
        self.assertTrue(any(issubclass(item.category, competition.EmptyEdgeSetWarning)
                            for item in caught))

    def test_zero_discriminator(self):
        rng = np.random.default_rng(8)
        tape = Tape()
        loss = competition.edge_loss(
            tape, rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng.normal(size=(3, 2)),
            [[0, 1], [1, 2]], comp=np.ones((3, 3)), w_eg=np.zeros((4, 2)), rng=rng)
        self.assertEqual(float(loss.value), 0.0)

    def test_single_edge_hand_bilinear(self):
        o = np.array([[0.2, -0.4], [1.0, 0.0], [0.0, 0.0]])
        d = np.array([[0.0, 0.0], [0.5, 1.5], [-1.0, 0.3]])
        g = np.array([[0.7, -0.2], [0.0, 0.0], [0.0, 0.0]])
        w_eg = np.array([[1.0, 0.0], [0.5, -1.0], [0.25, 2.0], [-0.75, 0.1]])
        positive = np.concatenate([sigmoid(o[0]), sigmoid(d[1])])
        negative = np.concatenate([sigmoid(o[0]), sigmoid(d[2])])
        expected = (positive.dot(w_eg).dot(g[0]) - negative.dot(w_eg).dot(g[0])) ** 2
        tape = Tape()
        loss = competition.edge_loss(tape, o, d, g, [[0, 1]], w_eg=w_eg, partners=[2])
        self.assertAlmostEqual(float(loss.value), expected, delta=1e-12)

    def test_partners_share_the_destination_cluster(self):
        comp = np.array([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]])
        edges = [[0, 1], [1, 2], [3, 3], [2, 0]]
        kept, partners, skipped = competition.sample_partners(edges, comp,
                                                              np.random.default_rng(3))
        self.assertEqual(skipped, 0)
        npt.assert_array_equal(partners, [0, 3, 2, 1])
        self.assertEqual(kept.shape, (4, 2))

    def test_observed_edges(self):
        frames = np.zeros((2, 3, 3), dtype=np.int64)
        frames[0, 2, 1] = 1
        frames[1, 0, 2] = 4
        npt.assert_array_equal(competition.observed_edges(frames), [[0, 2], [2, 1]])


if __name__ == '__main__':
    unittest.main()
