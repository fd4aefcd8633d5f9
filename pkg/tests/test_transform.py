import csv
import os
import shutil
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from ractc import preprocess, transform
from ractc.autodiff import ParameterStore, Tape, check_gradients


def path_oracle(a_l, h, w_h):
    """ Explicit sum over (vertex, hyperedge, vertex) paths """
    vertices, edges = h.shape
    dv = h.sum(axis=1)
    de = h.sum(axis=0)
    out = np.zeros_like(a_l)
    for v in range(vertices):
        if dv[v] == 0:
            continue
        for e in range(edges):
            if h[v, e] == 0 or de[e] == 0:
                continue
            for u in range(vertices):
                out[v] += h[v, e] * h[u, e] * a_l[u] / (dv[v] * de[e])
    return out.dot(w_h)


def generator_store(size, seed=0):
    store = ParameterStore()
    transform.GeneratorParams('gen').register(store, size, np.random.default_rng(seed))
    return store


class TestHyperconv(unittest.TestCase):

    def test_single_attribute_single_edge_is_identity(self):
        incidence = preprocess.build_incidence(np.array([[1]]))
        a_l = np.array([[0.3, -1.2, 2.0]])
        out = transform.hyperconv(Tape(), a_l, incidence, np.eye(3))
        npt.assert_array_equal(out.value, a_l)

    def test_zero_input(self):
        incidence = preprocess.build_incidence(np.array([[1, 0, 1], [0, 1, 1]]))
        out = transform.hyperconv(Tape(), np.zeros((3, 4)), incidence, np.ones((4, 4)))
        npt.assert_array_equal(out.value, np.zeros((3, 4)))

    def test_matches_path_summation(self):
        rng = np.random.default_rng(5)
        attributes = np.array([[1, 1, 0], [0, 1, 1]])
        incidence = preprocess.build_incidence(attributes)
        a_l = rng.normal(size=(3, 4))
        w_h = rng.normal(size=(4, 4))
        out = transform.hyperconv(Tape(), a_l, incidence, w_h)
        npt.assert_allclose(out.value, path_oracle(a_l, incidence.h, w_h), rtol=0, atol=1e-12)

    def test_five_attributes_four_regions(self):
        rng = np.random.default_rng(6)
        attributes = np.array([[1, 0, 1, 0, 0], [0, 1, 1, 0, 1], [1, 1, 0, 1, 0], [0, 0, 0, 1, 1]])
        incidence = preprocess.build_incidence(attributes)
        a_l = rng.normal(size=(5, 3))
        w_h = rng.normal(size=(3, 3))
        out = transform.hyperconv(Tape(), a_l, incidence, w_h)
        npt.assert_allclose(out.value, path_oracle(a_l, incidence.h, w_h), rtol=0, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        incidence = preprocess.build_incidence(rng.integers(0, 2, size=(4, 5)))
        a, b, w = rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.normal(size=(3, 3))
        tape = Tape()
        total = transform.hyperconv(tape, a + b, incidence, w).value
        parts = (transform.hyperconv(tape, a, incidence, w).value +
                 transform.hyperconv(tape, b, incidence, w).value)
        npt.assert_allclose(total, parts, rtol=0, atol=1e-10)


class TestTimeAttend(unittest.TestCase):

    def test_identical_embeddings_give_uniform_weights(self):
        a = np.tile([[0.5, -0.25, 1.0]], (4, 1))
        table = np.random.default_rng(1).normal(size=(24, 3))
        tape = Tape()
        context = transform.time_attend(tape, tape.constant(a), 9, tape.constant(table))
        npt.assert_allclose(context.alpha.value, np.full(4, 0.25), rtol=0, atol=1e-12)
        npt.assert_allclose(context.t_a.value, a[:1], rtol=0, atol=1e-12)

    def test_single_attribute(self):
        tape = Tape()
        a = tape.constant([[2.0, -1.0]])
        context = transform.time_attend(tape, a, 0, tape.constant(np.ones((24, 2))))
        npt.assert_array_equal(context.alpha.value, [1.0])
        npt.assert_allclose(context.t_a.value, [[2.0, -1.0]], rtol=0, atol=1e-15)

    def test_dominant_attribute(self):
        tape = Tape()
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        table = np.zeros((24, 2))
        table[18] = [10.0, 0.0]
        context = transform.time_attend(tape, tape.constant(a), 18, tape.constant(table))
        self.assertGreaterEqual(context.alpha.value[0], 0.9999)
        npt.assert_allclose(context.t_a.value, a[:1], rtol=0, atol=1e-3)

    def test_weights_sum_to_one_every_hour(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(6, 4))
        table = rng.normal(size=(24, 4))
        for hour in range(24):
            tape = Tape()
            alpha = transform.time_attend(tape, tape.constant(a), hour, tape.constant(table)).alpha
            self.assertAlmostEqual(alpha.value.sum(), 1.0, delta=1e-9)
            self.assertGreaterEqual(alpha.value.min(), 0.0)

    def test_softmax_shift_invariance(self):
        scores = np.array([0.3, -2.0, 1.7, 0.0])
        tape = Tape()
        npt.assert_allclose(tape.softmax(scores + 40.0).value, tape.softmax(scores).value,
                            rtol=0, atol=1e-9)


class TestGenerateTransform(unittest.TestCase):

    def test_zero_context_halves_base(self):
        store = generator_store(3)
        gen = transform.GeneratorParams('gen')
        tape = Tape(store)
        w = transform.generate_transform(tape, tape.constant(np.zeros((1, 3))), gen)
        npt.assert_array_equal(w.value, 0.5 * store[gen.base].value)

    def test_saturated_gate_returns_base(self):
        store = generator_store(3)
        gen = transform.GeneratorParams('gen')
        store.set_value(gen.b_t, np.full((1, 9), 50.0))
        tape = Tape(store)
        t_a = tape.constant(np.random.default_rng(2).normal(size=(1, 3)) * 0.1)
        w = transform.generate_transform(tape, t_a, gen)
        npt.assert_allclose(w.value, store[gen.base].value, rtol=0, atol=1e-12)

    def test_matches_hand_chain(self):
        size = 4
        store = generator_store(size, seed=8)
        gen = transform.GeneratorParams('gen')
        store.set_value(gen.f2, np.eye(size) + 0.01)
        values = store.values()
        t_a = np.random.default_rng(9).normal(size=(1, size))
        w_prime = (t_a.dot(values[gen.f1]) + values[gen.f1_bias]).reshape(size, size).dot(
            values[gen.f2])
        gate = t_a.dot(values[gen.w_t]) + values[gen.b_t]
        beta = (1.0 / (1.0 + np.exp(-gate.reshape(size, size)))).T
        expected = beta * values[gen.base] + (1.0 - beta) * w_prime
        tape = Tape(store)
        w = transform.generate_transform(tape, tape.constant(t_a), gen)
        self.assertEqual(w.shape, (size, size))
        npt.assert_allclose(w.value, expected, rtol=0, atol=1e-12)

    def test_gradients_through_attention_and_generator(self):
        rng = np.random.default_rng(4)
        size = 3
        store = ParameterStore()
        params = transform.AttributeEmbeddings(layers=1)
        params.register(store, 3, size, rng)
        store.add('time.embed', (24, size), rng, fan_in=size)
        gen = transform.GeneratorParams('gen')
        gen.register(store, size, rng)
        operator = preprocess.hypergraph_propagation(
            preprocess.build_incidence(np.array([[1, 1, 0], [0, 1, 1]])))

        def loss(tape):
            a = transform.attribute_embeddings(tape, params, operator)
            context = transform.time_attend(tape, a, 5, tape.param('time.embed'))
            w = transform.generate_transform(tape, context.t_a, gen)
            return tape.mean(tape.hadamard(w, w))

        report = check_gradients(loss, store, floor=1e-5)
        self.assertLessEqual(report.worst, 1e-4, report.errors)


class TestAttentionCsv(unittest.TestCase):

    def test_rows_per_hour_sum_to_one(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'attention.csv')
            rows = [(8, np.array([0.2, 0.5, 0.3])), (18, np.array([0.6, 0.1, 0.3]))]
            transform.write_attention_csv(path, rows, ['office', 'park', 'cafe'])
            with open(path) as input_file:
                records = list(csv.DictReader(input_file))
            self.assertEqual(len(records), 6)
            self.assertEqual(records[1]['attribute_name'], 'park')
            for hour in ('8', '18'):
                total = sum(float(row['weight']) for row in records if row['hour'] == hour)
                self.assertAlmostEqual(total, 1.0, delta=1e-6)
        finally:
            shutil.rmtree(tmp)


if __name__ == '__main__':
    unittest.main()
