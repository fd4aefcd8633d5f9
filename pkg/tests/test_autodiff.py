import os
import shutil
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from ractc.autodiff import (OPERATIONS, CheckpointMismatchError, NonFiniteError,
                            NonScalarRootError, NondeterministicBuilderError, ParameterStore,
                            ShapeMismatchError, Tape, adam_step, check_gradients,
                            checkpoint_fingerprint, load_checkpoint, save_checkpoint)
from ractc.ractcbase import RactcNumericError, RactcUsageError, sha256_file


def small_store(seed=3):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    store.add('a', (3, 4), rng)
    store.add('b', (4, 2), rng)
    store.add('c', (1, 2), rng)
    store.add('slope', (1,), init=ParameterStore.INIT_CONSTANT, constant=0.25)
    return store


def catalog_loss(tape):
    """ A scalar loss touching every primitive except relu """
    a = tape.param('a')
    h = tape.tanh(tape.add(tape.matmul(a, tape.param('b')), tape.param('c')))
    s = tape.sigmoid(tape.hadamard(h, h))
    p = tape.prelu(tape.subtract(h, s), tape.param('slope'))
    cat = tape.concat([p, tape.transpose(tape.reshape(h, (2, 3)))])
    weights = tape.softmax(cat)
    rows = tape.row_sum(tape.hadamard(weights, tape.lookup(a, [0, 2, 1])))
    fit = tape.mse(tape.scale(rows, 0.5), np.array([0.1, -0.2, 0.3]))
    reversed_part = tape.mean(tape.gradient_reverse(tape.hadamard(p, p)))
    return tape.add(tape.add(fit, tape.cross_entropy(cat, [0, 3, 1])), reversed_part)


def unit_store(seed=9):
    """ Parameters drawn uniformly from [-1, 1] """
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    for name, shape in (('x', (3, 4)), ('y', (3, 4)), ('w', (4, 2)), ('slope', (1,))):
        store.add(name, shape, init=ParameterStore.INIT_ZEROS)
        store.set_value(name, rng.uniform(-1.0, 1.0, size=shape))
    return store


def weigh(tape, tensor):
    """ Mean of the tensor against fixed weights in [-1, 1], giving a scalar """
    weights = np.random.default_rng(7).uniform(-1.0, 1.0, size=tensor.value.shape)
    return tape.mean(tape.hadamard(tensor, weights))


PRIMITIVE_LOSSES = {
    'matmul': lambda t: weigh(t, t.matmul(t.param('x'), t.param('w'))),
    'add': lambda t: weigh(t, t.add(t.param('x'), t.param('y'))),
    'subtract': lambda t: weigh(t, t.subtract(t.param('x'), t.param('y'))),
    'hadamard': lambda t: weigh(t, t.hadamard(t.param('x'), t.param('y'))),
    'scale': lambda t: weigh(t, t.scale(t.param('x'), 1.7)),
    'transpose': lambda t: weigh(t, t.transpose(t.param('x'))),
    'reshape': lambda t: weigh(t, t.reshape(t.param('x'), (4, 3))),
    'concat-last-axis': lambda t: weigh(t, t.concat([t.param('x'), t.param('y')])),
    'row-sum': lambda t: weigh(t, t.row_sum(t.param('x'))),
    'mean': lambda t: t.mean(t.param('x')),
    'sigmoid': lambda t: weigh(t, t.sigmoid(t.param('x'))),
    'tanh': lambda t: weigh(t, t.tanh(t.param('x'))),
    'relu': lambda t: weigh(t, t.relu(t.param('x'))),
    'prelu': lambda t: weigh(t, t.prelu(t.param('x'), t.param('slope'))),
    'softmax-vector': lambda t: weigh(t, t.softmax(t.param('x'))),
    'mse': lambda t: t.mse(t.param('x'), t.param('y')),
    'softmax-cross-entropy': lambda t: t.cross_entropy(t.param('x'), [0, 3, 1]),
    'lookup-rows': lambda t: weigh(t, t.lookup(t.param('x'), [0, 2, 2, 1])),
    'gradient-reverse': lambda t: weigh(t, t.gradient_reverse(t.param('x'))),
}


class TestTape(unittest.TestCase):

    def test_catalog_gradients_match_finite_differences(self):
        store = small_store()
        report = check_gradients(catalog_loss, store, eps=1e-6, floor=1e-6)
        self.assertEqual(set(report.errors), {'a', 'b', 'c', 'slope'})
        self.assertLessEqual(report.worst, 1e-4, report.errors)

    def test_reversed_analytic_pass_disagrees_with_finite_differences(self):
        report = check_gradients(catalog_loss, small_store(), eps=1e-6, floor=1e-6,
                                 reversal_scale=-1.0)
        self.assertGreater(report.worst, 1e-2)

    def test_every_primitive_matches_finite_differences(self):
        self.assertEqual(set(PRIMITIVE_LOSSES), set(OPERATIONS))
        for kind, loss in sorted(PRIMITIVE_LOSSES.items()):
            with self.subTest(kind=kind):
                report = check_gradients(loss, unit_store(), eps=1e-5)
                self.assertLessEqual(report.worst, 1e-5, report.errors)

    def test_linear_loss_is_exact(self):
        weights = np.random.default_rng(4).uniform(-1.0, 1.0, size=(4, 2))
        store = unit_store()
        report = check_gradients(lambda t: t.mean(t.matmul(t.param('x'), weights)), store,
                                 eps=1e-3, names=['x'])
        self.assertLessEqual(report.worst, 1e-10, report.errors)

    def test_gradient_reverse_negates_exactly(self):
        store = small_store()

        def gradient(reversals):
            tape = Tape(store)
            x = tape.matmul(tape.param('a'), tape.param('b'))
            for _ in range(reversals):
                x = tape.gradient_reverse(x)
            return tape.backward(tape.mean(tape.hadamard(x, x)))

        plain = gradient(0)
        once = gradient(1)
        twice = gradient(2)
        for name in ('a', 'b'):
            npt.assert_array_equal(once[name], -plain[name])
            npt.assert_array_equal(twice[name], plain[name])

    def test_unit_reversal_scale_is_plain_identity(self):
        store = small_store()

        def gradient(tape, reversed_path):
            x = tape.matmul(tape.param('a'), tape.param('b'))
            if reversed_path:
                x = tape.gradient_reverse(x)
            return tape.backward(tape.mean(tape.hadamard(x, x)))

        plain = gradient(Tape(store), False)
        neutral = gradient(Tape(store, reversal_scale=1.0), True)
        for name in ('a', 'b'):
            npt.assert_array_equal(neutral[name], plain[name])

    def test_gradient_reverse_is_identity_forward(self):
        tape = Tape(small_store())
        a = tape.param('a')
        npt.assert_array_equal(tape.gradient_reverse(a).value, a.value)

    def test_broadcast_gradients_sum_back(self):
        store = ParameterStore()
        store.add('bias', (1, 3), init=ParameterStore.INIT_ZEROS)
        tape = Tape(store)
        total = tape.mean(tape.add(np.ones((4, 3)), tape.param('bias')))
        grads = tape.backward(total)
        npt.assert_allclose(grads['bias'], np.full((1, 3), 4.0 / 12.0), rtol=1e-12)

    def test_unreachable_parameters_get_zero_gradients(self):
        store = small_store()
        tape = Tape(store)
        grads = tape.backward(tape.mean(tape.param('a')))
        self.assertEqual(list(grads), list(store.names()))
        npt.assert_array_equal(grads['b'], np.zeros((4, 2)))
        npt.assert_allclose(grads['a'], np.full((3, 4), 1.0 / 12.0))

    def test_matmul_rank_three_by_rank_two(self):
        tape = Tape()
        a = np.arange(24, dtype=float).reshape(2, 3, 4)
        b = np.ones((4, 5))
        npt.assert_array_equal(tape.matmul(a, b).value, np.matmul(a, b))

    def test_shape_mismatch(self):
        tape = Tape()
        with self.assertRaises(ShapeMismatchError):
            tape.matmul(np.ones((2, 3)), np.ones((2, 3)))
        with self.assertRaises(ShapeMismatchError):
            tape.add(np.ones((2, 3)), np.ones((4, 3)))
        with self.assertRaises(ShapeMismatchError):
            tape.reshape(np.ones((2, 3)), (4, 2))
        with self.assertRaises(ShapeMismatchError):
            tape.lookup(np.ones((2, 3)), [2])
        with self.assertRaises(ShapeMismatchError):
            tape.constant(np.ones((1, 1, 1, 1)))

    def test_non_finite_output_is_refused(self):
        tape = Tape()
        with self.assertRaises(NonFiniteError):
            tape.scale(np.array([1e308]), 10.0)
        self.assertTrue(issubclass(NonFiniteError, RactcNumericError))

    def test_backward_needs_scalar_root(self):
        tape = Tape(small_store())
        with self.assertRaises(NonScalarRootError):
            tape.backward(tape.param('a'))

    def test_no_grad_tape_has_no_backward(self):
        tape = Tape(small_store(), grad_enabled=False)
        loss = catalog_loss(tape)
        self.assertEqual(len(tape), 0)
        with self.assertRaises(RactcUsageError):
            tape.backward(loss)

    def test_no_grad_values_match_recording_tape(self):
        store = small_store()
        recorded = float(catalog_loss(Tape(store)).value)
        frozen = float(catalog_loss(Tape(store, grad_enabled=False)).value)
        self.assertEqual(recorded, frozen)

    def test_nondeterministic_builder_is_detected(self):
        store = small_store()
        rng = np.random.default_rng(0)

        def noisy(tape):
            return tape.mean(tape.add(tape.param('a'), rng.normal(size=(3, 4))))

        with self.assertRaises(NondeterministicBuilderError):
            check_gradients(noisy, store)


class TestParameterStore(unittest.TestCase):

    def test_uniform_bounds_follow_fan_in(self):
        store = ParameterStore()
        entry = store.add('w', (16, 8), np.random.default_rng(1))
        self.assertLessEqual(np.abs(entry.value).max(), 0.25)
        self.assertEqual(store.parameter_count(), 128)

    def test_duplicate_name_is_refused(self):
        store = small_store()
        with self.assertRaises(RactcUsageError):
            store.add('a', (1, 1), np.random.default_rng(0))

    def test_accumulate_averages_with_weight(self):
        store = small_store()
        store.zero_grad()
        store.accumulate({'c': np.ones((1, 2))}, weight=0.5)
        store.accumulate({'c': np.full((1, 2), 3.0)}, weight=0.5)
        npt.assert_array_equal(store.gradients()['c'], np.full((1, 2), 2.0))

    def test_first_adam_step_moves_by_learning_rate(self):
        store = small_store()
        before = store.values()
        grads = dict((name, np.full(value.shape, 0.3)) for name, value in before.items())
        adam_step(store, grads, lr=0.01)
        for name, value in store.values().items():
            npt.assert_allclose(before[name] - value, np.full(value.shape, 0.01), rtol=1e-6)
        self.assertEqual(store.step, 1)

    def test_zero_gradients_leave_parameters_unchanged(self):
        store = small_store()
        before = store.values()
        adam_step(store, dict((name, np.zeros(value.shape)) for name, value in before.items()))
        for name, value in store.values().items():
            npt.assert_array_equal(value, before[name])
        self.assertEqual(store.step, 1)


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_checkpoint_restores_values_and_manifest(self):
        store = small_store()
        store.step = 7
        path = os.path.join(self.tmp, 'model.zip')
        save_checkpoint(path, store, seed=5, config_hash='abc', config={'window': 2})
        loaded, manifest = load_checkpoint(path)
        self.assertEqual(manifest['seed'], 5)
        self.assertEqual(manifest['config_hash'], 'abc')
        self.assertEqual(manifest['config'], {'window': 2})
        self.assertEqual(loaded.step, 7)
        self.assertEqual(checkpoint_fingerprint(loaded), checkpoint_fingerprint(store))
        for name, value in store.values().items():
            npt.assert_array_equal(loaded[name].value, value)

    def test_identical_stores_give_identical_bytes(self):
        first = os.path.join(self.tmp, 'first.zip')
        second = os.path.join(self.tmp, 'second.zip')
        save_checkpoint(first, small_store(), seed=0, config_hash='x')
        save_checkpoint(second, small_store(), seed=0, config_hash='x')
        self.assertEqual(sha256_file(first), sha256_file(second))

    def test_mismatch_error_maps_to_usage_exit(self):
        self.assertEqual(CheckpointMismatchError.exit_code, 1)


if __name__ == '__main__':
    unittest.main()
