"""
Minimal reverse-mode automatic differentiation over dense float64 numpy arrays.

A Tape records every primitive applied to its Tensors as a TapeNode holding the forward
values the backward rule needs. Each primitive kind is registered as a (forward, backward)
pair in OPERATIONS, the way a Wengert list pairs every function with its partials:

    forward(values, attrs) -> (output, saved)
    backward(upstream, values, output, saved, attrs) -> gradient per input

Trainable values live in a ParameterStore together with their gradient accumulators and the
Adam moment estimates. Gradients are returned by name from Tape.backward.
"""
import collections
import json

import attr
import numpy as np

from ractc.ractcbase import (RactcDataError, RactcNumericError, RactcUsageError, canonical_json,
                              read_archive, write_archive)


MAX_RANK = 3


class AutodiffError(RactcNumericError):
    """ Base class for tape errors """
    pass


class ShapeMismatchError(AutodiffError):
    """ Input shapes do not conform to the operation """
    pass


class NonFiniteError(AutodiffError):
    """ An operation produced NaN or infinite values """
    pass


class NonScalarRootError(AutodiffError):
    """ Backward was started from a tensor that is not a scalar """
    pass


class NondeterministicBuilderError(AutodiffError):
    """ Two evaluations of the same loss builder disagreed """
    pass


class CheckpointMismatchError(RactcUsageError):
    """ A checkpoint does not belong to the current configuration """
    pass


@attr.s(frozen=True, eq=False)
class TapeNode(object):
    """ One recorded operation; parents are ids of earlier nodes """
    id = attr.ib()
    kind = attr.ib()
    parents = attr.ib()
    saved = attr.ib(default=None, repr=False)
    attrs = attr.ib(default=None, repr=False)


class Tensor(object):
    """ A dense float64 value bound to the tape that produced it """

    __slots__ = ('value', 'tape', 'node_id', 'name')

    def __init__(self, value, tape=None, node_id=None, name=None):
        self.value = value
        self.tape = tape
        self.node_id = node_id
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return 'Tensor(shape=%s, node=%s, name=%s)' % (self.shape, self.node_id, self.name)


# Broadcasting helpers

def _broadcast_shape(kind, *shapes):
    try:
        return np.broadcast(*[np.empty(shape) for shape in shapes]).shape
    except ValueError:
        raise ShapeMismatchError('ERROR: %s cannot broadcast shapes %s' % (
            kind, ', '.join(str(shape) for shape in shapes)))


def _unbroadcast(grad, shape):
    """ Sum a broadcast gradient back down to the shape of the input that was broadcast """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x):
    shifted = x - np.max(x, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


# Forward and backward rules

def _matmul_forward(values, attrs):
    a, b = values
    if a.ndim not in (2, 3) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeMismatchError('ERROR: matmul cannot multiply shapes %s and %s' % (
            a.shape, b.shape))
    return np.matmul(a, b), None


def _matmul_backward(grad, values, output, saved, attrs):
    a, b = values
    grad_a = np.matmul(grad, b.T)
    grad_b = np.matmul(a.reshape(-1, a.shape[-1]).T, grad.reshape(-1, b.shape[1]))
    return [grad_a, grad_b]


def _elementwise_forward(function):
    def forward(values, attrs):
        a, b = values
        _broadcast_shape(attrs['kind'], a.shape, b.shape)
        return function(a, b), None
    return forward


def _add_backward(grad, values, output, saved, attrs):
    return [_unbroadcast(grad, values[0].shape), _unbroadcast(grad, values[1].shape)]


def _subtract_backward(grad, values, output, saved, attrs):
    return [_unbroadcast(grad, values[0].shape), _unbroadcast(-grad, values[1].shape)]


def _hadamard_backward(grad, values, output, saved, attrs):
    a, b = values
    return [_unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)]


def _scale_forward(values, attrs):
    return values[0] * attrs['factor'], None


def _scale_backward(grad, values, output, saved, attrs):
    return [grad * attrs['factor']]


def _transpose_forward(values, attrs):
    if values[0].ndim < 2:
        raise ShapeMismatchError('ERROR: transpose needs rank 2 or 3, got shape %s' % (
            values[0].shape,))
    return np.swapaxes(values[0], -1, -2).copy(), None


def _transpose_backward(grad, values, output, saved, attrs):
    return [np.swapaxes(grad, -1, -2)]


def _reshape_forward(values, attrs):
    shape = tuple(attrs['shape'])
    if int(np.prod(shape)) != values[0].size:
        raise ShapeMismatchError('ERROR: reshape cannot map shape %s to %s' % (
            values[0].shape, shape))
    return values[0].reshape(shape).copy(), None


def _reshape_backward(grad, values, output, saved, attrs):
    return [grad.reshape(values[0].shape)]


def _concat_forward(values, attrs):
    leading = values[0].shape[:-1]
    for value in values[1:]:
        if value.shape[:-1] != leading:
            raise ShapeMismatchError('ERROR: concat-last-axis needs equal leading shapes, got %s' % (
                ', '.join(str(v.shape) for v in values)))
    return np.concatenate(values, axis=-1), None


def _concat_backward(grad, values, output, saved, attrs):
    bounds = np.cumsum([value.shape[-1] for value in values])[:-1]
    return np.split(grad, bounds, axis=-1)


def _row_sum_forward(values, attrs):
    return np.sum(values[0], axis=-1), None


def _row_sum_backward(grad, values, output, saved, attrs):
    return [np.broadcast_to(np.expand_dims(grad, -1), values[0].shape).copy()]


def _mean_forward(values, attrs):
    return np.asarray(np.mean(values[0])), None


def _mean_backward(grad, values, output, saved, attrs):
    return [np.full(values[0].shape, grad / values[0].size)]


def _sigmoid_forward(values, attrs):
    return _sigmoid(values[0]), None


def _sigmoid_backward(grad, values, output, saved, attrs):
    return [grad * output * (1.0 - output)]


def _tanh_forward(values, attrs):
    return np.tanh(values[0]), None


def _tanh_backward(grad, values, output, saved, attrs):
    return [grad * (1.0 - output * output)]


def _relu_forward(values, attrs):
    return np.maximum(values[0], 0.0), None


def _relu_backward(grad, values, output, saved, attrs):
    return [grad * (values[0] > 0.0)]


def _prelu_forward(values, attrs):
    x, slope = values
    if slope.shape != (1,):
        raise ShapeMismatchError('ERROR: prelu slope must have shape (1,), got %s' % (slope.shape,))
    return np.where(x > 0.0, x, slope[0] * x), None


def _prelu_backward(grad, values, output, saved, attrs):
    x, slope = values
    positive = x > 0.0
    grad_x = np.where(positive, grad, slope[0] * grad)
    grad_slope = np.array([np.sum(np.where(positive, 0.0, x * grad))])
    return [grad_x, grad_slope]


def _softmax_forward(values, attrs):
    return _softmax(values[0]), None


def _softmax_backward(grad, values, output, saved, attrs):
    return [output * (grad - np.sum(grad * output, axis=-1, keepdims=True))]


def _mse_forward(values, attrs):
    a, b = values
    if a.shape != b.shape:
        raise ShapeMismatchError('ERROR: mse needs equal shapes, got %s and %s' % (a.shape, b.shape))
    diff = a - b
    return np.asarray(np.mean(diff * diff)), diff


def _mse_backward(grad, values, output, saved, attrs):
    partial = grad * 2.0 * saved / saved.size
    return [partial, -partial]


def _cross_entropy_forward(values, attrs):
    logits = values[0]
    labels = attrs['labels']
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError('ERROR: softmax-cross-entropy needs rows x classes logits and '
                                 'one label per row, got %s and %s' % (logits.shape, labels.shape))
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ShapeMismatchError('ERROR: softmax-cross-entropy labels must lie in 0..%s' % (
            logits.shape[1] - 1))
    row_max = np.max(logits, axis=1, keepdims=True)
    log_norm = row_max[:, 0] + np.log(np.sum(np.exp(logits - row_max), axis=1))
    rows = np.arange(logits.shape[0])
    return np.asarray(np.mean(log_norm - logits[rows, labels])), _softmax(logits)


def _cross_entropy_backward(grad, values, output, saved, attrs):
    labels = attrs['labels']
    delta = saved.copy()
    delta[np.arange(labels.size), labels] -= 1.0
    return [grad * delta / labels.size]


def _lookup_forward(values, attrs):
    table = values[0]
    indices = attrs['indices']
    if table.ndim != 2 or (indices.size and (indices.min() < 0 or indices.max() >= table.shape[0])):
        raise ShapeMismatchError('ERROR: lookup-rows indices out of range for table shape %s' % (
            table.shape,))
    return table[indices], None


def _lookup_backward(grad, values, output, saved, attrs):
    table_grad = np.zeros_like(values[0])
    np.add.at(table_grad, attrs['indices'], grad)
    return [table_grad]


def _reverse_forward(values, attrs):
    return values[0].copy(), None


def _reverse_backward(grad, values, output, saved, attrs):
    return [attrs['factor'] * grad]


OPERATIONS = {
    'matmul': (_matmul_forward, _matmul_backward),
    'add': (_elementwise_forward(np.add), _add_backward),
    'subtract': (_elementwise_forward(np.subtract), _subtract_backward),
    'hadamard': (_elementwise_forward(np.multiply), _hadamard_backward),
    'scale': (_scale_forward, _scale_backward),
    'transpose': (_transpose_forward, _transpose_backward),
    'reshape': (_reshape_forward, _reshape_backward),
    'concat-last-axis': (_concat_forward, _concat_backward),
    'row-sum': (_row_sum_forward, _row_sum_backward),
    'mean': (_mean_forward, _mean_backward),
    'sigmoid': (_sigmoid_forward, _sigmoid_backward),
    'tanh': (_tanh_forward, _tanh_backward),
    'relu': (_relu_forward, _relu_backward),
    'prelu': (_prelu_forward, _prelu_backward),
    'softmax-vector': (_softmax_forward, _softmax_backward),
    'mse': (_mse_forward, _mse_backward),
    'softmax-cross-entropy': (_cross_entropy_forward, _cross_entropy_backward),
    'lookup-rows': (_lookup_forward, _lookup_backward),
    'gradient-reverse': (_reverse_forward, _reverse_backward),
}

ARITY = {
    'matmul': 2, 'add': 2, 'subtract': 2, 'hadamard': 2, 'prelu': 2, 'mse': 2,
}


class Tape(object):
    """
    Records operations on Tensors for one forward pass. A tape created with
    grad_enabled=False computes values only and cannot run backward. reversal_scale is the
    factor gradient-reverse applies to its upstream gradient; -1.0 reverses, 1.0 turns the
    operation into a plain identity.
    """

    def __init__(self, store=None, grad_enabled=True, reversal_scale=-1.0):
        self.store = store
        self.grad_enabled = grad_enabled
        self.reversal_scale = float(reversal_scale)
        self.nodes = []
        self._params = collections.OrderedDict()
        self.values = []

    def _record(self, kind, parents, value, saved=None, attrs=None, name=None):
        if not self.grad_enabled:
            return Tensor(value, tape=self, name=name)
        node = TapeNode(id=len(self.nodes), kind=kind, parents=tuple(parents),
                        saved=saved, attrs=attrs)
        self.nodes.append(node)
        self.values.append(value)
        return Tensor(value, tape=self, node_id=node.id, name=name)

    def constant(self, value):
        """ Wrap a fixed array as a leaf tensor """
        value = np.array(value, dtype=np.float64)
        if value.ndim > MAX_RANK:
            raise ShapeMismatchError('ERROR: tensors have rank <= %s, got shape %s' % (
                MAX_RANK, value.shape))
        return self._record('constant', [], value)

    def param(self, name):
        """ Return the leaf tensor for a store entry, reusing it within this tape """
        if name in self._params:
            return self._params[name]
        if self.store is None or name not in self.store:
            raise RactcUsageError('ERROR: Unknown parameter "%s"' % name)
        tensor = self._record('parameter', [], self.store[name].value, name=name)
        self._params[name] = tensor
        return tensor

    def _as_tensor(self, value):
        if isinstance(value, Tensor):
            if value.tape is not self:
                raise RactcUsageError('ERROR: Tensor %r belongs to a different tape' % value)
            return value
        return self.constant(value)

    def apply(self, kind, inputs, **attrs):
        """
        Apply a primitive operation, record it and return its output tensor.
        :param kind: one of OPERATIONS
        :param inputs: list of Tensors or arrays (arrays become constants)
        :param attrs: scalar/array attributes of the operation (factor, shape, labels, indices)
        """
        if kind not in OPERATIONS:
            raise RactcUsageError('ERROR: Unknown operation kind "%s"' % kind)
        tensors = [self._as_tensor(value) for value in inputs]
        expected = ARITY.get(kind, 1)
        if kind != 'concat-last-axis' and len(tensors) != expected:
            raise ShapeMismatchError('ERROR: %s takes %s inputs, got %s' % (
                kind, expected, len(tensors)))
        attrs['kind'] = kind
        values = [tensor.value for tensor in tensors]
        forward = OPERATIONS[kind][0]
        output, saved = forward(values, attrs)
        output = np.asarray(output, dtype=np.float64)
        if output.ndim > MAX_RANK:
            raise ShapeMismatchError('ERROR: %s produced rank %s output %s' % (
                kind, output.ndim, output.shape))
        if not np.all(np.isfinite(output)):
            raise NonFiniteError('ERROR: %s produced non-finite values from input shapes %s' % (
                kind, ', '.join(str(value.shape) for value in values)))
        return self._record(kind, [tensor.node_id for tensor in tensors], output,
                            saved=saved, attrs=attrs)

    # Convenience wrappers for the primitive catalog
    def matmul(self, a, b):
        return self.apply('matmul', [a, b])

    def add(self, a, b):
        return self.apply('add', [a, b])

    def subtract(self, a, b):
        return self.apply('subtract', [a, b])

    def hadamard(self, a, b):
        return self.apply('hadamard', [a, b])

    def scale(self, a, factor):
        return self.apply('scale', [a], factor=float(factor))

    def transpose(self, a):
        return self.apply('transpose', [a])

    def reshape(self, a, shape):
        return self.apply('reshape', [a], shape=tuple(shape))

    def concat(self, tensors):
        return self.apply('concat-last-axis', list(tensors))

    def row_sum(self, a):
        return self.apply('row-sum', [a])

    def mean(self, a):
        return self.apply('mean', [a])

    def sigmoid(self, a):
        return self.apply('sigmoid', [a])

    def tanh(self, a):
        return self.apply('tanh', [a])

    def relu(self, a):
        return self.apply('relu', [a])

    def prelu(self, a, slope):
        return self.apply('prelu', [a, slope])

    def softmax(self, a):
        return self.apply('softmax-vector', [a])

    def mse(self, a, b):
        return self.apply('mse', [a, b])

    def cross_entropy(self, logits, labels):
        return self.apply('softmax-cross-entropy', [logits],
                          labels=np.asarray(labels, dtype=np.int64))

    def lookup(self, table, indices):
        return self.apply('lookup-rows', [table], indices=np.asarray(indices, dtype=np.int64))

    def gradient_reverse(self, a):
        return self.apply('gradient-reverse', [a], factor=self.reversal_scale)

    def activation(self, name, a):
        """ Apply a named activation: relu, sigmoid, tanh or identity """
        if name == 'identity':
            return a
        if name not in ('relu', 'sigmoid', 'tanh'):
            raise RactcUsageError('ERROR: Unknown activation "%s"' % name)
        return self.apply(name, [a])

    def backward(self, root):
        """
        Propagate gradients from a scalar root back to every parameter on the tape.
        :return: OrderedDict name -> gradient for every store entry (zeros where unreachable)
        """
        if not self.grad_enabled:
            raise RactcUsageError('ERROR: backward is not available on a no-grad tape')
        if not isinstance(root, Tensor) or root.tape is not self:
            raise RactcUsageError('ERROR: backward root must be a tensor on this tape')
        if root.value.size != 1:
            raise NonScalarRootError('ERROR: backward root must be a scalar, got shape %s' % (
                root.value.shape,))
        grads = [None] * len(self.nodes)
        grads[root.node_id] = np.ones_like(root.value)
        values = self.values
        for node in reversed(self.nodes[:root.node_id + 1]):
            upstream = grads[node.id]
            if upstream is None or not node.parents:
                continue
            parent_values = [values[parent] for parent in node.parents]
            backward = OPERATIONS[node.kind][1]
            partials = backward(upstream, parent_values, values[node.id], node.saved, node.attrs)
            for parent, partial in zip(node.parents, partials):
                if grads[parent] is None:
                    grads[parent] = np.array(partial, dtype=np.float64)
                else:
                    grads[parent] = grads[parent] + partial
        result = collections.OrderedDict()
        names = list(self.store.names()) if self.store is not None else list(self._params)
        for name in names:
            tensor = self._params.get(name)
            if tensor is not None and grads[tensor.node_id] is not None:
                result[name] = grads[tensor.node_id]
            elif self.store is not None:
                result[name] = np.zeros_like(self.store[name].value)
        return result

    def __len__(self):
        return len(self.nodes)


@attr.s(eq=False)
class ParameterEntry(object):
    """ A trainable value with its gradient accumulator and Adam state """
    value = attr.ib(repr=False)
    init = attr.ib()
    grad = attr.ib(default=None, repr=False)
    m = attr.ib(default=None, repr=False)
    v = attr.ib(default=None, repr=False)
    step = attr.ib(default=0)

    def __attrs_post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.m is None:
            self.m = np.zeros_like(self.value)
        if self.v is None:
            self.v = np.zeros_like(self.value)


class ParameterStore(object):
    """ Ordered collection of named trainable tensors """

    INIT_UNIFORM = 'uniform'
    INIT_ZEROS = 'zeros'
    INIT_CONSTANT = 'constant'

    def __init__(self):
        self.entries = collections.OrderedDict()
        self.step = 0

    def __contains__(self, name):
        return name in self.entries

    def __getitem__(self, name):
        return self.entries[name]

    def __len__(self):
        return len(self.entries)

    def names(self):
        return self.entries.keys()

    def add(self, name, shape, rng=None, init=INIT_UNIFORM, fan_in=None, constant=0.0):
        """
        Register a parameter. Uniform entries are drawn from [-1/sqrt(fan_in), 1/sqrt(fan_in)]
        with fan_in defaulting to the first dimension of the shape.
        """
        if name in self.entries:
            raise RactcUsageError('ERROR: Parameter "%s" is already registered' % name)
        shape = tuple(int(dim) for dim in shape)
        if init == self.INIT_UNIFORM:
            if rng is None:
                raise RactcUsageError('ERROR: Uniform initialization of "%s" needs a generator' % name)
            fan_in = fan_in or shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            value = rng.uniform(-bound, bound, size=shape)
            spec = (self.INIT_UNIFORM, bound)
        elif init == self.INIT_ZEROS:
            value = np.zeros(shape)
            spec = (self.INIT_ZEROS,)
        elif init == self.INIT_CONSTANT:
            value = np.full(shape, float(constant))
            spec = (self.INIT_CONSTANT, float(constant))
        else:
            raise RactcUsageError('ERROR: Unknown initializer "%s"' % init)
        self.entries[name] = ParameterEntry(value=np.asarray(value, dtype=np.float64), init=spec)
        return self.entries[name]

    def set_value(self, name, value):
        """ Replace a parameter value in place, keeping its shape """
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.entries[name].value.shape:
            raise ShapeMismatchError('ERROR: Parameter "%s" has shape %s, got %s' % (
                name, self.entries[name].value.shape, value.shape))
        self.entries[name].value[...] = value

    def zero_grad(self):
        for entry in self.entries.values():
            entry.grad[...] = 0.0

    def accumulate(self, grads, weight=1.0):
        """ Add weighted gradients into the accumulators """
        for name, grad in grads.items():
            entry = self.entries[name]
            if grad.shape != entry.value.shape:
                raise ShapeMismatchError('ERROR: Gradient for "%s" has shape %s, expected %s' % (
                    name, grad.shape, entry.value.shape))
            entry.grad += weight * grad

    def gradients(self):
        return collections.OrderedDict(
            (name, entry.grad.copy()) for name, entry in self.entries.items())

    def values(self):
        return collections.OrderedDict(
            (name, entry.value.copy()) for name, entry in self.entries.items())

    def load_values(self, values):
        for name, value in values.items():
            self.set_value(name, value)

    def parameter_count(self):
        return int(sum(entry.value.size for entry in self.entries.values()))


def adam_step(store, grads, lr=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
    """
    Apply one Adam update with bias correction in place.
    :param store: ParameterStore
    :param grads: name -> gradient array (shape must match the parameter)
    """
    for name, grad in grads.items():
        entry = store[name]
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != entry.value.shape:
            raise ShapeMismatchError('ERROR: Gradient for "%s" has shape %s, expected %s' % (
                name, grad.shape, entry.value.shape))
        entry.step += 1
        entry.m = beta1 * entry.m + (1.0 - beta1) * grad
        entry.v = beta2 * entry.v + (1.0 - beta2) * grad * grad
        m_hat = entry.m / (1.0 - beta1 ** entry.step)
        v_hat = entry.v / (1.0 - beta2 ** entry.step)
        entry.value -= lr * m_hat / (np.sqrt(v_hat) + epsilon)
    store.step += 1


@attr.s(frozen=True)
class GradientCheckReport(object):
    """ Max relative error per parameter between tape and finite-difference gradients """
    errors = attr.ib()
    checked = attr.ib()

    @property
    def worst(self):
        return max(self.errors.values()) if self.errors else 0.0

    def passed(self, tolerance):
        return self.worst <= tolerance


def check_gradients(loss_builder, store, eps=1e-6, max_elements=64, seed=0, floor=1e-8,
                    names=None, reversal_scale=1.0):
    """
    Compare tape gradients against central finite differences.
    :param loss_builder: callable(tape) -> scalar Tensor, deterministic in the store values
    :param eps: finite-difference step
    :param max_elements: parameters larger than this are checked on a seeded sample
    :param floor: lower bound of the relative-error denominator max(|a|, |b|, floor)
    :param names: optional subset of parameter names to check
    :param reversal_scale: gradient-reverse factor of the analytic pass. Finite differences
        see the forward identity only, so the default 1.0 checks the backward rules of a loss
        with reversal layers; -1.0 compares the reversed gradient as trained
    :return: GradientCheckReport
    """
    def evaluate():
        return float(loss_builder(Tape(store, grad_enabled=False)).value)

    tape = Tape(store, reversal_scale=reversal_scale)
    grads = tape.backward(loss_builder(tape))
    if evaluate() != evaluate():
        raise NondeterministicBuilderError(
            'ERROR: Loss builder returned different values for identical parameters')
    rng = np.random.default_rng(seed)
    errors = collections.OrderedDict()
    checked = collections.OrderedDict()
    for name in (names or list(store.names())):
        value = store[name].value
        flat = value.reshape(-1)
        if flat.size > max_elements:
            indices = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
        else:
            indices = np.arange(flat.size)
        analytic = grads[name].reshape(-1)
        worst = 0.0
        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            loss_plus = evaluate()
            flat[index] = original - eps
            loss_minus = evaluate()
            flat[index] = original
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            denominator = max(abs(analytic[index]), abs(numeric), floor)
            worst = max(worst, abs(analytic[index] - numeric) / denominator)
        errors[name] = worst
        checked[name] = int(indices.size)
    return GradientCheckReport(errors=errors, checked=checked)


# Checkpoints

MANIFEST_MEMBER = 'manifest.json'


def save_checkpoint(path, store, seed, config_hash, config=None, extra=None):
    """
    Write parameters as raw little-endian float64 members plus a JSON manifest holding
    names, shapes, seed, step counter and config hash.
    """
    manifest = collections.OrderedDict([
        ('format', 'ractc-checkpoint-1'),
        ('seed', seed),
        ('step', store.step),
        ('config_hash', config_hash),
        ('config', config),
        ('parameters', [[name, list(entry.value.shape)] for name, entry in store.entries.items()]),
    ])
    if extra:
        manifest['extra'] = extra
    members = [(name + '.f8', entry.value.astype('<f8').tobytes())
               for name, entry in store.entries.items()]
    members.append((MANIFEST_MEMBER, json.dumps(manifest, indent=2, sort_keys=True).encode('utf-8')))
    write_archive(path, members)


def load_checkpoint(path):
    """
    Read a checkpoint into a new ParameterStore.
    :return: (store, manifest)
    """
    members = dict(read_archive(path))
    if MANIFEST_MEMBER not in members:
        raise RactcDataError('ERROR: Checkpoint "%s" has no manifest' % path)
    manifest = json.loads(members[MANIFEST_MEMBER].decode('utf-8'))
    store = ParameterStore()
    for name, shape in manifest['parameters']:
        payload = members.get(name + '.f8')
        if payload is None:
            raise RactcDataError('ERROR: Checkpoint "%s" is missing parameter "%s"' % (path, name))
        value = np.frombuffer(payload, dtype='<f8').astype(np.float64).reshape(shape)
        store.entries[name] = ParameterEntry(value=value.copy(), init=('checkpoint',))
    store.step = manifest['step']
    return store, manifest


def checkpoint_fingerprint(store):
    """ Canonical text of parameter names and shapes, used to compare store layouts """
    return canonical_json([[name, list(entry.value.shape)] for name, entry in store.entries.items()])
