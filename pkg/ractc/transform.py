"""
Attribute-determined, time-sensitive transformation matrices.

Attribute embeddings are refined by hypergraph convolution, attended with the embedding of
the target hour, and the attended vector generates one S x S transformation matrix per
branch, gated against a freely learned base matrix.
"""
import csv

import attr
import numpy as np

import constants
from ractc.autodiff import ParameterStore
from ractc.preprocess import hypergraph_propagation


HOURS_PER_DAY = 24


@attr.s(frozen=True)
class AttributeEmbeddings(object):
    """ Names of the M x S attribute table and the per-layer S x S hypergraph weights """
    table = attr.ib(default='attr.embed')
    layer_prefix = attr.ib(default='attr.w_h')
    layers = attr.ib(default=2)

    def layer(self, index):
        return '%s.%s' % (self.layer_prefix, index)

    def register(self, store, attribute_count, size, rng):
        store.add(self.table, (attribute_count, size), rng, fan_in=size)
        for index in range(self.layers):
            store.add(self.layer(index), (size, size), rng)


@attr.s(frozen=True)
class TimeContext(object):
    """ Attended attribute vector t_a (1 x S) and attention weights alpha (M) """
    t_a = attr.ib()
    alpha = attr.ib()


@attr.s(frozen=True)
class GeneratorParams(object):
    """ Parameter names of one branch's transformation generator """
    prefix = attr.ib()

    @property
    def f1(self):
        return self.prefix + '.f1'

    @property
    def f1_bias(self):
        return self.prefix + '.f1_bias'

    @property
    def f2(self):
        return self.prefix + '.f2'

    @property
    def w_t(self):
        return self.prefix + '.w_t'

    @property
    def b_t(self):
        return self.prefix + '.b_t'

    @property
    def base(self):
        return self.prefix + '.base'

    def names(self):
        return [self.f1, self.f1_bias, self.f2, self.w_t, self.b_t, self.base]

    def register(self, store, size, rng):
        store.add(self.f1, (size, size * size), rng, fan_in=size)
        store.add(self.f1_bias, (1, size * size), init=ParameterStore.INIT_ZEROS)
        store.add(self.f2, (size, size), rng)
        store.add(self.w_t, (size, size * size), rng, fan_in=size)
        store.add(self.b_t, (1, size * size), init=ParameterStore.INIT_ZEROS)
        store.add(self.base, (size, size), rng)


def hyperconv(tape, a_l, incidence, w_h, operator=None):
    """
    One hypergraph convolution D_h^-1 H B_h^-1 H^T a_l W_h.
    :param operator: precomputed propagation matrix; derived from incidence when omitted
    """
    if operator is None:
        operator = hypergraph_propagation(incidence)
    return tape.matmul(tape.matmul(operator, a_l), w_h)


def attribute_embeddings(tape, params, operator):
    """ Run the stacked convolutions from the attribute table; returns the final M x S tensor """
    a = tape.param(params.table)
    for index in range(params.layers):
        a = tape.matmul(tape.matmul(operator, a), tape.param(params.layer(index)))
    return a


def time_attend(tape, a, hour, table):
    """
    Dot-product attention of the hour embedding over the attribute embeddings.
    :param a: M x S attribute embeddings
    :param hour: bucket 0..23
    :param table: 24 x S time-embedding tensor
    :return: TimeContext with t_a of shape 1 x S and alpha of shape M
    """
    e_t = tape.lookup(table, [hour])
    scores = tape.reshape(tape.matmul(a, tape.transpose(e_t)), (a.shape[0],))
    alpha = tape.softmax(scores)
    t_a = tape.matmul(tape.reshape(alpha, (1, a.shape[0])), a)
    return TimeContext(t_a=t_a, alpha=alpha)


def generate_transform(tape, t_a, gen):
    """
    W' = reshape(t_a F1 + b1, S x S) F2;  beta = sigmoid(reshape(t_a W_t + b_t, S x S))^T;
    W'' = beta * W_base + (1 - beta) * W'.
    """
    size = t_a.shape[-1]
    generated = tape.add(tape.matmul(t_a, tape.param(gen.f1)), tape.param(gen.f1_bias))
    w_prime = tape.matmul(tape.reshape(generated, (size, size)), tape.param(gen.f2))
    gate_logits = tape.add(tape.matmul(t_a, tape.param(gen.w_t)), tape.param(gen.b_t))
    beta = tape.transpose(tape.sigmoid(tape.reshape(gate_logits, (size, size))))
    base = tape.param(gen.base)
    return tape.add(w_prime, tape.hadamard(beta, tape.subtract(base, w_prime)))


def write_attention_csv(path, rows, attribute_names):
    """
    Write `hour,attribute_id,attribute_name,weight` rows.
    :param rows: iterable of (hour, alpha array)
    """
    with open(path, 'w', newline='') as output_file:
        writer = csv.writer(output_file, lineterminator='\n')
        writer.writerow(constants.HEADER_ATTENTION_DUMP)
        for hour, alpha in rows:
            for attribute_id, weight in enumerate(np.asarray(alpha)):
                writer.writerow([hour, attribute_id, attribute_names[attribute_id], repr(float(weight))])
