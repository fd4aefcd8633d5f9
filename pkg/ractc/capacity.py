"""
Bilateral branch network: origin (radiation) and destination (attraction) embeddings learned
by graph convolution over each frame's relation matrices, then a recurrent cell over the
snapshot window.
"""
import attr
import numpy as np

from ractc.autodiff import ParameterStore
from ractc.ractcbase import RactcDataError


GATES = ('input', 'forget', 'output', 'candidate')


class WindowError(RactcDataError):
    """ The snapshot window is empty or shorter than configured """
    pass


@attr.s(frozen=True)
class EmbedTables(object):
    """ Names of the N x S origin and destination lookup tables """
    origin = attr.ib(default='origin.embed')
    destination = attr.ib(default='destination.embed')

    def register(self, store, region_count, size, rng, tied=False):
        store.add(self.origin, (region_count, size), rng, fan_in=size)
        if not tied:
            store.add(self.destination, (region_count, size), rng, fan_in=size)


@attr.s(frozen=True)
class RecurrentParams(object):
    """ Gate weights of one branch's recurrent cell, hidden size S """
    prefix = attr.ib()

    def input_weight(self, gate):
        return '%s.w_x.%s' % (self.prefix, gate)

    def hidden_weight(self, gate):
        return '%s.w_h.%s' % (self.prefix, gate)

    def bias(self, gate):
        return '%s.b.%s' % (self.prefix, gate)

    def names(self):
        return [name for gate in GATES
                for name in (self.input_weight(gate), self.hidden_weight(gate), self.bias(gate))]

    def register(self, store, size, rng):
        for gate in GATES:
            store.add(self.input_weight(gate), (size, size), rng)
            store.add(self.hidden_weight(gate), (size, size), rng)
            store.add(self.bias(gate), (1, size), init=ParameterStore.INIT_ZEROS)


def branch_gcn(tape, x, adj, w, activation='relu'):
    """ activation(adj x w) """
    return tape.activation(activation, tape.matmul(tape.matmul(adj, x), w))


def _gate(tape, params, gate, x, h):
    return tape.add(tape.add(tape.matmul(x, tape.param(params.input_weight(gate))),
                             tape.matmul(h, tape.param(params.hidden_weight(gate)))),
                    tape.param(params.bias(gate)))


def recur_states(tape, sequence, params):
    """
    Run the recurrent cell over a chronological window, sharing the cell across region rows.
    Initial hidden and cell states are zero.
    :return: list of hidden states, one per step
    """
    if not sequence:
        raise WindowError('ERROR: The recurrent window is empty')
    zeros = np.zeros(sequence[0].shape)
    h = tape.constant(zeros)
    c = tape.constant(zeros)
    states = []
    for x in sequence:
        i = tape.sigmoid(_gate(tape, params, 'input', x, h))
        f = tape.sigmoid(_gate(tape, params, 'forget', x, h))
        o = tape.sigmoid(_gate(tape, params, 'output', x, h))
        g = tape.tanh(_gate(tape, params, 'candidate', x, h))
        c = tape.add(tape.hadamard(f, c), tape.hadamard(i, g))
        h = tape.hadamard(o, tape.tanh(c))
        states.append(h)
    return states


def recur(tape, sequence, params):
    """ Final hidden state per region after consuming the window """
    return recur_states(tape, sequence, params)[-1]


def run_branch(tape, adjacencies, table, w, params, layers, activation='relu'):
    """ Stack `layers` convolutions per frame from the lookup table, then recur over frames """
    outputs = []
    for adj in adjacencies:
        x = tape.param(table)
        for _ in range(layers):
            x = branch_gcn(tape, x, adj, w, activation)
        outputs.append(x)
    return recur(tape, outputs, params)


def run_bilateral(tape, pairs, tables, w_o, w_d, recurrent_o, recurrent_d, layers,
                  window=None, activation='relu'):
    """
    :param pairs: chronological list of RelationPair for the window
    :param tables: EmbedTables
    :param w_o: generated origin transform (S x S tensor)
    :param w_d: generated destination transform (S x S tensor)
    :param recurrent_o: RecurrentParams of the origin branch
    :param recurrent_d: RecurrentParams of the destination branch
    :return: (O, D), both N x S
    """
    if not pairs or (window is not None and len(pairs) < window):
        raise WindowError('ERROR: Window holds %s frames, need %s' % (len(pairs), window or 1))
    if layers < 1:
        raise WindowError('ERROR: At least one graph convolution layer is required, got %s' % layers)
    origin = run_branch(tape, [pair.oo for pair in pairs], tables.origin, w_o, recurrent_o,
                        layers, activation)
    destination = run_branch(tape, [pair.dd for pair in pairs], tables.destination, w_d,
                             recurrent_d, layers, activation)
    return origin, destination
