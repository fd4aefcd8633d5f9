"""
Fusion of the population-enhanced and plain origin embeddings, the OD prediction head, the
losses, evaluation metrics and the chronological split.
"""
import hashlib

import attr
import numpy as np

from ractc.autodiff import ParameterStore
from ractc.ractcbase import RactcDataError, RactcUsageError


SPLIT_RATIOS = (0.8, 0.1, 0.1)


@attr.s(frozen=True)
class FusionParams(object):
    """ Per-region, per-dimension fusion gate theta = sigmoid(g W_theta^T + b_theta) """
    w_theta = attr.ib(default='fusion.w_theta')
    b_theta = attr.ib(default='fusion.b_theta')

    def register(self, store, size, rng):
        store.add(self.w_theta, (size, size), rng)
        store.add(self.b_theta, (1, size), init=ParameterStore.INIT_ZEROS)


@attr.s(frozen=True)
class HeadParams(object):
    """ Pair head 2S -> S -> 1 with rectifier, linear origin and destination heads S -> 1 """
    pair_hidden = attr.ib(default='head.pair.w1')
    pair_hidden_bias = attr.ib(default='head.pair.b1')
    pair_output = attr.ib(default='head.pair.w2')
    pair_output_bias = attr.ib(default='head.pair.b2')
    origin = attr.ib(default='head.origin.w')
    origin_bias = attr.ib(default='head.origin.b')
    destination = attr.ib(default='head.destination.w')
    destination_bias = attr.ib(default='head.destination.b')

    def register(self, store, size, rng):
        store.add(self.pair_hidden, (2 * size, size), rng, fan_in=2 * size)
        store.add(self.pair_hidden_bias, (1, size), init=ParameterStore.INIT_ZEROS)
        store.add(self.pair_output, (size, 1), rng)
        store.add(self.pair_output_bias, (1, 1), init=ParameterStore.INIT_ZEROS)
        store.add(self.origin, (size, 1), rng)
        store.add(self.origin_bias, (1, 1), init=ParameterStore.INIT_ZEROS)
        store.add(self.destination, (size, 1), rng)
        store.add(self.destination_bias, (1, 1), init=ParameterStore.INIT_ZEROS)


@attr.s(frozen=True)
class MetricsReport(object):
    """ RMSE, MAE, SMAPE and PCC over every entry of every evaluated frame """
    rmse = attr.ib()
    mae = attr.ib()
    smape = attr.ib()
    pcc = attr.ib()
    frames = attr.ib()
    per_frame = attr.ib(factory=list, repr=False)

    def as_tuple(self):
        return (self.rmse, self.mae, self.smape, self.pcc)

    def to_dict(self, **header):
        document = dict(header)
        document.update({'rmse': self.rmse, 'mae': self.mae, 'smape': self.smape,
                         'pcc': self.pcc, 'frames': self.frames})
        return document


def fuse_origin(tape, o_pop, o_prime, g_out, w_theta, b_theta):
    """ O'' = theta * O'_p + (1 - theta) * O' """
    theta = tape.sigmoid(tape.add(tape.matmul(g_out, tape.transpose(w_theta)), b_theta))
    return tape.add(o_prime, tape.hadamard(theta, tape.subtract(o_pop, o_prime)))


def predict(tape, o2, d_prime, heads):
    """
    Y_ij = pair([o''_i ; d'_j]) + origin(o''_i) + destination(d'_j).
    The first pair layer is split into its origin and destination halves so every (i, j)
    hidden vector is formed by broadcasting instead of materializing N^2 concatenations.
    """
    count, size = o2.shape
    w1 = tape.param(heads.pair_hidden)
    w1_origin = tape.lookup(w1, np.arange(size))
    w1_destination = tape.lookup(w1, np.arange(size, 2 * size))
    origin_part = tape.reshape(tape.matmul(o2, w1_origin), (count, 1, size))
    destination_part = tape.reshape(tape.matmul(d_prime, w1_destination), (1, count, size))
    hidden = tape.relu(tape.add(tape.add(origin_part, destination_part),
                                tape.param(heads.pair_hidden_bias)))
    pair = tape.add(tape.reshape(tape.matmul(hidden, tape.param(heads.pair_output)),
                                 (count, count)),
                    tape.param(heads.pair_output_bias))
    origin = tape.add(tape.matmul(o2, tape.param(heads.origin)), tape.param(heads.origin_bias))
    destination = tape.reshape(
        tape.add(tape.matmul(d_prime, tape.param(heads.destination)),
                 tape.param(heads.destination_bias)), (1, count))
    return tape.add(tape.add(pair, origin), destination)


def od_loss(tape, yhat, y):
    """ Mean squared error over the N x N entries """
    return tape.mse(yhat, np.asarray(y, dtype=np.float64))


def total_loss(tape, l_od, l_aux, gamma, aux_sign='minus'):
    """ l_od - gamma * l_aux (aux_sign 'minus') or l_od + gamma * l_aux ('plus') """
    if l_aux is None:
        return l_od
    if aux_sign not in ('minus', 'plus'):
        raise RactcUsageError('ERROR: aux_sign must be minus or plus, got "%s"' % aux_sign)
    weighted = tape.scale(l_aux, gamma)
    if aux_sign == 'minus':
        return tape.subtract(l_od, weighted)
    return tape.add(l_od, weighted)


def _smape_terms(yhat, y):
    numerator = np.abs(yhat - y)
    denominator = (np.abs(yhat) + np.abs(y)) / 2.0
    terms = np.zeros_like(numerator)
    nonzero = denominator > 0
    terms[nonzero] = numerator[nonzero] / denominator[nonzero]
    return terms


def _pearson(yhat, y):
    dx = yhat - yhat.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.mean(dx * dx))
    sy = np.sqrt(np.mean(dy * dy))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.clip(np.mean(dx * dy) / (sx * sy), -1.0, 1.0))


def evaluate(yhat_frames, y_frames):
    """
    :param yhat_frames: sequence of predicted N x N frames
    :param y_frames: sequence of observed N x N frames
    :return: MetricsReport over all entries, with a per-frame breakdown
    """
    yhat = np.asarray(yhat_frames, dtype=np.float64)
    y = np.asarray(y_frames, dtype=np.float64)
    if y.size == 0 or y.shape[0] == 0:
        raise RactcDataError('ERROR: Cannot evaluate an empty frame set')
    if yhat.shape != y.shape:
        raise RactcDataError('ERROR: Prediction shape %s does not match observed shape %s' % (
            yhat.shape, y.shape))
    error = yhat - y
    per_frame = []
    for index in range(y.shape[0]):
        frame_error = error[index]
        per_frame.append({
            'rmse': float(np.sqrt(np.mean(frame_error * frame_error))),
            'mae': float(np.mean(np.abs(frame_error))),
            'smape': float(np.mean(_smape_terms(yhat[index], y[index]))),
            'pcc': _pearson(yhat[index].ravel(), y[index].ravel()),
        })
    return MetricsReport(
        rmse=float(np.sqrt(np.mean(error * error))),
        mae=float(np.mean(np.abs(error))),
        smape=float(np.mean(_smape_terms(yhat, y))),
        pcc=_pearson(yhat.ravel(), y.ravel()),
        frames=int(y.shape[0]),
        per_frame=per_frame)


@attr.s(frozen=True)
class Split(object):
    """ Chronological frame ranges [start, stop) of the train, validation and test parts """
    train = attr.ib()
    validation = attr.ib()
    test = attr.ib()

    def to_dict(self):
        return {'train': list(self.train), 'validation': list(self.validation),
                'test': list(self.test)}


def chronological_split(frame_count):
    """ floor(0.8 T) train frames, floor(0.1 T) validation frames, the remainder for test """
    train = int(np.floor(SPLIT_RATIOS[0] * frame_count))
    validation = int(np.floor(SPLIT_RATIOS[1] * frame_count))
    return Split(train=(0, train), validation=(train, train + validation),
                 test=(train + validation, frame_count))


def target_indices(part, window):
    """ Target frames k in a split part whose window k-window..k-1 is fully observed """
    start, stop = part
    return list(range(max(start, window), stop))


def ablation_history_hash(rows):
    """ SHA-256 over the repr of every history row, used to compare loss trajectories """
    digest = hashlib.sha256()
    for row in rows:
        digest.update(repr(tuple(row)).encode('utf-8'))
    return digest.hexdigest()
