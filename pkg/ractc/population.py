"""
Population enhancement: logistic-quantile population levels, the population similarity
graph, convolution of population-based region embeddings over that graph, and the gated
enhancement of the origin embeddings.
"""
import math

import attr
import numpy as np

from ractc.autodiff import ParameterStore
from ractc.preprocess import inverse_sqrt_degree
from ractc.ractcbase import RactcDataError, RactcWarning, warn


PRELU_INITIAL_SLOPE = 0.25


class DegeneratePopulationError(RactcDataError):
    """ Populations cannot be discretized (fewer than two regions or all equal) """
    pass


class PopulationRangeWarning(RactcWarning):
    """ A population outside [MIN, MAX] was clamped into the fitted range """
    pass


@attr.s(frozen=True)
class LogisticFit(object):
    """ Logistic location/spread from the sample mean and standard deviation """
    mu = attr.ib()
    sigma = attr.ib()
    min_pop = attr.ib()
    max_pop = attr.ib()


@attr.s(frozen=True, eq=False)
class PopulationLevels(object):
    """ Level per region and the binary same-level similarity matrix L """
    k1 = attr.ib()
    levels = attr.ib(repr=False)
    similarity = attr.ib(repr=False)


@attr.s(frozen=True)
class PopParams(object):
    """ Names of the population embedding table, convolution, gate and PReLU slope """
    table = attr.ib(default='pop.embed')
    layer_prefix = attr.ib(default='pop.w_g')
    gate_weight = attr.ib(default='pop.w_g_prime')
    gate_bias = attr.ib(default='pop.b_g_prime')
    slope = attr.ib(default='pop.prelu_slope')
    layers = attr.ib(default=1)

    def layer(self, index):
        return '%s.%s' % (self.layer_prefix, index)

    def register(self, store, region_count, size, rng):
        store.add(self.table, (region_count, size), rng, fan_in=size)
        for index in range(self.layers):
            store.add(self.layer(index), (size, size), rng)
        store.add(self.gate_weight, (size, size), rng)
        store.add(self.gate_bias, (1, size), init=ParameterStore.INIT_ZEROS)
        store.add(self.slope, (1,), init=ParameterStore.INIT_CONSTANT,
                  constant=PRELU_INITIAL_SLOPE)


def fit_logistic(populations):
    """ mu = mean, sigma = standard deviation with divisor N """
    populations = np.asarray(populations, dtype=np.float64)
    if populations.size < 2:
        raise DegeneratePopulationError(
            'ERROR: Population levels need at least 2 regions, got %s' % populations.size)
    sigma = float(np.std(populations))
    if sigma == 0.0:
        raise DegeneratePopulationError(
            'ERROR: All %s regions have population %s; population levels are undefined. '
            'Disable the population module with the no_pop ablation.' % (
                populations.size, populations[0]))
    return LogisticFit(mu=float(np.mean(populations)), sigma=sigma,
                       min_pop=float(populations.min()), max_pop=float(populations.max()))


def logistic_cdf(p, fit):
    """ 1 / (1 + exp(-pi (p - mu) / (sqrt(3) sigma))) """
    z = -math.pi * (np.asarray(p, dtype=np.float64) - fit.mu) / (math.sqrt(3.0) * fit.sigma)
    return 1.0 / (1.0 + np.exp(z))


def population_level(p, fit, k1):
    """
    floor(k1 (F(p) - F(MIN)) / (F(MAX) - F(MIN))) clamped to k1 - 1. Values outside
    [MIN, MAX] are clamped into the range with a PopulationRangeWarning.
    """
    values = np.asarray(p, dtype=np.float64)
    outside = (values < fit.min_pop) | (values > fit.max_pop)
    if np.any(outside):
        warn('%s populations outside [%s, %s] were clamped' % (
            int(np.sum(outside)), fit.min_pop, fit.max_pop), PopulationRangeWarning)
    values = np.clip(values, fit.min_pop, fit.max_pop)
    low = logistic_cdf(fit.min_pop, fit)
    high = logistic_cdf(fit.max_pop, fit)
    quantile = (logistic_cdf(values, fit) - low) / (high - low)
    levels = np.clip(np.floor(k1 * quantile).astype(np.int64), 0, k1 - 1)
    return int(levels) if levels.ndim == 0 else levels


def similarity_matrix(levels):
    """ L_ij = 1 iff regions i and j share a level """
    levels = np.asarray(levels)
    return (levels[:, None] == levels[None, :]).astype(np.float64)


def population_levels(populations, k1):
    """ Fit, discretize and build the similarity matrix in one step """
    fit = fit_logistic(populations)
    levels = population_level(populations, fit, k1)
    return fit, PopulationLevels(k1=k1, levels=levels, similarity=similarity_matrix(levels))


def normalized_similarity(similarity):
    """ D_g^-1/2 L D_g^-1/2 """
    scale = inverse_sqrt_degree(similarity)
    return np.outer(scale, scale) * np.asarray(similarity, dtype=np.float64)


def pop_gcn(tape, g, similarity, w_g, activation='sigmoid', normalized=None):
    """ activation(D_g^-1/2 L D_g^-1/2 g w_g) """
    if normalized is None:
        normalized = normalized_similarity(similarity)
    return tape.activation(activation, tape.matmul(tape.matmul(normalized, g), w_g))


def enhance_origin(tape, g_out, o_prime, gate_weight, gate_bias, slope):
    """ PReLU(g_out W'_g + b'_g) * O' row-wise """
    gate = tape.prelu(tape.add(tape.matmul(g_out, gate_weight), gate_bias), slope)
    return tape.hadamard(gate, o_prime)
