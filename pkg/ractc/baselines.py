"""
Historical-average and physical mobility baselines.

  HA   element-wise mean of the training frames at the target hour
  GM   power-law gravity model T = k m_i^a m_j^b d_ij^-c, fitted by least squares in log space
  IOM  intervening-opportunity model in the Schneider exponential form
  RM   parameter-free radiation model

Outflows for IOM and RM at a target hour are the row sums of HA at that hour, and the
gravity prediction is rescaled to the HA total at that hour.
"""
import attr
import numpy as np
import pytz

from ractc.head import evaluate
from ractc.ractcbase import RactcDataError


IOM_FORM = 'schneider-exponential'
IOM_GRID_POINTS = 32
IOM_GRID_RANGE = (1e-8, 1e-2)


class NoMatchingFramesError(RactcDataError):
    """ No training frame starts at the requested hour """
    pass


class RankDeficiencyError(RactcDataError):
    """ The gravity design matrix does not determine all four coefficients """
    pass


@attr.s(frozen=True)
class GravityFit(object):
    """ T = exp(log_k) m_i^a m_j^b d_ij^-c; zero_flows counts the pairs ignored by the fit """
    log_k = attr.ib()
    a = attr.ib()
    b = attr.ib()
    c = attr.ib()
    observations = attr.ib(default=0)
    zero_flows = attr.ib(default=0)

    def to_dict(self):
        return attr.asdict(self)


@attr.s(frozen=True, eq=False)
class IOMFit(object):
    """ Decay gamma, intervening populations s and destination populations """
    gamma = attr.ib()
    s = attr.ib(repr=False)
    populations = attr.ib(repr=False)
    training_smape = attr.ib(default=None)
    form = attr.ib(default=IOM_FORM)

    def to_dict(self):
        return {'gamma': self.gamma, 'training_smape': self.training_smape, 'form': self.form}


def historical_average(series, hour, indices=None, tz=pytz.utc, hours=None):
    """
    :param series: ODSeries holding the training frames
    :param hour: hour of day 0..23
    :param indices: frame indices allowed in the average (all frames when omitted)
    :param hours: precomputed frame-start hours (derived with tz when omitted)
    :return: N x N mean of the frames whose start falls in the given hour
    """
    hours = series.hours(tz) if hours is None else hours
    indices = np.arange(series.frame_count) if indices is None else np.asarray(indices)
    matching = [k for k in indices if hours[k] == hour]
    if not matching:
        raise NoMatchingFramesError('ERROR: No training frame starts at hour %s' % hour)
    return np.mean(series.frames[matching].astype(np.float64), axis=0)


def _off_diagonal(count):
    return ~np.eye(count, dtype=bool)


def gravity_design(flows, populations, distances):
    """
    Rows [1, ln m_i, ln m_j, -ln d_ij] and targets ln T_ij over off-diagonal pairs with
    strictly positive flow, distance and populations.
    :return: (design, targets, zero flow count)
    """
    flows = np.asarray(flows, dtype=np.float64)
    m = np.asarray(populations, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    off = _off_diagonal(flows.shape[0])
    usable = off & (d > 0) & (m[:, None] > 0) & (m[None, :] > 0)
    mask = usable & (flows > 0)
    origins, destinations = np.nonzero(mask)
    design = np.column_stack([
        np.ones(origins.size), np.log(m[origins]), np.log(m[destinations]),
        -np.log(d[origins, destinations])])
    return design, np.log(flows[origins, destinations]), int(np.sum(usable & (flows <= 0)))


def gravity_fit(flows, populations, distances):
    """ Ordinary least squares of the log-linear gravity law over positive flows """
    design, targets, zero_flows = gravity_design(flows, populations, distances)
    if design.shape[0] < 4:
        raise RactcDataError('ERROR: The gravity fit needs at least 4 positive flows, got %s' % (
            design.shape[0]))
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        constant = [name for name, column in zip(['ln m_i', 'ln m_j', 'ln d_ij'], design[:, 1:].T)
                    if np.ptp(column) == 0]
        raise RankDeficiencyError(
            'ERROR: Gravity design matrix has rank %s of 4 over %s observations; constant '
            'columns: %s' % (rank, design.shape[0], ', '.join(constant) or 'none (collinear)'))
    coefficients = np.linalg.lstsq(design, targets, rcond=None)[0]
    return GravityFit(log_k=float(coefficients[0]), a=float(coefficients[1]),
                      b=float(coefficients[2]), c=float(coefficients[3]),
                      observations=int(design.shape[0]), zero_flows=zero_flows)


def gravity_predict(fit, populations, distances, total=None):
    """
    Evaluate the fitted law; diagonal, zero-distance and zero-population pairs are 0.
    :param total: rescale the prediction so that its entries sum to this value
    """
    m = np.asarray(populations, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    valid = _off_diagonal(m.size) & (d > 0) & (m[:, None] > 0) & (m[None, :] > 0)
    values = np.zeros_like(d)
    origins, destinations = np.nonzero(valid)
    values[origins, destinations] = np.exp(
        fit.log_k + fit.a * np.log(m[origins]) + fit.b * np.log(m[destinations]) -
        fit.c * np.log(d[origins, destinations]))
    values = np.maximum(values, 0.0)
    if total is not None:
        current = values.sum()
        values = values * (total / current) if current > 0 else values
    return values


def intervening_population(populations, distances, inclusive=False):
    """
    s_ij = total population of regions k != i, j with d_ik < d_ij (d_ik <= d_ij when inclusive).
    """
    m = np.asarray(populations, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    count = m.size
    if inclusive:
        closer = d[:, None, :] <= d[:, :, None]
    else:
        closer = d[:, None, :] < d[:, :, None]
    index = np.arange(count)
    closer[index, :, index] = False
    closer[:, index, index] = False
    return np.einsum('ijk,k->ij', closer, m)


def iom_shares(gamma, s, populations):
    """ Row-normalized e^-gamma s_ij - e^-gamma (s_ij + n_j) over j != i; empty rows stay 0 """
    n = np.asarray(populations, dtype=np.float64)
    weights = np.exp(-gamma * s) * -np.expm1(-gamma * n)[None, :]
    np.fill_diagonal(weights, 0.0)
    totals = weights.sum(axis=1, keepdims=True)
    shares = np.zeros_like(weights)
    rows = totals[:, 0] > 0
    shares[rows] = weights[rows] / totals[rows]
    return shares


def iom_predict(fit, outflows):
    """ T_ij = O_i * share_ij; rows sum to O_i """
    return np.asarray(outflows, dtype=np.float64)[:, None] * iom_shares(fit.gamma, fit.s,
                                                                         fit.populations)


def iom_gamma_grid(populations):
    """ 32 log-spaced decay values over [1e-8, 1e-2] scaled by 1000 / mean population """
    mean = float(np.mean(populations)) if len(populations) else 0.0
    scale = 1000.0 / mean if mean > 0 else 1.0
    return np.logspace(np.log10(IOM_GRID_RANGE[0]), np.log10(IOM_GRID_RANGE[1]),
                       IOM_GRID_POINTS) * scale


def iom_fit(flows, populations, distances, grid=None):
    """ Choose gamma on the grid minimizing the SMAPE of the reconstructed training flows """
    flows = np.asarray(flows, dtype=np.float64)
    populations = np.asarray(populations, dtype=np.float64)
    if np.any(populations < 0):
        raise RactcDataError('ERROR: The intervening-opportunity model needs populations >= 0')
    s = intervening_population(populations, distances)
    outflows = flows.sum(axis=1)
    best = None
    for gamma in (iom_gamma_grid(populations) if grid is None else grid):
        candidate = IOMFit(gamma=float(gamma), s=s, populations=populations)
        smape = evaluate([iom_predict(candidate, outflows)], [flows]).smape
        if best is None or smape < best.training_smape:
            best = IOMFit(gamma=float(gamma), s=s, populations=populations, training_smape=smape)
    return best


def radiation_predict(populations, outflows, distances):
    """
    T_ij = O_i m_i n_j / ((m_i + s_ij)(m_i + n_j + s_ij)) with s_ij the population within
    radius d_ij of i, excluding i and j. Zero denominators give 0.
    """
    m = np.asarray(populations, dtype=np.float64)
    outflows = np.asarray(outflows, dtype=np.float64)
    s = intervening_population(m, distances, inclusive=True)
    numerator = outflows[:, None] * m[:, None] * m[None, :]
    denominator = (m[:, None] + s) * (m[:, None] + m[None, :] + s)
    values = np.zeros_like(s)
    positive = denominator > 0
    values[positive] = numerator[positive] / denominator[positive]
    np.fill_diagonal(values, 0.0)
    return values


class BaselineSuite(object):
    """ Baselines fitted on the training split of a prepared dataset """

    def __init__(self, dataset):
        self.dataset = dataset
        start, stop = dataset.split.train
        self.train_indices = np.arange(start, stop)
        if self.train_indices.size == 0:
            raise RactcDataError('ERROR: The training split is empty')
        self.flows = dataset.frames[start:stop].sum(axis=0).astype(np.float64)
        self.populations = dataset.regions.populations
        self.distances = dataset.distances.values
        self._ha = {}
        self._gravity = None
        self._iom = None

    def ha(self, hour):
        if hour not in self._ha:
            self._ha[hour] = historical_average(self.dataset.series, hour, self.train_indices,
                                                hours=self.dataset.hours)
        return self._ha[hour]

    @property
    def gravity(self):
        if self._gravity is None:
            self._gravity = gravity_fit(self.flows, self.populations, self.distances)
        return self._gravity

    @property
    def iom(self):
        if self._iom is None:
            self._iom = iom_fit(self.flows, self.populations, self.distances)
        return self._iom

    def predict(self, model, k):
        """ Prediction of one baseline ('ha', 'gm', 'iom', 'rm') for target frame k """
        ha = self.ha(int(self.dataset.hours[k]))
        if model == 'ha':
            return ha
        if model == 'gm':
            return gravity_predict(self.gravity, self.populations, self.distances, total=ha.sum())
        if model == 'iom':
            return iom_predict(self.iom, ha.sum(axis=1))
        if model == 'rm':
            return radiation_predict(self.populations, ha.sum(axis=1), self.distances)
        raise RactcDataError('ERROR: Unknown baseline "%s"' % model)

    def predict_frames(self, model, targets):
        return np.array([self.predict(model, k) for k in targets])

    def fit_report(self, model):
        if model == 'gm':
            return self.gravity.to_dict()
        if model == 'iom':
            return self.iom.to_dict()
        return {}
