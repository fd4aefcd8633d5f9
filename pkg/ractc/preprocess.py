"""
Per-frame relation matrices and the attribute hypergraph incidence structure.

Each OD frame Y is split into an origin-origin matrix (regions that send demand to the same
destinations) and a destination-destination matrix (regions that receive demand from the
same origins). Both are symmetric-normalized with a self loop before graph convolution.
"""
import attr
import numpy as np

from ractc.ractcbase import RactcWarning, warn


class ZeroDegreeAttributeWarning(RactcWarning):
    """ An attribute appears in no region and receives no hypergraph message """
    pass


@attr.s(frozen=True, eq=False)
class RelationPair(object):
    """ Normalized origin-origin (oo) and destination-destination (dd) matrices of one frame """
    oo = attr.ib(repr=False)
    dd = attr.ib(repr=False)


@attr.s(frozen=True, eq=False)
class Incidence(object):
    """ Attribute-vertex x region-hyperedge incidence with vertex (dv) and edge (de) degrees """
    h = attr.ib(repr=False)
    dv = attr.ib(repr=False)
    de = attr.ib(repr=False)

    @property
    def vertex_count(self):
        return self.h.shape[0]

    @property
    def edge_count(self):
        return self.h.shape[1]


def decompose(y):
    """
    :param y: N x N nonnegative demand frame
    :return: (yo, yd) with yo = (y y^T) and yd = (y^T y), diagonals set to zero
    """
    y = np.asarray(y)
    yo = np.matmul(y, y.T)
    yd = np.matmul(y.T, y)
    np.fill_diagonal(yo, 0)
    np.fill_diagonal(yd, 0)
    return yo, yd


def inverse_sqrt_degree(a):
    """ D^-1/2 of the row-sum degrees with zero-degree entries defined as 0 """
    degree = np.sum(a, axis=1, dtype=np.float64)
    result = np.zeros_like(degree)
    positive = degree > 0
    result[positive] = 1.0 / np.sqrt(degree[positive])
    return result


def sym_normalize(a):
    """
    D^-1/2 a D^-1/2 + I. The product of the two scale factors is formed first so the output
    is exactly symmetric for symmetric input; isolated rows keep only the identity entry.
    """
    a = np.asarray(a, dtype=np.float64)
    scale = inverse_sqrt_degree(a)
    return np.outer(scale, scale) * a + np.eye(a.shape[0])


def relation_pair(frame):
    """ Decompose and normalize one OD frame """
    yo, yd = decompose(frame)
    return RelationPair(oo=sym_normalize(yo), dd=sym_normalize(yd))


def relation_pairs(series):
    """ RelationPair of every frame of an ODSeries, computed once per dataset """
    return [relation_pair(frame) for frame in series.frames]


def build_incidence(attribute_matrix):
    """
    Attributes are vertices and regions are hyperedges, so h is the transpose of the
    N x M attribute matrix. Attributes with zero degree raise ZeroDegreeAttributeWarning.
    """
    values = getattr(attribute_matrix, 'values', attribute_matrix)
    h = np.asarray(values, dtype=np.float64).T.copy()
    incidence = Incidence(h=h, dv=h.sum(axis=1), de=h.sum(axis=0))
    isolated = np.flatnonzero(incidence.dv == 0)
    if isolated.size:
        warn('%s of %s attributes have zero degree and receive no hypergraph message: %s' % (
            isolated.size, h.shape[0], ', '.join(str(index) for index in isolated[:10])),
            ZeroDegreeAttributeWarning)
    return incidence


def _safe_inverse(values):
    result = np.zeros_like(values, dtype=np.float64)
    positive = values > 0
    result[positive] = 1.0 / values[positive]
    return result


def hypergraph_propagation(incidence):
    """ The fixed M x M operator D_h^-1 H B_h^-1 H^T with zero-degree inverses defined as 0 """
    h = incidence.h
    return (_safe_inverse(incidence.dv)[:, None] * h * _safe_inverse(incidence.de)[None, :]).dot(h.T)


def cooccurrence_adjacency(incidence):
    """
    Attribute co-occurrence graph H H^T with a zero diagonal, symmetric-normalized with a
    self loop; the plain-graph replacement for the hypergraph operator.
    """
    a = incidence.h.dot(incidence.h.T)
    np.fill_diagonal(a, 0.0)
    return sym_normalize(a)
