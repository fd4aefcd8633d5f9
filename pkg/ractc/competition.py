"""
Competition relationship learning: seeded k-means over region features, competition labels,
and the two adversarial auxiliary losses (cluster-wise classification and edge-wise
discrimination) placed behind gradient reversal.
"""
import attr
import numpy as np

from ractc.ractcbase import RactcDataError, RactcWarning, warn
from ractc.runconfig import STREAM_CLUSTERING, derive_rng


DEFAULT_MAX_ITERS = 300


class ClusteringError(RactcDataError):
    """ Clustering cannot run on the given points (e.g. k larger than the point count) """
    pass


class LabelRangeError(RactcDataError):
    """ A class label is not below the classifier's class count """
    pass


class EmptyEdgeSetWarning(RactcWarning):
    """ No usable (edge, partner) triple; the edge loss is 0 for this step """
    pass


@attr.s(frozen=True, eq=False)
class ClusterModel(object):
    """ k-means result; history holds the inertia after every assignment step """
    centroids = attr.ib(repr=False)
    labels = attr.ib(repr=False)
    inertia = attr.ib()
    iterations = attr.ib()
    converged = attr.ib()
    history = attr.ib(factory=list, repr=False)


@attr.s(frozen=True, eq=False)
class CompetitionMatrix(object):
    """ Binary N x N matrix, 1 where two regions share a cluster """
    values = attr.ib(repr=False)
    labels = attr.ib(repr=False)


@attr.s(frozen=True)
class AuxHeads(object):
    """ Names of the cluster classifier (k2 x S) and bilinear discriminator (2S x S) """
    w_n = attr.ib(default='aux.w_n')
    w_eg = attr.ib(default='aux.w_eg')

    def register(self, store, k2, size, rng, variant=None):
        """ Register the classifier for the cluster variant, the discriminator for edge, or both """
        if variant in (None, 'cluster'):
            store.add(self.w_n, (k2, size), rng, fan_in=size)
        if variant in (None, 'edge'):
            store.add(self.w_eg, (2 * size, size), rng, fan_in=2 * size)


def _squared_distances(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def _plus_plus_init(points, k, rng):
    """ k-means++ seeding: each new center drawn with probability proportional to D^2 """
    count = points.shape[0]
    chosen = [int(rng.integers(count))]
    closest = _squared_distances(points, points[chosen])[:, 0]
    while len(chosen) < k:
        total = closest.sum()
        if total > 0:
            cumulative = np.cumsum(closest)
            index = int(np.searchsorted(cumulative, rng.random() * total, side='right'))
            index = min(index, count - 1)
        else:
            remaining = [i for i in range(count) if i not in chosen]
            index = remaining[int(rng.integers(len(remaining)))]
        chosen.append(index)
        closest = np.minimum(closest, _squared_distances(points, points[[index]])[:, 0])
    return points[chosen].astype(np.float64)


def kmeans(points, k, seed=0, max_iters=DEFAULT_MAX_ITERS):
    """
    Lloyd's algorithm from k-means++ seeding. Stops when assignments no longer change or
    after max_iters; an empty cluster is re-seeded at the point farthest from its centroid.
    :param seed: integer seed or numpy Generator
    :return: ClusterModel
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ClusteringError('ERROR: k-means needs a P x F point matrix, got shape %s' % (
            points.shape,))
    count = points.shape[0]
    if k < 1 or k > count:
        raise ClusteringError('ERROR: k-means needs 1 <= k <= P; got k = %s for P = %s points' % (
            k, count))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    centroids = _plus_plus_init(points, k, rng)
    labels = None
    history = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        distances = _squared_distances(points, centroids)
        new_labels = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(count), new_labels].sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            converged = True
            break
        labels = new_labels
        point_costs = distances[np.arange(count), labels]
        taken = set()
        for cluster in range(k):
            members = labels == cluster
            if np.any(members):
                centroids[cluster] = points[members].mean(axis=0)
                continue
            order = [i for i in np.argsort(-point_costs, kind='stable') if i not in taken]
            farthest = order[0]
            taken.add(farthest)
            centroids[cluster] = points[farthest]
    if not converged:
        distances = _squared_distances(points, centroids)
        labels = np.argmin(distances, axis=1)
        history.append(float(distances[np.arange(count), labels].sum()))
    return ClusterModel(centroids=centroids, labels=labels.astype(np.int64), inertia=history[-1],
                        iterations=iterations, converged=converged, history=history)


def cluster_labels(attribute_matrix, k2, seed, rng=None):
    """ Cluster ids from k-means over the raw binary attribute rows """
    values = getattr(attribute_matrix, 'values', attribute_matrix)
    rng = rng or derive_rng(seed, STREAM_CLUSTERING)
    return kmeans(np.asarray(values, dtype=np.float64), k2, rng).labels


def standardize_columns(features):
    """ Zero mean, unit variance per column; constant columns become zero """
    features = np.asarray(features, dtype=np.float64)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    scaled = np.zeros_like(features)
    varying = std > 0
    scaled[:, varying] = (features[:, varying] - mean[varying]) / std[varying]
    return scaled


def competition_matrix(attribute_matrix, distance_matrix, k2, seed, rng=None):
    """
    Cluster the standardized concatenation [attributes | distances] and mark pairs that share
    a cluster.
    """
    attributes = np.asarray(getattr(attribute_matrix, 'values', attribute_matrix), dtype=np.float64)
    distances = np.asarray(getattr(distance_matrix, 'values', distance_matrix), dtype=np.float64)
    features = standardize_columns(np.hstack([attributes, distances]))
    rng = rng or derive_rng(seed, STREAM_CLUSTERING + '/competition')
    labels = kmeans(features, k2, rng).labels
    values = (labels[:, None] == labels[None, :]).astype(np.int64)
    return CompetitionMatrix(values=values, labels=labels)


def cluster_loss(tape, d_embed, labels, w_n, reverse=True):
    """
    Mean softmax cross-entropy of the logits d_i W_n^T against the region cluster ids.
    :param reverse: route d_embed through gradient reversal
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes = w_n.shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LabelRangeError('ERROR: Cluster labels must lie in 0..%s, got max %s' % (
            classes - 1, labels.max()))
    x = tape.gradient_reverse(d_embed) if reverse else d_embed
    logits = tape.matmul(x, tape.transpose(w_n))
    return tape.cross_entropy(logits, labels)


def observed_edges(frames):
    """ (i, j) pairs with positive demand in any of the given frames, row-major order """
    total = np.sum(np.asarray(frames), axis=0)
    return np.argwhere(total > 0).astype(np.int64)


def sample_partners(edges, comp, rng):
    """
    Draw one competing destination p != j with comp(j, p) = 1 for every edge (i, j).
    :return: (kept edges E x 2, partners E, skipped count)
    """
    values = np.asarray(getattr(comp, 'values', comp))
    kept = []
    partners = []
    skipped = 0
    for i, j in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        candidates = np.flatnonzero(values[j] == 1)
        candidates = candidates[candidates != j]
        if candidates.size == 0:
            skipped += 1
            continue
        kept.append((i, j))
        partners.append(int(candidates[int(rng.integers(candidates.size))]))
    return (np.array(kept, dtype=np.int64).reshape(-1, 2), np.array(partners, dtype=np.int64),
            skipped)


def edge_loss(tape, o_embed, d_embed, g, edges, comp=None, w_eg=None, rng=None, partners=None,
              reverse=True):
    """
    Edge-wise adversarial loss. e_ij = [sigmoid(o_i), sigmoid(d_j)], D(e, g_i) = e W_eg g_i, and
    the loss is the mean of (D(e_ij, g_i) - D(e_ip, g_i))^2 over sampled triples.
    :param partners: fixed partner per edge; sampled from comp with rng when omitted
    """
    if partners is None:
        edges, partners, skipped = sample_partners(edges, comp, rng)
        if skipped:
            warn('%s edges have no competing partner and were skipped' % skipped, RactcWarning)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] == 0:
        warn('The edge set is empty; edge loss is 0', EmptyEdgeSetWarning)
        return tape.constant(0.0)
    origins, destinations = edges[:, 0], edges[:, 1]
    if reverse:
        o_embed = tape.gradient_reverse(o_embed)
        d_embed = tape.gradient_reverse(d_embed)
    o_squashed = tape.sigmoid(o_embed)
    d_squashed = tape.sigmoid(d_embed)
    o_rows = tape.lookup(o_squashed, origins)
    g_rows = tape.lookup(g, origins)
    positive = tape.concat([o_rows, tape.lookup(d_squashed, destinations)])
    negative = tape.concat([o_rows, tape.lookup(d_squashed, partners)])
    score_positive = tape.row_sum(tape.hadamard(tape.matmul(positive, w_eg), g_rows))
    score_negative = tape.row_sum(tape.hadamard(tape.matmul(negative, w_eg), g_rows))
    return tape.mse(score_positive, score_negative)
