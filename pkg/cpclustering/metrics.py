"""external (ARI, NMI, CE) and internal (silhouette) clustering metrics"""
import logging
import math

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb
from sklearn.metrics import silhouette_samples
from sklearn.metrics.cluster import contingency_matrix

from cpclustering.commons import ContingencyTable, DistanceMatrix, ParameterError

logger = logging.getLogger(__name__)


def _check_labelings(labels_true, labels_pred, min_points: int = 1):
    labels_true = np.asarray(labels_true)
    labels_pred = np.asarray(labels_pred)
    if labels_true.ndim != 1 or labels_true.shape != labels_pred.shape:
        raise ParameterError(f"label vectors must have the same length, got {labels_true.shape} and "
                             f"{labels_pred.shape}")
    if labels_true.size < min_points:
        raise ParameterError(f"at least {min_points} labelled points are needed, got {labels_true.size}")
    return labels_true, labels_pred


def contingency_table(labels_true, labels_pred) -> ContingencyTable:
    """overlap counts between the clusters of two labelings of the same points"""
    labels_true, labels_pred = _check_labelings(labels_true, labels_pred)
    counts = contingency_matrix(labels_true, labels_pred).astype(np.int64)
    return ContingencyTable(counts=counts, row_sums=counts.sum(axis=1), col_sums=counts.sum(axis=0),
                            total=int(counts.sum()))


def _same_partition(table: ContingencyTable) -> bool:
    nonzero = table.counts > 0
    return bool(np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1))


def _pairs(values) -> int:
    return int(np.sum(comb(values, 2, exact=False).round()))


def ari(labels_true, labels_pred) -> float:
    """
    Adjusted Rand index between two labelings

    Args:
        labels_true: reference cluster ids
        labels_pred: predicted cluster ids

    Returns:
        float: the index in [-1, 1]; 1.0 for identical partitions
    """
    _check_labelings(labels_true, labels_pred, min_points=2)
    table = contingency_table(labels_true, labels_pred)
    index = _pairs(table.counts.ravel())
    rows = _pairs(table.row_sums)
    cols = _pairs(table.col_sums)
    expected = rows * cols / _pairs([table.total])
    max_index = (rows + cols) / 2.0
    if max_index - expected == 0:
        return 1.0 if _same_partition(table) else 0.0
    return float((index - expected) / (max_index - expected))


def nmi(labels_true, labels_pred) -> float:
    """
    Normalized mutual information, with the mutual information divided by the geometric mean of the entropies

    Args:
        labels_true: reference cluster ids
        labels_pred: predicted cluster ids

    Returns:
        float: a value in [0, 1]
    """
    table = contingency_table(labels_true, labels_pred)
    n = float(table.total)
    rows = table.row_sums.astype(float)
    cols = table.col_sums.astype(float)
    entropy_true = -float(np.sum(rows / n * np.log(rows / n)))
    entropy_pred = -float(np.sum(cols / n * np.log(cols / n)))
    if entropy_true == 0 or entropy_pred == 0:
        logger.debug("one of the partitions is a single cluster, nmi falls back to its convention")
        return 1.0 if rows.size == 1 and cols.size == 1 else 0.0
    i_idx, j_idx = np.nonzero(table.counts)
    overlap = table.counts[i_idx, j_idx].astype(float)
    mutual_info = float(np.sum(overlap / n * np.log(n * overlap / (rows[i_idx] * cols[j_idx]))))
    return float(min(1.0, max(0.0, mutual_info / math.sqrt(entropy_true * entropy_pred))))


def clustering_error(labels_true, labels_pred) -> float:
    """
    Fraction of misplaced points under the best one-to-one matching of predicted to reference clusters

    Args:
        labels_true: reference cluster ids
        labels_pred: predicted cluster ids

    Returns:
        float: a value in [0, 1]
    """
    table = contingency_table(labels_true, labels_pred)
    rows, cols = linear_sum_assignment(table.counts, maximize=True)
    matched = int(table.counts[rows, cols].sum())
    return 1.0 - matched / table.total


def silhouette(dm: DistanceMatrix, labels) -> float:
    """
    Mean silhouette of the points, from their pairwise distances; points alone in their cluster score 0

    Args:
        dm (DistanceMatrix): pairwise distances
        labels: cluster id of every point

    Returns:
        float: a value in [-1, 1]
    """
    labels = np.asarray(labels)
    if labels.shape != (dm.n,):
        raise ParameterError(f"expected {dm.n} labels, got {labels.size}")
    if dm.n < 3:
        raise ParameterError(f"silhouette needs at least 3 points, got {dm.n}")
    n_clusters = np.unique(labels).size
    if n_clusters < 2:
        raise ParameterError("silhouette is undefined for fewer than 2 clusters")
    if n_clusters == dm.n:
        return 0.0
    return float(np.mean(silhouette_samples(np.asarray(dm.dist), labels, metric="precomputed")))
