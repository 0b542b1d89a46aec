"""non-conformity measures and conformal p-values of a point against a set of points"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from cpclustering.commons import NcmSpec, NcmKind, TauMode, TauKind, DistanceMatrix, NeighborhoodGraph, \
    ParameterError

logger = logging.getLogger(__name__)


def gaussian_kernel(u):
    """K(u) = exp(-u^2 / 2) / (2 pi)"""
    return np.exp(-0.5 * np.square(u)) / (2.0 * math.pi)


def _as_point_set(points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1 or points.size == 0:
        raise ParameterError("the reference set must contain at least one point")
    return points


def _kde_scale(h: float, d: int) -> float:
    scale = h ** d
    if not math.isfinite(scale) or scale == 0:
        # only the ranks of the scores are used, so a common positive factor can be dropped
        logger.debug(f"h^d not representable for h={h}, d={d}; dropping the bandwidth normalization")
        return 1.0
    return scale


# relative gap under which an incrementally updated score is recomputed from scratch
_RESCORE_RTOL = 1e-9


def _without_diagonal(dist: np.ndarray) -> np.ndarray:
    m = dist.shape[0]
    return dist[~np.eye(m, dtype=bool)].reshape(m, m - 1)


def _scores(others: np.ndarray, ncm: NcmSpec, d: int) -> np.ndarray:
    """
    non-conformity of points given their distances to the rest of their set along the last axis

    Terms are summed in ascending order, so equal multisets of distances always give bitwise equal scores
    """
    size = others.shape[-1]
    if ncm.kind == NcmKind.KNN:
        k = min(ncm.k_nn, size)
        return np.cumsum(np.sort(others, axis=-1), axis=-1)[..., k - 1]
    kernel = np.sort(gaussian_kernel(others / ncm.h), axis=-1)
    return -np.cumsum(kernel, axis=-1)[..., -1] / (size * _kde_scale(ncm.h, d))


def _approximate_member_scores(inside_others: np.ndarray, to_members: np.ndarray, ncm: NcmSpec,
                               d: int) -> np.ndarray:
    """
    scores of the m members of a set after adding each of the o points of to_members (o x m distances), updated
    from the scores without the added point. Equal up to rounding to what :func:`_scores` gives.
    """
    m = inside_others.shape[0]
    if ncm.kind == NcmKind.KNN:
        ordered = np.sort(inside_others, axis=1)
        cumulative = np.cumsum(ordered, axis=1)
        k = min(ncm.k_nn, m)
        if k <= m - 1:
            threshold = ordered[:, k - 1]
            without_new = cumulative[:, k - 1]
            shorter = cumulative[:, k - 2] if k >= 2 else np.zeros(m)
            return np.where(to_members < threshold[None, :], shorter[None, :] + to_members, without_new[None, :])
        total = cumulative[:, -1] if m >= 2 else np.zeros(m)
        return total[None, :] + to_members
    base = gaussian_kernel(inside_others / ncm.h).sum(axis=1)
    return -(base[None, :] + gaussian_kernel(to_members / ncm.h)) / (m * _kde_scale(ncm.h, d))


def knn_ncm(z, S, k_nn: int) -> float:
    """
    KNN non-conformity: sum of the k_nn smallest distances from z to the members of S

    Args:
        z: the point
        S: the reference set, one point per row
        k_nn (int): number of nearest neighbours, clamped to |S|

    Returns:
        float: the non-conformity score, larger means less conforming
    """
    S = _as_point_set(S)
    if k_nn < 1:
        raise ParameterError(f"k_nn must be >= 1, got {k_nn}")
    distances = cdist(np.atleast_2d(np.asarray(z, dtype=float)), S)[0]
    return float(_scores(distances, NcmSpec.knn(k_nn), S.shape[1]))


def kde_ncm(z, S, h: float) -> float:
    """
    KDE non-conformity: negated gaussian kernel density of S evaluated at z

    Args:
        z: the point
        S: the reference set, one point per row
        h (float): the kernel bandwidth

    Returns:
        float: the non-conformity score, more negative means denser
    """
    S = _as_point_set(S)
    if h is None or not math.isfinite(h) or h <= 0:
        raise ParameterError(f"bandwidth h must be finite and > 0, got {h}")
    distances = cdist(np.atleast_2d(np.asarray(z, dtype=float)), S)[0]
    return float(_scores(distances, NcmSpec.kde(h), S.shape[1]))


def _leave_one_out_scores(dist: np.ndarray, ncm: NcmSpec, d: int) -> np.ndarray:
    """non-conformity of every member of a set against the rest of the set, from its distance matrix"""
    return _scores(_without_diagonal(dist), ncm, d)


def draw_tau(tau: TauMode, rng: Optional[np.random.Generator] = None) -> float:
    if tau.kind == TauKind.DETERMINISTIC:
        return tau.tau
    rng = rng if rng is not None else np.random.default_rng(tau.seed)
    # 1 - U[0, 1) lies in (0, 1], which keeps p-values strictly positive
    return 1.0 - rng.random()


def tau_matrix(tau: TauMode, n: int) -> np.ndarray:
    """
    τ value for every ordered pair of points, entry (i, j) being used for the p-value of point i against the
    neighbourhood of point j. The matrix is drawn in one pass so the values never depend on evaluation order.
    """
    if tau.kind == TauKind.DETERMINISTIC:
        return np.full((n, n), tau.tau)
    return 1.0 - np.random.default_rng(tau.seed).random((n, n))


def p_value(z, S0, ncm: NcmSpec, tau: TauMode, rng: Optional[np.random.Generator] = None) -> float:
    """
    Conformal p-value of z against the set S0

    z is provisionally appended to S0, every member of the extended set is scored against the others and the
    p-value counts the scores strictly larger than the one of z plus, smoothed by τ, the ties (z included)

    Args:
        z: the point to test
        S0: the reference set, one point per row
        ncm (NcmSpec): the non-conformity measure
        tau (TauMode): smoothing mode
        rng (np.random.Generator): optional generator to draw τ from, in smoothed mode

    Returns:
        float: the p-value, in (0, 1]
    """
    S0 = _as_point_set(S0)
    extended = np.vstack([S0, np.atleast_2d(np.asarray(z, dtype=float))])
    n = extended.shape[0]
    alphas = _leave_one_out_scores(squareform(pdist(extended)), ncm, extended.shape[1])
    alpha_n = alphas[-1]
    greater = int(np.sum(alphas > alpha_n))
    equal = int(np.sum(alphas == alpha_n))
    return (greater + equal * draw_tau(tau, rng)) / n


def conforms(z, S0, ncm: NcmSpec, tau: TauMode, significance: float = 0.05,
             rng: Optional[np.random.Generator] = None) -> bool:
    """whether z conforms to S0 at the given significance level, i.e. its p-value exceeds the level"""
    if not 0 <= significance < 1:
        raise ParameterError(f"significance must lie in [0, 1), got {significance}")
    return p_value(z, S0, ncm, tau, rng) > significance


def leave_one_out_p_values(points, ncm: NcmSpec, tau: TauMode) -> np.ndarray:
    """p-value of every point against all the other points"""
    points = _as_point_set(points)
    n = points.shape[0]
    if n < 2:
        raise ParameterError("leave-one-out p-values need at least two points")
    alphas = _leave_one_out_scores(squareform(pdist(points)), ncm, points.shape[1])
    greater = (alphas[None, :] > alphas[:, None]).sum(axis=1)
    equal = (alphas[None, :] == alphas[:, None]).sum(axis=1)
    if tau.kind == TauKind.DETERMINISTIC:
        taus = np.full(n, tau.tau)
    else:
        taus = 1.0 - np.random.default_rng(tau.seed).random(n)
    return (greater + equal * taus) / n


def silverman_bandwidth(points) -> float:
    """rule-of-thumb bandwidth for a gaussian kernel, 1.0 when the points have no spread"""
    points = _as_point_set(points)
    n, d = points.shape
    spread = float(np.mean(np.std(points, axis=0)))
    h = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4)) * spread
    return h if h > 0 else 1.0


def neighborhood_p_values(dm: DistanceMatrix, g: NeighborhoodGraph, ncm: NcmSpec, tau: TauMode,
                          d: int) -> np.ndarray:
    """
    Matrix P with P[i, j] the p-value of point i against the neighbourhood of point j (point i removed from it)

    Entries whose reference set is empty, and the diagonal, are 0. For a fixed j the scores of the neighbourhood
    members are computed once; adding a point i from outside the neighbourhood changes each member score by at
    most one term, which lets all the outside points be handled together. Member scores that come close to the
    score of the added point are recomputed with :func:`p_value`'s own scoring, so ties are counted exactly as a
    direct call would count them.

    Args:
        dm (DistanceMatrix): pairwise distances of the points
        g (NeighborhoodGraph): graph providing the neighbourhoods
        ncm (NcmSpec): the non-conformity measure
        tau (TauMode): smoothing mode
        d (int): number of features of the points

    Returns:
        np.ndarray: the n x n asymmetric matrix of p-values
    """
    n = dm.n
    if g.n != n:
        raise ParameterError(f"graph has {g.n} nodes but the distance matrix has {n} points")
    taus = tau_matrix(tau, n)
    pvalues = np.zeros((n, n))
    all_idx = np.arange(n)
    for j in range(n):
        members = np.array(g.adjacency[j], dtype=int)
        m = members.size
        if m == 0:
            continue
        inside = dm.dist[np.ix_(members, members)]
        inside_others = _without_diagonal(inside)
        if m >= 2:
            alpha_in = _scores(inside_others, ncm, d)
            greater = (alpha_in[None, :] > alpha_in[:, None]).sum(axis=1)
            equal = (alpha_in[None, :] == alpha_in[:, None]).sum(axis=1)
            pvalues[members, j] = (greater + equal * taus[members, j]) / m
        outside_mask = np.ones(n, dtype=bool)
        outside_mask[members] = False
        outside_mask[j] = False
        outside = all_idx[outside_mask]
        if outside.size == 0:
            continue
        to_members = dm.dist[np.ix_(outside, members)]
        alpha_new = _scores(to_members, ncm, d)
        alpha_members = _approximate_member_scores(inside_others, to_members, ncm, d)
        near = np.isclose(alpha_members, alpha_new[:, None], rtol=_RESCORE_RTOL, atol=0.0)
        near_new, near_member = np.nonzero(near)
        if near_new.size > 0:
            rows = np.concatenate([inside_others[near_member], to_members[near_new, near_member][:, None]], axis=1)
            alpha_members[near_new, near_member] = _scores(rows, ncm, d)
        greater = (alpha_members > alpha_new[:, None]).sum(axis=1)
        equal = (alpha_members == alpha_new[:, None]).sum(axis=1) + 1
        pvalues[outside, j] = (greater + equal * taus[outside, j]) / (m + 1)
    return pvalues
