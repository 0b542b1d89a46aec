"""affinity matrices built from distances, neighbourhood graphs and conformal p-values"""
import logging
import math
from abc import ABCMeta, abstractmethod
from typing import Optional, Tuple

import numpy as np

from cpclustering.commons import AffinityMatrix, AffinityParams, ConfigError, Dataset, DistanceMatrix, GraphKind, \
    Method, NcmKind, NcmSpec, NeighborhoodGraph, ParameterError, TauMode
from cpclustering.conformal import neighborhood_p_values, silverman_bandwidth
from cpclustering.data_manager import pairwise_distances
from cpclustering.graph_tools import adjacency_matrix, build_epsilon_graph, build_knn_graph, common_neighbors_matrix

logger = logging.getLogger(__name__)


def _check_sigma(sigma: float, name: str = "sigma") -> float:
    if sigma is None or not math.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"{name} must be finite and > 0, got {sigma}")
    return float(sigma)


def _zero_diagonal(values: np.ndarray) -> np.ndarray:
    np.fill_diagonal(values, 0.0)
    return values


def _check_graph(g: NeighborhoodGraph, n: int):
    if g.n != n:
        raise ParameterError(f"graph has {g.n} nodes but there are {n} points")


def _sorted_neighbor_distances(dm: DistanceMatrix, k_nn: int, name: str = "local scaling") -> np.ndarray:
    """distances from each point to its min(k_nn, n - 1) nearest other points, ascending"""
    if dm.n < 2:
        raise ParameterError(f"{name} needs at least two points")
    if k_nn is None or int(k_nn) < 1:
        raise ParameterError(f"k_nn must be >= 1, got {k_nn}")
    others = np.array(dm.dist)
    np.fill_diagonal(others, np.inf)
    return np.sort(others, axis=1)[:, :min(int(k_nn), dm.n - 1)]


def _fix_zero_scales(scales: np.ndarray) -> np.ndarray:
    if np.all(scales > 0):
        return scales
    positive = scales[scales > 0]
    replacement = float(positive.min()) if positive.size > 0 else 1.0
    logger.debug(f"{int(np.sum(scales <= 0))} points with zero local scale, using {replacement}")
    return np.where(scales > 0, scales, replacement)


def gaussian_affinity(dm: DistanceMatrix, sigma: float) -> AffinityMatrix:
    """A_ij = exp(-d_ij^2 / (2 sigma^2)), zero diagonal"""
    sigma = _check_sigma(sigma)
    values = np.exp(-np.square(dm.dist) / (2.0 * sigma ** 2))
    return AffinityMatrix(values=_zero_diagonal(values), builder="gaussian", params={"sigma": sigma})


def local_scale_affinity(dm: DistanceMatrix, k_nn: int = 7) -> AffinityMatrix:
    """
    Gaussian affinity with a per-point scale equal to the mean distance to the k_nn nearest other points

    Args:
        dm (DistanceMatrix): pairwise distances
        k_nn (int): number of neighbours used for the local scale, clamped to n - 1

    Returns:
        AffinityMatrix: A_ij = exp(-d_ij^2 / (sigma_i sigma_j))
    """
    scales = _fix_zero_scales(_sorted_neighbor_distances(dm, k_nn).mean(axis=1))
    values = np.exp(-np.square(dm.dist) / np.outer(scales, scales))
    return AffinityMatrix(values=_zero_diagonal(values), builder="local_scale", params={"k_nn": int(k_nn)})


def self_tuning_affinity(dm: DistanceMatrix, k_nn: int = 7) -> AffinityMatrix:
    """
    Gaussian affinity with a per-point scale equal to the distance to the k_nn-th nearest other point

    Args:
        dm (DistanceMatrix): pairwise distances
        k_nn (int): rank of the neighbour giving the local scale, clamped to n - 1

    Returns:
        AffinityMatrix: A_ij = exp(-d_ij^2 / (sigma_i sigma_j))
    """
    scales = _fix_zero_scales(_sorted_neighbor_distances(dm, k_nn)[:, -1])
    values = np.exp(-np.square(dm.dist) / np.outer(scales, scales))
    return AffinityMatrix(values=_zero_diagonal(values), builder="self_tuning", params={"k_nn": int(k_nn)})


def cnn_affinity(dm: DistanceMatrix, sigma: float, g: NeighborhoodGraph) -> AffinityMatrix:
    """
    Gaussian affinity whose scale grows with the number of common neighbours of the two points

    Args:
        dm (DistanceMatrix): pairwise distances
        sigma (float): the Gaussian scale
        g (NeighborhoodGraph): graph providing the neighbourhoods, ε-graph or kNN graph

    Returns:
        AffinityMatrix: A_kl = exp(-d_kl^2 / (2 sigma^2 (CNN_kl + 1)))
    """
    sigma = _check_sigma(sigma)
    _check_graph(g, dm.n)
    counts = common_neighbors_matrix(g)
    values = np.exp(-np.square(dm.dist) / (2.0 * sigma ** 2 * (counts + 1)))
    graph_param = {"epsilon": g.epsilon} if g.kind == GraphKind.EPSILON else {"k_nn": g.k_nn}
    return AffinityMatrix(values=_zero_diagonal(values), builder="cnn", params={"sigma": sigma, **graph_param})


def propagate_neighbors(values: np.ndarray, relation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the neighbour propagation rule until no new pair is related

    Whenever i~j and j~k but not i~k, the pair (i, k) becomes related and its affinity is set to min(a_ij, a_jk);
    when several intermediate points qualify the largest of these minima is kept. Each round uses the relation and
    affinities of the previous round, so the result does not depend on the order pairs are visited.

    Args:
        values (np.ndarray): symmetric affinity matrix
        relation (np.ndarray): symmetric boolean relation matrix with a false diagonal

    Returns:
        Tuple[np.ndarray, np.ndarray]: the updated affinity and relation matrices
    """
    values = np.array(values, dtype=float)
    relation = np.array(relation, dtype=bool)
    np.fill_diagonal(relation, False)
    n = values.shape[0]
    rounds = 0
    while True:
        as_int = relation.astype(np.int64)
        reachable = (as_int @ as_int) > 0
        new_pairs = reachable & ~relation
        np.fill_diagonal(new_pairs, False)
        if not new_pairs.any():
            break
        rounds += 1
        updated = values.copy()
        for i in np.flatnonzero(new_pairs.any(axis=1)):
            through = np.where(relation[i][:, None] & relation, np.minimum(values[i][:, None], values), -np.inf)
            best = through.max(axis=0)
            targets = new_pairs[i]
            updated[i, targets] = best[targets]
        values = updated
        relation = relation | new_pairs
        logger.debug(f"neighbour propagation round {rounds}: {int(new_pairs.sum()) // 2} new pairs")
    if rounds > 0:
        logger.debug(f"neighbour propagation reached a fixed point after {rounds} rounds on {n} points")
    return values, relation


def np_affinity(dm: DistanceMatrix, sigma: float, epsilon: float) -> AffinityMatrix:
    """Gaussian affinity updated by neighbour propagation over the pairs closer than ε"""
    gaussian = gaussian_affinity(dm, sigma)
    relation = adjacency_matrix(build_epsilon_graph(dm, epsilon))
    values, _ = propagate_neighbors(gaussian.values, relation)
    return AffinityMatrix(values=_zero_diagonal(values), builder="np",
                          params={"sigma": float(sigma), "epsilon": float(epsilon)})


def _check_knn_graph(g: NeighborhoodGraph, k_nn: int):
    if g.kind != GraphKind.KNN:
        raise ParameterError("shared nearest neighbour affinities need a kNN graph")
    if k_nn is None or int(k_nn) < 1:
        raise ParameterError(f"k_nn must be >= 1, got {k_nn}")


def snn_affinity(g: NeighborhoodGraph, k_nn: int) -> AffinityMatrix:
    """A_ij = |N_i ∩ N_j| / k_nn over a directed kNN graph"""
    _check_knn_graph(g, k_nn)
    values = common_neighbors_matrix(g) / float(k_nn)
    return AffinityMatrix(values=_zero_diagonal(values), builder="snn", params={"k_nn": int(k_nn)})


def csnn_affinity(g: NeighborhoodGraph, k_nn: int) -> AffinityMatrix:
    """
    Shared nearest neighbour affinity weighted by the ranks of the shared neighbours

    Each shared neighbour r contributes (k - i_r + 1)(k - j_r + 1), with i_r and j_r its 1-based positions in the
    distance-ordered neighbour lists, and the weights are divided by their global maximum.

    Args:
        g (NeighborhoodGraph): directed kNN graph
        k_nn (int): the k of the rank weights

    Returns:
        AffinityMatrix: the normalized weights, all zeros when no pair shares a neighbour
    """
    _check_knn_graph(g, k_nn)
    rank_weights = np.zeros((g.n, g.n))
    for i, neighbors in enumerate(g.adjacency):
        for rank, r in enumerate(neighbors, start=1):
            rank_weights[i, r] = k_nn - rank + 1
    weights = _zero_diagonal(rank_weights @ rank_weights.T)
    max_weight = weights.max() if weights.size > 0 else 0.0
    if max_weight <= 0:
        logger.warning("no pair of points shares a nearest neighbour, csnn affinity is all zeros")
        return AffinityMatrix(values=np.zeros_like(weights), builder="csnn", params={"k_nn": int(k_nn)})
    return AffinityMatrix(values=weights / max_weight, builder="csnn", params={"k_nn": int(k_nn)})


def pg_affinity(dm: DistanceMatrix, gamma: float) -> AffinityMatrix:
    """
    Powered Gaussian affinity

    Args:
        dm (DistanceMatrix): pairwise distances
        gamma (float): the power applied to the Gaussian kernel

    Returns:
        AffinityMatrix: A_ij = exp(-d_ij^2 / beta)^gamma with beta the largest nearest-neighbour distance
    """
    gamma = _check_sigma(gamma, "gamma")
    beta = float(_sorted_neighbor_distances(dm, 1, "powered gaussian affinity")[:, 0].max())
    if beta == 0:
        beta = 1.0
    values = np.exp(-np.square(dm.dist) / beta) ** gamma
    return AffinityMatrix(values=_zero_diagonal(values), builder="pg", params={"gamma": gamma, "beta": beta})


def _conformal_params(g: NeighborhoodGraph, ncm: NcmSpec, tau: TauMode) -> dict:
    graph_param = {"epsilon": g.epsilon} if g.kind == GraphKind.EPSILON else {"graph_k_nn": g.k_nn}
    return {**graph_param, "ncm": ncm.describe(), "tau": tau.kind.name.lower()}


def cpsc_asymmetric(data: Dataset, g: NeighborhoodGraph, ncm: NcmSpec, tau: TauMode,
                    dm: Optional[DistanceMatrix] = None) -> AffinityMatrix:
    """
    Conformal affinity A_ij = p-value of point i against the neighbourhood of point j

    Args:
        data (Dataset): the points
        g (NeighborhoodGraph): graph providing the neighbourhoods
        ncm (NcmSpec): the non-conformity measure
        tau (TauMode): smoothing mode
        dm (DistanceMatrix): distances of the points, computed when not given

    Returns:
        AffinityMatrix: asymmetric matrix with entries in [0, 1] and zero diagonal
    """
    dm = dm if dm is not None else pairwise_distances(data)
    _check_graph(g, data.n)
    values = neighborhood_p_values(dm, g, ncm, tau, data.d)
    return AffinityMatrix(values=_zero_diagonal(values), builder="cpsc_asymmetric",
                          params=_conformal_params(g, ncm, tau))


def cpsca_symmetric(data: Dataset, g: NeighborhoodGraph, ncm: NcmSpec, tau: TauMode,
                    dm: Optional[DistanceMatrix] = None) -> AffinityMatrix:
    """mean of the two directed conformal affinities of every pair"""
    directed = cpsc_asymmetric(data, g, ncm, tau, dm).values
    return AffinityMatrix(values=(directed + directed.T) / 2.0, builder="cpsca",
                          params=_conformal_params(g, ncm, tau))


def hybrid_affinity(data: Dataset, g: NeighborhoodGraph, ncm: NcmSpec, tau: TauMode, sigma: float,
                    dm: Optional[DistanceMatrix] = None) -> AffinityMatrix:
    """symmetric conformal affinity plus a Gaussian term, entries in [0, 2]"""
    sigma = _check_sigma(sigma)
    dm = dm if dm is not None else pairwise_distances(data)
    values = cpsca_symmetric(data, g, ncm, tau, dm).values + gaussian_affinity(dm, sigma).values
    return AffinityMatrix(values=_zero_diagonal(values), builder="hybrid",
                          params={**_conformal_params(g, ncm, tau), "sigma": sigma})


def default_hybrid_sigma(dm: DistanceMatrix, k_nn: int) -> float:
    """mean distance from a point to its k_nn-th nearest neighbour, 1.0 when that is zero"""
    if dm.n < 2:
        return 1.0
    sigma = float(_sorted_neighbor_distances(dm, k_nn, "hybrid sigma estimation")[:, -1].mean())
    return sigma if sigma > 0 else 1.0


def write_affinity_csv(affinity: AffinityMatrix, file_path: str) -> None:
    """dump the dense affinity matrix as csv, one row per point"""
    np.savetxt(file_path, affinity.values, delimiter=",", fmt="%.17g")


class AffinityBuilder(metaclass=ABCMeta):
    """build the symmetric affinity a clustering method works on, from its parameters"""

    method: Method = None
    required: Tuple[str, ...] = ()

    def __init__(self, params: AffinityParams):
        self.params = params
        self.check_params()

    def check_params(self):
        missing = [name for name in self.required if getattr(self.params, name) is None]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            raise ConfigError(f"method {self.method.value} requires {flags}")

    @abstractmethod
    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        """
        Build the affinity matrix of the provided points

        Args:
            data (Dataset): the points
            dm (DistanceMatrix): their pairwise distances

        Returns:
            AffinityMatrix: a symmetric affinity matrix ready for spectral clustering
        """
        pass

    def build_graph(self, dm: DistanceMatrix) -> Optional[NeighborhoodGraph]:
        """the neighbourhood graph used by the method, if any"""
        return None


class NjwBuilder(AffinityBuilder):
    method = Method.NJW
    required = ("sigma",)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return gaussian_affinity(dm, self.params.sigma)


class LocalScaleBuilder(AffinityBuilder):
    method = Method.LOCAL_SCALE
    required = ("k_nn",)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return local_scale_affinity(dm, self.params.k_nn)


class SelfTuningBuilder(AffinityBuilder):
    method = Method.SELF_TUNING
    required = ("k_nn",)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return self_tuning_affinity(dm, self.params.k_nn)


class CnnBuilder(AffinityBuilder):
    method = Method.CNN
    required = ("sigma",)

    def check_params(self):
        super().check_params()
        if self.params.epsilon is None and self.params.k_nn is None:
            raise ConfigError("method cnn requires --epsilon or --k-nn to build the neighbourhood graph")

    def build_graph(self, dm: DistanceMatrix) -> NeighborhoodGraph:
        if self.params.epsilon is not None:
            return build_epsilon_graph(dm, self.params.epsilon)
        return build_knn_graph(dm, self.params.k_nn)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return cnn_affinity(dm, self.params.sigma, self.build_graph(dm))


class NpBuilder(AffinityBuilder):
    method = Method.NP
    required = ("sigma", "epsilon")

    def build_graph(self, dm: DistanceMatrix) -> NeighborhoodGraph:
        return build_epsilon_graph(dm, self.params.epsilon)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return np_affinity(dm, self.params.sigma, self.params.epsilon)


class SnnBuilder(AffinityBuilder):
    method = Method.SNN
    required = ("k_nn",)

    def build_graph(self, dm: DistanceMatrix) -> NeighborhoodGraph:
        return build_knn_graph(dm, self.params.k_nn)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return snn_affinity(self.build_graph(dm), self.params.k_nn)


class CsnnBuilder(SnnBuilder):
    method = Method.CSNN

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return csnn_affinity(self.build_graph(dm), self.params.k_nn)


class PgBuilder(AffinityBuilder):
    method = Method.PG
    required = ("gamma",)

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return pg_affinity(dm, self.params.gamma)


class ConformalBuilder(AffinityBuilder, metaclass=ABCMeta):
    required = ("epsilon",)

    def check_params(self):
        super().check_params()
        if self.params.ncm == NcmKind.KNN and self.params.k_nn is None:
            raise ConfigError(f"method {self.method.value} with the knn non-conformity measure requires --k-nn")

    def ncm_spec(self, data: Dataset) -> NcmSpec:
        if self.params.ncm == NcmKind.KNN:
            return NcmSpec.knn(self.params.k_nn)
        bandwidth = self.params.bandwidth
        if bandwidth is None:
            bandwidth = silverman_bandwidth(data.points)
            logger.debug(f"kde bandwidth not set, using the rule-of-thumb value {bandwidth}")
        return NcmSpec.kde(bandwidth)

    def build_graph(self, dm: DistanceMatrix) -> NeighborhoodGraph:
        return build_epsilon_graph(dm, self.params.epsilon)


class CpscBuilder(ConformalBuilder):
    """asymmetric conformal affinity, reduced to the smaller of the two directed entries for clustering"""
    method = Method.CPSC

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        directed = cpsc_asymmetric(data, self.build_graph(dm), self.ncm_spec(data), self.params.tau, dm)
        return AffinityMatrix(values=np.minimum(directed.values, directed.values.T), builder="cpsc",
                              params=directed.params)


class CpscaBuilder(ConformalBuilder):
    method = Method.CPSCA

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        return cpsca_symmetric(data, self.build_graph(dm), self.ncm_spec(data), self.params.tau, dm)


class HybridBuilder(ConformalBuilder):
    method = Method.HYBRID

    def check_params(self):
        super().check_params()
        if self.params.sigma is None and self.params.k_nn is None:
            raise ConfigError("method hybrid requires --sigma or --k-nn to set the Gaussian scale")

    def build(self, data: Dataset, dm: DistanceMatrix) -> AffinityMatrix:
        sigma = self.params.sigma
        if sigma is None:
            sigma = default_hybrid_sigma(dm, self.params.k_nn)
            logger.debug(f"hybrid sigma not set, using the mean k_nn-th neighbour distance {sigma}")
        return hybrid_affinity(data, self.build_graph(dm), self.ncm_spec(data), self.params.tau, sigma, dm)


METHOD_TO_AFFINITY_CLASS = {
    Method.NJW: NjwBuilder,
    Method.LOCAL_SCALE: LocalScaleBuilder,
    Method.SELF_TUNING: SelfTuningBuilder,
    Method.CNN: CnnBuilder,
    Method.NP: NpBuilder,
    Method.SNN: SnnBuilder,
    Method.CSNN: CsnnBuilder,
    Method.PG: PgBuilder,
    Method.CPSC: CpscBuilder,
    Method.CPSCA: CpscaBuilder,
    Method.HYBRID: HybridBuilder
}


def get_affinity_builder(method: Method, params: AffinityParams) -> AffinityBuilder:
    return METHOD_TO_AFFINITY_CLASS[method](params)
