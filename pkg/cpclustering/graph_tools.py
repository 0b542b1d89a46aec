"""set of functions to build and query neighbourhood graphs over point indices"""
import csv
import logging
import math
from typing import Tuple

import numpy as np

from cpclustering.commons import DistanceMatrix, NeighborhoodGraph, GraphKind, ParameterError

logger = logging.getLogger(__name__)


def build_epsilon_graph(dm: DistanceMatrix, epsilon: float) -> NeighborhoodGraph:
    """
    Build the undirected ε-graph connecting points whose distance is strictly below ε

    Args:
        dm (DistanceMatrix): pairwise distances
        epsilon (float): the neighbourhood radius

    Returns:
        NeighborhoodGraph: symmetric graph without self-loops, each adjacency list sorted by index
    """
    if epsilon is None or not math.isfinite(epsilon) or epsilon < 0:
        raise ParameterError(f"epsilon must be finite and non-negative, got {epsilon}")
    mask = dm.dist < epsilon
    np.fill_diagonal(mask, False)
    adjacency = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in mask)
    logger.debug(f"epsilon graph with epsilon={epsilon}: {int(mask.sum()) // 2} edges")
    return NeighborhoodGraph(kind=GraphKind.EPSILON, adjacency=adjacency, epsilon=float(epsilon), directed=False)


def build_knn_graph(dm: DistanceMatrix, k_nn: int) -> NeighborhoodGraph:
    """
    Build the directed kNN graph; ties between equidistant candidates go to the lower index

    Args:
        dm (DistanceMatrix): pairwise distances
        k_nn (int): number of neighbours per node, clamped to n - 1

    Returns:
        NeighborhoodGraph: directed graph, adjacency[i] ordered by (distance, index)
    """
    if k_nn is None or int(k_nn) < 1:
        raise ParameterError(f"k_nn must be >= 1, got {k_nn}")
    n = dm.n
    k = min(int(k_nn), n - 1)
    indices = np.arange(n)
    adjacency = []
    for i in range(n):
        order = np.lexsort((indices, dm.dist[i]))
        order = order[order != i]
        adjacency.append(tuple(int(j) for j in order[:k]))
    return NeighborhoodGraph(kind=GraphKind.KNN, adjacency=tuple(adjacency), k_nn=int(k_nn), directed=True)


def _check_node(g: NeighborhoodGraph, u: int) -> int:
    if not 0 <= u < g.n:
        raise IndexError(f"node index {u} out of range for a graph with {g.n} nodes")
    return int(u)


def neighborhood(g: NeighborhoodGraph, u: int) -> Tuple[int, ...]:
    """ordered neighbour indices of node u; empty for isolated nodes"""
    return g.adjacency[_check_node(g, u)]


def common_neighbors(g: NeighborhoodGraph, i: int, j: int) -> int:
    """number of nodes adjacent to both i and j, i and j themselves excluded"""
    i, j = _check_node(g, i), _check_node(g, j)
    if i == j:
        raise ParameterError("common neighbours are only defined for two distinct nodes")
    return len((set(g.adjacency[i]) & set(g.adjacency[j])) - {i, j})


def adjacency_matrix(g: NeighborhoodGraph) -> np.ndarray:
    matrix = np.zeros((g.n, g.n), dtype=bool)
    for u, neighbors in enumerate(g.adjacency):
        matrix[u, list(neighbors)] = True
    return matrix


def common_neighbors_matrix(g: NeighborhoodGraph) -> np.ndarray:
    """
    Matrix of common-neighbour counts for every pair of nodes

    No node is its own neighbour, so i and j can never be counted among their own common neighbours.

    Args:
        g (NeighborhoodGraph): the graph

    Returns:
        np.ndarray: n x n integer matrix with zero diagonal
    """
    adj = adjacency_matrix(g).astype(np.int64)
    counts = adj @ adj.T
    np.fill_diagonal(counts, 0)
    return counts


def edge_count(g: NeighborhoodGraph) -> int:
    total = sum(len(neighbors) for neighbors in g.adjacency)
    return total if g.directed else total // 2


def write_edge_list(g: NeighborhoodGraph, dm: DistanceMatrix, file_path: str) -> None:
    """dump the edges of the graph as csv rows i,j,dist (undirected edges once, with i < j)"""
    with open(file_path, "w", newline="") as outfile:
        writer = csv.writer(outfile)
        writer.writerow(["i", "j", "dist"])
        for i, neighbors in enumerate(g.adjacency):
            for j in neighbors:
                if g.directed or i < j:
                    writer.writerow([i, j, repr(float(dm.dist[i, j]))])
