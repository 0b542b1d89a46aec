"""spectral clustering: normalized affinity, leading eigenvectors, row normalization and seeded k-means"""
import logging
from typing import Tuple, Union

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from cpclustering.commons import AffinityMatrix, ClusteringResult, NumericalError, ParameterError, \
    SpectralEmbedding, DEFAULT_SEED

logger = logging.getLogger(__name__)


def _as_matrix(A: Union[AffinityMatrix, np.ndarray]) -> np.ndarray:
    return np.asarray(A.values if isinstance(A, AffinityMatrix) else A, dtype=float)


def normalized_laplacian(A: Union[AffinityMatrix, np.ndarray]) -> np.ndarray:
    """
    Compute L = D^-1/2 A D^-1/2 with D the diagonal degree matrix of A

    Points with zero degree keep a zero row and column: their degree is taken as 1.

    Args:
        A (Union[AffinityMatrix, np.ndarray]): symmetric nonnegative affinity

    Returns:
        np.ndarray: the symmetric n x n matrix L
    """
    values = _as_matrix(A)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ParameterError(f"affinity must be square, got shape {values.shape}")
    if not np.allclose(values, values.T, rtol=0, atol=1e-12):
        raise ParameterError("affinity matrix is not symmetric")
    if np.any(values < 0):
        raise ParameterError("affinity matrix has negative entries")
    degrees = values.sum(axis=1)
    isolated = degrees == 0
    if isolated.any():
        logger.warning(f"{int(isolated.sum())} points have zero degree in the affinity matrix")
        degrees = np.where(isolated, 1.0, degrees)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    laplacian = values * inv_sqrt[:, None] * inv_sqrt[None, :]
    return (laplacian + laplacian.T) / 2.0


def top_k_eigenvectors(L: np.ndarray, k_clusters: int) -> SpectralEmbedding:
    """
    Eigenvectors of the k largest eigenvalues of a symmetric matrix

    Args:
        L (np.ndarray): symmetric matrix
        k_clusters (int): number of eigenpairs

    Returns:
        SpectralEmbedding: orthonormal columns sorted by descending eigenvalue, each with its largest-magnitude
            entry positive
    """
    n = L.shape[0]
    if not 1 <= k_clusters <= n:
        raise ParameterError(f"k_clusters must lie in [1, {n}], got {k_clusters}")
    try:
        eigenvalues, vectors = linalg.eigh(L, subset_by_index=[n - k_clusters, n - 1])
    except (linalg.LinAlgError, ValueError) as err:
        raise NumericalError(f"symmetric eigensolver failed: {err}")
    eigenvalues = eigenvalues[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for col in range(vectors.shape[1]):
        if vectors[np.argmax(np.abs(vectors[:, col])), col] < 0:
            vectors[:, col] = -vectors[:, col]
    logger.debug(f"leading eigenvalues: {eigenvalues}")
    return SpectralEmbedding(X=vectors, eigenvalues=eigenvalues)


def row_normalize(X: np.ndarray) -> np.ndarray:
    """rescale every row to unit length; zero rows stay zero"""
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms[:, None] > 0, X / safe[:, None], 0.0)


def _careful_seeding(Y: np.ndarray, k_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = Y.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(Y, Y[chosen], "sqeuclidean")[:, 0]
    for _ in range(1, k_clusters):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a center already chosen
            candidates = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(candidates))
        chosen.append(idx)
        closest = np.minimum(closest, cdist(Y, Y[[idx]], "sqeuclidean")[:, 0])
    return Y[chosen].astype(float)


def _lloyd(Y: np.ndarray, centers: np.ndarray, max_iter: int, tol: float) -> Tuple[np.ndarray, float]:
    check_monotone = logger.isEnabledFor(logging.DEBUG)
    previous = np.inf
    for iteration in range(max_iter):
        sq_dist = cdist(Y, centers, "sqeuclidean")
        labels = np.argmin(sq_dist, axis=1)
        distortion = float(sq_dist[np.arange(Y.shape[0]), labels].sum())
        if check_monotone:
            logger.debug(f"k-means iteration {iteration}: distortion {distortion}")
            if distortion > previous + 1e-9 * max(1.0, previous):
                raise NumericalError(f"k-means distortion increased from {previous} to {distortion}")
        previous = distortion
        new_centers = centers.copy()
        for cluster in range(centers.shape[0]):
            members = labels == cluster
            if members.any():
                new_centers[cluster] = Y[members].mean(axis=0)
            else:
                farthest = int(np.argmax(sq_dist[np.arange(Y.shape[0]), labels]))
                new_centers[cluster] = Y[farthest]
        movement = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if movement < tol:
            break
    return centers, previous


def _relabel_by_first_appearance(labels: np.ndarray) -> np.ndarray:
    mapping = {}
    return np.array([mapping.setdefault(int(label), len(mapping)) for label in labels], dtype=int)


def kmeans(Y: np.ndarray, k_clusters: int, seed: int = DEFAULT_SEED, n_init: int = 10, max_iter: int = 300,
           tol: float = 1e-9) -> ClusteringResult:
    """
    Seeded k-means with careful seeding and restarts

    Args:
        Y (np.ndarray): n x k matrix of points to cluster
        k_clusters (int): number of clusters
        seed (int): root seed; every restart uses an independent stream spawned from it
        n_init (int): number of restarts
        max_iter (int): maximum number of Lloyd iterations per restart
        tol (float): stop when no centroid moves by tol or more

    Returns:
        ClusteringResult: the restart with the lowest distortion, labels numbered by first appearance
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if not 1 <= k_clusters <= n:
        raise ParameterError(f"k_clusters must lie in [1, {n}], got {k_clusters}")
    best_labels, best_distortion = None, np.inf
    for restart, seed_seq in enumerate(np.random.SeedSequence(seed).spawn(n_init)):
        rng = np.random.default_rng(seed_seq)
        centers, _ = _lloyd(Y, _careful_seeding(Y, k_clusters, rng), max_iter, tol)
        sq_dist = cdist(Y, centers, "sqeuclidean")
        labels = np.argmin(sq_dist, axis=1)
        distortion = float(sq_dist[np.arange(n), labels].sum())
        logger.debug(f"k-means restart {restart}: distortion {distortion}")
        if distortion < best_distortion:
            best_labels, best_distortion = labels, distortion
    return ClusteringResult(labels=_relabel_by_first_appearance(best_labels), k_clusters=k_clusters,
                            distortion=best_distortion, seed=seed, restarts=n_init)


def spectral_cluster(A: Union[AffinityMatrix, np.ndarray], k_clusters: int, seed: int = DEFAULT_SEED,
                     n_init: int = 10, max_iter: int = 300, tol: float = 1e-9) -> ClusteringResult:
    """
    Cluster the points described by a symmetric affinity matrix

    Args:
        A (Union[AffinityMatrix, np.ndarray]): symmetric nonnegative affinity
        k_clusters (int): number of clusters
        seed (int): k-means seed
        n_init (int): k-means restarts
        max_iter (int): maximum Lloyd iterations per restart
        tol (float): k-means convergence tolerance

    Returns:
        ClusteringResult: point i gets the k-means label of row i of the embedding
    """
    values = _as_matrix(A)
    n = values.shape[0]
    if not 1 <= k_clusters <= n:
        raise ParameterError(f"k_clusters must lie in [1, {n}], got {k_clusters}")
    if k_clusters == 1:
        normalized_laplacian(values)
        return ClusteringResult(labels=np.zeros(n, dtype=int), k_clusters=1, distortion=0.0, seed=seed)
    embedding = top_k_eigenvectors(normalized_laplacian(values), k_clusters)
    result = kmeans(row_normalize(embedding.X), k_clusters, seed, n_init, max_iter, tol)
    result.eigenvalues = tuple(float(value) for value in embedding.eigenvalues)
    return result
