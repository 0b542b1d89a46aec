"""unsupervised selection of the neighbourhood radius and of k_nn by silhouette-maximizing grid search"""
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from cpclustering.affinity import cpsc_asymmetric, cpsca_symmetric, default_hybrid_sigma, hybrid_affinity
from cpclustering.commons import CellStatus, ClusteringResult, CpscError, Dataset, DistanceMatrix, GridCell, \
    KMeansSettings, Method, NcmKind, NcmSpec, NumericalError, ParameterError, SweepRow, TauMode, TuneReport, \
    DEFAULT_SEED
from cpclustering.conformal import silverman_bandwidth
from cpclustering.data_manager import pairwise_distances
from cpclustering.graph_tools import build_epsilon_graph, edge_count
from cpclustering.metrics import ari, clustering_error, nmi, silhouette
from cpclustering.spectral import spectral_cluster

logger = logging.getLogger(__name__)

TUNABLE_METHODS = (Method.CPSC, Method.CPSCA, Method.HYBRID)


def epsilon_grid(max_dist: float, step: float = 0.01) -> List[float]:
    """
    Radii step, 2 * step, ... up to max_dist included

    Args:
        max_dist (float): largest pairwise distance of the data
        step (float): grid step

    Returns:
        List[float]: the radii, or [max_dist] alone when max_dist is positive but smaller than the step
    """
    if step <= 0:
        raise ParameterError(f"epsilon step must be > 0, got {step}")
    count = int(math.floor(max_dist / step + 1e-9))
    if count == 0:
        return [float(max_dist)] if max_dist > 0 else []
    return [round(step * i, 12) for i in range(1, count + 1)]


def k_grid(n: int, k_min: int = 1, k_max: int = 30) -> List[int]:
    """values k_min..k_max of k_nn, the upper bound clamped to n - 1"""
    return list(range(max(1, k_min), min(k_max, n - 1) + 1))


@dataclass(frozen=True)
class GridSettings:
    variant: Method = Method.CPSCA
    ncm: NcmKind = NcmKind.KNN
    bandwidth: Optional[float] = None
    sigma: Optional[float] = None
    tau: TauMode = field(default_factory=TauMode)
    kmeans: KMeansSettings = field(default_factory=KMeansSettings)


def _cell_seed(seed: int, eps_idx: int, k_idx: int) -> int:
    return int(np.random.SeedSequence([seed, eps_idx, k_idx]).generate_state(1)[0])


def _cluster_cell(data: Dataset, dm: DistanceMatrix, graph, k_nn: int, k_clusters: int, settings: GridSettings,
                  cell_seed: int) -> ClusteringResult:
    if settings.ncm == NcmKind.KNN:
        ncm = NcmSpec.knn(k_nn)
    else:
        ncm = NcmSpec.kde(settings.bandwidth if settings.bandwidth is not None else silverman_bandwidth(data.points))
    tau = settings.tau.with_seed(cell_seed)
    if settings.variant == Method.HYBRID:
        sigma = settings.sigma if settings.sigma is not None else default_hybrid_sigma(dm, k_nn)
        affinity = hybrid_affinity(data, graph, ncm, tau, sigma, dm)
    elif settings.variant == Method.CPSC:
        directed = cpsc_asymmetric(data, graph, ncm, tau, dm).values
        affinity = np.minimum(directed, directed.T)
    else:
        affinity = cpsca_symmetric(data, graph, ncm, tau, dm)
    return spectral_cluster(affinity, k_clusters, seed=cell_seed, n_init=settings.kmeans.n_init,
                            max_iter=settings.kmeans.max_iter, tol=settings.kmeans.tol)


def _evaluate_row(data: Dataset, dm: DistanceMatrix, eps_idx: int, epsilon: float, k_values: Sequence[int],
                  k_clusters: int, settings: GridSettings, seed: int) -> List[GridCell]:
    """evaluate every k_nn of the grid for one radius; the ε-graph is shared by the whole row"""
    graph = build_epsilon_graph(dm, epsilon)
    if edge_count(graph) == 0:
        return [GridCell(epsilon=epsilon, k_nn=k_nn, status=CellStatus.EMPTY_GRAPH, message="no edges")
                for k_nn in k_values]
    cells = []
    for k_idx, k_nn in enumerate(k_values):
        try:
            result = _cluster_cell(data, dm, graph, k_nn, k_clusters, settings, _cell_seed(seed, eps_idx, k_idx))
            if result.n_clusters_found < 2:
                cells.append(GridCell(epsilon=epsilon, k_nn=k_nn, status=CellStatus.DEGENERATE,
                                      message=f"{result.n_clusters_found} cluster found", result=result))
                continue
            cells.append(GridCell(epsilon=epsilon, k_nn=k_nn, silhouette=silhouette(dm, result.labels),
                                  result=result))
        except (CpscError, ArithmeticError, ValueError) as err:
            logger.warning(f"grid cell epsilon={epsilon}, k_nn={k_nn} failed: {err}")
            cells.append(GridCell(epsilon=epsilon, k_nn=k_nn, status=CellStatus.ERROR, message=str(err)))
    return cells


def _evaluate_row_task(args):
    return _evaluate_row(*args)


def tune_cpsc(data: Dataset, k_clusters: int, variant: Method = Method.CPSCA, ncm: NcmKind = NcmKind.KNN,
              seed: int = DEFAULT_SEED, epsilon_values: Sequence[float] = None, k_values: Sequence[int] = None,
              tau: TauMode = None, bandwidth: float = None, sigma: float = None, epsilon_step: float = 0.01,
              k_min: int = 1, k_max: int = 30, jobs: int = 1, kmeans: KMeansSettings = None,
              dm: DistanceMatrix = None) -> TuneReport:
    """
    Pick the (ε, k_nn) pair whose clustering has the highest silhouette

    Failed cells (empty graph, less than two clusters found, numerical errors) are kept in the report with their
    status and never stop the search. Ties keep the cell with the smaller ε, then the smaller k_nn.

    Args:
        data (Dataset): the normalized points
        k_clusters (int): number of clusters
        variant (Method): conformal affinity to tune
        ncm (NcmKind): non-conformity measure
        seed (int): root seed, each cell derives its own seed from it and the cell indices
        epsilon_values (Sequence[float]): radii to try, replacing the default grid
        k_values (Sequence[int]): k_nn values to try, replacing the default grid
        tau (TauMode): smoothing mode, smoothed with the cell seed by default
        bandwidth (float): kde bandwidth, rule-of-thumb value when not set
        sigma (float): Gaussian scale of the hybrid affinity, derived from k_nn when not set
        epsilon_step (float): step of the default radius grid
        k_min (int): smallest k_nn of the default grid
        k_max (int): largest k_nn of the default grid
        jobs (int): number of worker processes, rows of the grid are distributed among them
        kmeans (KMeansSettings): k-means settings
        dm (DistanceMatrix): distances of the points, computed when not given

    Returns:
        TuneReport: the best cell, its clustering and the whole grid in (ε, k_nn) order
    """
    if variant not in TUNABLE_METHODS:
        raise ParameterError(f"only conformal methods can be tuned, got {variant.value}")
    if k_clusters < 2:
        raise ParameterError(f"tuning needs k_clusters >= 2, got {k_clusters}")
    dm = dm if dm is not None else pairwise_distances(data)
    if epsilon_values is not None:
        eps_values = sorted(set(float(epsilon) for epsilon in epsilon_values))
    else:
        eps_values = epsilon_grid(dm.max_dist, epsilon_step)
    if k_values is not None:
        knn_values = sorted(set(int(k) for k in k_values))
    elif ncm == NcmKind.KDE and variant != Method.HYBRID:
        # the kde measure ignores k_nn, a single column is enough
        knn_values = k_grid(data.n, k_min, k_min)
    else:
        knn_values = k_grid(data.n, k_min, k_max)
    if not eps_values or not knn_values:
        raise ParameterError(f"empty parameter grid: {len(eps_values)} radii, {len(knn_values)} k_nn values")
    settings = GridSettings(variant=variant, ncm=ncm, bandwidth=bandwidth, sigma=sigma,
                            tau=tau if tau is not None else TauMode.smoothed(seed),
                            kmeans=kmeans if kmeans is not None else KMeansSettings())
    logger.info(f"tuning {variant.value} over {len(eps_values)} radii x {len(knn_values)} k_nn values")
    tasks = [(data, dm, eps_idx, float(epsilon), knn_values, k_clusters, settings, seed)
             for eps_idx, epsilon in enumerate(eps_values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_evaluate_row_task, tasks))
    else:
        rows = [_evaluate_row_task(task) for task in tasks]
    grid = [cell for row in rows for cell in row]
    best = None
    for cell in grid:
        if cell.status == CellStatus.OK and (best is None or cell.silhouette > best.silhouette):
            best = cell
    failed = len([cell for cell in grid if cell.status != CellStatus.OK])
    if best is None:
        raise NumericalError(f"no grid cell produced a usable clustering ({failed} cells failed)")
    logger.info(f"best cell epsilon={best.epsilon}, k_nn={best.k_nn}, silhouette={best.silhouette} "
                f"({failed} of {len(grid)} cells failed)")
    return TuneReport(best_epsilon=best.epsilon, best_k_nn=best.k_nn, best_silhouette=best.silhouette,
                      result=best.result, grid=grid)


def sensitivity_sweep(data: Dataset, k_clusters: int, variant: Method, epsilon: float,
                      k_values: Sequence[int] = range(1, 21), ncm: NcmKind = NcmKind.KNN, seed: int = DEFAULT_SEED,
                      tau: TauMode = None, bandwidth: float = None, sigma: float = None,
                      kmeans: KMeansSettings = None, dm: DistanceMatrix = None) -> List[SweepRow]:
    """
    Cluster the data at a fixed radius for several k_nn values and score every clustering against the true labels

    Args:
        data (Dataset): the normalized points, with ground-truth labels
        k_clusters (int): number of clusters
        variant (Method): conformal affinity
        epsilon (float): the neighbourhood radius
        k_values (Sequence[int]): the k_nn values to try
        ncm (NcmKind): non-conformity measure
        seed (int): root seed
        tau (TauMode): smoothing mode
        bandwidth (float): kde bandwidth
        sigma (float): Gaussian scale of the hybrid affinity
        kmeans (KMeansSettings): k-means settings
        dm (DistanceMatrix): distances of the points, computed when not given

    Returns:
        List[SweepRow]: one row per k_nn value, failed rows carry a status instead of scores
    """
    if data.labels is None:
        raise ParameterError("the sensitivity sweep needs ground-truth labels")
    if variant not in TUNABLE_METHODS:
        raise ParameterError(f"only conformal methods can be swept, got {variant.value}")
    dm = dm if dm is not None else pairwise_distances(data)
    settings = GridSettings(variant=variant, ncm=ncm, bandwidth=bandwidth, sigma=sigma,
                            tau=tau if tau is not None else TauMode.smoothed(seed),
                            kmeans=kmeans if kmeans is not None else KMeansSettings())
    graph = build_epsilon_graph(dm, epsilon)
    rows = []
    for k_idx, k_nn in enumerate(k_values):
        try:
            result = _cluster_cell(data, dm, graph, int(k_nn), k_clusters, settings, _cell_seed(seed, 0, k_idx))
        except (CpscError, ArithmeticError, ValueError) as err:
            logger.warning(f"sweep at k_nn={k_nn} failed: {err}")
            rows.append(SweepRow(k_nn=int(k_nn), status=CellStatus.ERROR, message=str(err)))
            continue
        score = silhouette(dm, result.labels) if 2 <= result.n_clusters_found < data.n else None
        rows.append(SweepRow(k_nn=int(k_nn), ari=ari(data.labels, result.labels),
                             nmi=nmi(data.labels, result.labels),
                             ce=clustering_error(data.labels, result.labels), silhouette=score,
                             status=CellStatus.OK if result.n_clusters_found >= 2 else CellStatus.DEGENERATE))
    return rows


def _format_score(value: Optional[float]) -> str:
    return "NA" if value is None else repr(float(value))


def write_grid_csv(report: TuneReport, file_path: str) -> None:
    """write the grid cells as csv rows epsilon,k_nn,silhouette,status"""
    with open(file_path, "w", newline="") as outfile:
        writer = csv.writer(outfile)
        writer.writerow(["epsilon", "k_nn", "silhouette", "status"])
        for cell in report.grid:
            writer.writerow([repr(float(cell.epsilon)), cell.k_nn, _format_score(cell.silhouette), cell.status.value])


def write_sweep_csv(rows: Sequence[SweepRow], file_path: str) -> None:
    with open(file_path, "w", newline="") as outfile:
        writer = csv.writer(outfile)
        writer.writerow(["k_nn", "ari", "nmi", "ce", "silhouette", "status"])
        for row in rows:
            writer.writerow([row.k_nn, _format_score(row.ari), _format_score(row.nmi), _format_score(row.ce),
                             _format_score(row.silhouette), row.status.value])
