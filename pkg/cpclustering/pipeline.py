#!/usr/bin/env python3

import argparse
import logging
import sys
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Tuple

import numpy as np

from cpclustering.affinity import get_affinity_builder, write_affinity_csv
from cpclustering.commons import AffinityParams, ClusteringResult, CellStatus, ConfigError, CpscError, DataError, \
    Dataset, DistanceMatrix, KMeansSettings, Method
from cpclustering.config_parser import CpscConfigParser, RunConfig, load_manifest, method_params
from cpclustering.data_manager import load_csv, normalize, pairwise_distances
from cpclustering.evaluation import EvaluationReport, RunRecord, evaluate_labels
from cpclustering.graph_tools import build_epsilon_graph, write_edge_list
from cpclustering.results_writer import ResultsWriter
from cpclustering.spectral import spectral_cluster
from cpclustering.tuning import TUNABLE_METHODS, sensitivity_sweep, tune_cpsc, write_grid_csv, write_sweep_csv

logger = logging.getLogger("CPSC Clustering Pipeline")

COMMANDS_NEEDING_INPUT = ("cluster", "tune", "sweep")


class _ArgumentParser(argparse.ArgumentParser):
    """argument parser reporting usage errors with the configuration error exit code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def load_data(path: str, label_column, normalization: str) -> Tuple[Dataset, Dataset]:
    """load a dataset and return it both as read and normalized"""
    raw = load_csv(path, label_column=label_column)
    return raw, normalize(raw, normalization)


def _check_k_clusters(k_clusters: int, n: int):
    if k_clusters is None or not 1 <= k_clusters <= n:
        raise ConfigError(f"--k-clusters must lie in [1, {n}], got {k_clusters}")


def _kmeans_kwargs(kmeans: KMeansSettings) -> Dict[str, Any]:
    return {"n_init": kmeans.n_init, "max_iter": kmeans.max_iter, "tol": kmeans.tol}


def run_method(data: Dataset, dm: DistanceMatrix, method: Method, params: AffinityParams, k_clusters: int,
               seed: int, kmeans: KMeansSettings, tune: bool = False, epsilon_step: float = 0.01, k_min: int = 1,
               k_max: int = 30) -> Tuple[ClusteringResult, Dict[str, Any]]:
    """
    Cluster the data with one method, tuning ε and k_nn first when requested

    Args:
        data (Dataset): the normalized points
        dm (DistanceMatrix): their distances
        method (Method): the clustering method
        params (AffinityParams): method parameters
        k_clusters (int): number of clusters
        seed (int): k-means and tuning seed
        kmeans (KMeansSettings): k-means settings
        tune (bool): whether to select ε and k_nn by silhouette
        epsilon_step (float): step of the radius grid
        k_min (int): smallest k_nn of the grid
        k_max (int): largest k_nn of the grid

    Returns:
        Tuple[ClusteringResult, Dict[str, Any]]: the clustering and the parameters it was obtained with
    """
    _check_k_clusters(k_clusters, data.n)
    if tune:
        if method not in TUNABLE_METHODS:
            raise ConfigError(f"method {method.value} cannot be tuned, use one of "
                              f"{[tunable.value for tunable in TUNABLE_METHODS]}")
        report = tune_cpsc(data, k_clusters, variant=method, ncm=params.ncm, seed=seed, tau=params.tau,
                           bandwidth=params.bandwidth, sigma=params.sigma, epsilon_step=epsilon_step, k_min=k_min,
                           k_max=k_max, kmeans=kmeans, dm=dm)
        chosen = params.with_values(epsilon=report.best_epsilon, k_nn=report.best_k_nn).to_dict()
        chosen["tuned_silhouette"] = report.best_silhouette
        return report.result, chosen
    affinity = get_affinity_builder(method, params).build(data, dm)
    logger.info(f"built affinity {affinity.describe()}")
    return spectral_cluster(affinity, k_clusters, seed=seed, **_kmeans_kwargs(kmeans)), params.to_dict()


def cmd_cluster(config: RunConfig, conf_parser: CpscConfigParser) -> int:
    raw, data = load_data(config.input_path, config.label_column, config.normalization)
    dm = pairwise_distances(data)
    _check_k_clusters(config.k_clusters, data.n)
    writer = ResultsWriter(config.out_dir)
    builder = get_affinity_builder(config.method, config.params)
    affinity = builder.build(data, dm)
    logger.info(f"built affinity {affinity.describe()}")
    if config.dump_graph:
        graph = builder.build_graph(dm)
        if graph is not None:
            write_edge_list(graph, dm, writer.path("graph_edges.csv"))
        else:
            logger.warning(f"method {config.method.value} does not use a neighbourhood graph, nothing to dump")
    if config.dump_affinity:
        write_affinity_csv(affinity, writer.path("affinity.csv"))
    result = spectral_cluster(affinity, config.k_clusters, seed=config.seed, **_kmeans_kwargs(config.kmeans))
    writer.write_labels(result.labels)
    writer.write_clustered_points(raw, result.labels)
    writer.write_report(OrderedDict([
        ("command", "cluster"), ("input", config.input_path), ("method", config.method.value),
        ("normalization", config.normalization), ("params", config.params.to_dict()),
        ("affinity", affinity.builder), ("result", result.to_dict()),
        ("metrics", evaluate_labels(data, dm, result.labels))]), fmt=config.fmt)
    logger.info(f"clustering written to {config.out_dir}")
    return 0


def cmd_tune(config: RunConfig, conf_parser: CpscConfigParser) -> int:
    if config.method not in TUNABLE_METHODS:
        raise ConfigError(f"method {config.method.value} cannot be tuned, use one of "
                          f"{[tunable.value for tunable in TUNABLE_METHODS]}")
    raw, data = load_data(config.input_path, config.label_column, config.normalization)
    _check_k_clusters(config.k_clusters, data.n)
    dm = pairwise_distances(data)
    writer = ResultsWriter(config.out_dir)
    report = tune_cpsc(data, config.k_clusters, variant=config.method, ncm=config.params.ncm, seed=config.seed,
                       epsilon_values=config.grid_epsilon, k_values=config.grid_k, tau=config.params.tau,
                       bandwidth=config.params.bandwidth, sigma=config.params.sigma,
                       epsilon_step=config.epsilon_step, k_min=config.k_min, k_max=config.k_max, jobs=config.jobs,
                       kmeans=config.kmeans, dm=dm)
    write_grid_csv(report, writer.path("tune_grid.csv"))
    if config.dump_graph:
        write_edge_list(build_epsilon_graph(dm, report.best_epsilon), dm, writer.path("graph_edges.csv"))
    writer.write_labels(report.labels)
    writer.write_clustered_points(raw, report.labels)
    writer.write_report(OrderedDict([
        ("command", "tune"), ("input", config.input_path), ("method", config.method.value),
        ("normalization", config.normalization), ("params", config.params.to_dict()), ("tuning", report.to_dict()),
        ("metrics", evaluate_labels(data, dm, report.labels))]), fmt=config.fmt)
    return 0


def cmd_sweep(config: RunConfig, conf_parser: CpscConfigParser) -> int:
    if config.params.epsilon is None:
        raise ConfigError("the sweep command requires --epsilon")
    if config.label_column is None:
        raise ConfigError("the sweep command scores against ground truth and requires --label-column")
    raw, data = load_data(config.input_path, config.label_column, config.normalization)
    _check_k_clusters(config.k_clusters, data.n)
    writer = ResultsWriter(config.out_dir)
    rows = sensitivity_sweep(data, config.k_clusters, config.method, config.params.epsilon,
                             k_values=config.grid_k if config.grid_k else range(1, 21), ncm=config.params.ncm,
                             seed=config.seed, tau=config.params.tau, bandwidth=config.params.bandwidth,
                             sigma=config.params.sigma, kmeans=config.kmeans)
    write_sweep_csv(rows, writer.path("sensitivity.csv"))
    return 0


def _cell_seed(seed: int, dataset_idx: int, method_idx: int) -> int:
    return int(np.random.SeedSequence([seed, dataset_idx, method_idx]).generate_state(1)[0])


def _benchmark_cell(task) -> RunRecord:
    dataset, dataset_idx, entry, method_idx, config, conf_parser = task
    seed = _cell_seed(config.seed, dataset_idx, method_idx)
    record = RunRecord(dataset=dataset.name, method=entry.display_name, seed=seed, k_clusters=dataset.k_clusters)
    start = time.perf_counter()
    try:
        _, data = load_data(dataset.path, dataset.label_column, config.normalization)
        dm = pairwise_distances(data)
        method = Method(entry.method)
        params = method_params(conf_parser, method, entry.params, seed)
        result, record.params = run_method(data, dm, method, params, dataset.k_clusters, seed, config.kmeans,
                                           tune=entry.tune, epsilon_step=config.epsilon_step, k_min=config.k_min,
                                           k_max=config.k_max)
        scores = evaluate_labels(data, dm, result.labels)
        record.ari, record.nmi, record.ce, record.silhouette = (scores["ari"], scores["nmi"], scores["ce"],
                                                                scores["silhouette"])
    except (CpscError, ArithmeticError, ValueError) as err:
        logger.error(f"{entry.display_name} on {dataset.name} failed: {err}")
        record.status = CellStatus.ERROR
        record.message = str(err)
    record.wall_time_ms = (time.perf_counter() - start) * 1000.0
    return record


def cmd_benchmark(config: RunConfig, conf_parser: CpscConfigParser) -> int:
    if not config.manifest:
        raise ConfigError("the benchmark command requires --manifest")
    manifest = load_manifest(config.manifest)
    tasks = [(dataset, dataset_idx, entry, method_idx, config, conf_parser)
             for dataset_idx, dataset in enumerate(manifest.datasets)
             for method_idx, entry in enumerate(manifest.methods)]
    logger.info(f"running {len(tasks)} benchmark cells")
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as executor:
            records = list(executor.map(_benchmark_cell, tasks))
    else:
        records = [_benchmark_cell(task) for task in tasks]
    report = EvaluationReport()
    for record in records:
        report.add_record(record)
    writer = ResultsWriter(config.out_dir)
    writer.write_metric_tables(report, fmt=config.fmt)
    writer.write_runs(report)
    writer.write_timings(report)
    if report.all_failed:
        logger.error("every benchmark cell failed")
        return 3
    return 0


COMMANDS = {
    "cluster": cmd_cluster,
    "tune": cmd_tune,
    "sweep": cmd_sweep,
    "benchmark": cmd_benchmark
}


def build_run_config(args: argparse.Namespace, conf_parser: CpscConfigParser) -> RunConfig:
    """merge command line arguments over the configuration file, the command line wins"""
    if args.command in COMMANDS_NEEDING_INPUT:
        if not args.input:
            raise ConfigError(f"the {args.command} command requires --input")
        if args.k_clusters is None:
            raise ConfigError(f"the {args.command} command requires --k-clusters")
    if args.k_clusters is not None and args.k_clusters < 1:
        raise ConfigError(f"--k-clusters must be >= 1, got {args.k_clusters}")
    seed = args.seed if args.seed is not None else conf_parser.get_seed()
    method = Method(args.method)
    params = method_params(conf_parser, method, {
        "sigma": args.sigma, "epsilon": args.epsilon, "k_nn": args.k_nn, "gamma": args.gamma,
        "bandwidth": args.bandwidth, "ncm": args.ncm, "deterministic_tau": args.deterministic_tau}, seed)
    fmt = args.format if args.format else conf_parser.get_output_format()
    if fmt not in ("json", "csv"):
        raise ConfigError(f"unknown output format '{fmt}', expected json or csv")
    return RunConfig(command=args.command, input_path=args.input, label_column=args.label_column, method=method,
                     k_clusters=args.k_clusters, params=params, seed=seed,
                     out_dir=args.out if args.out else conf_parser.get_out_dir(), fmt=fmt,
                     normalization=args.normalization if args.normalization else conf_parser.get_normalization(),
                     jobs=args.jobs if args.jobs is not None else conf_parser.get_jobs(),
                     kmeans=conf_parser.get_kmeans_settings(), grid_epsilon=args.grid_epsilon, grid_k=args.grid_k,
                     epsilon_step=conf_parser.get_epsilon_step(), k_min=conf_parser.get_k_min(),
                     k_max=conf_parser.get_k_max(), dump_graph=args.dump_graph, dump_affinity=args.dump_affinity,
                     manifest=args.manifest)


def create_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config-file", metavar="config_file", dest="config_file", type=str, default=None,
                        help="yaml configuration file. Built-in defaults are used when not provided")
    common.add_argument("-l", "--log-file", metavar="log_file", dest="log_file", type=str, default=None,
                        help="path to the log file to generate. Logs go to standard error when not provided")
    common.add_argument("-L", "--log-level", dest="log_level", choices=['DEBUG', 'INFO', 'WARNING', 'ERROR',
                                                                        'CRITICAL'], help="set the logging level")
    common.add_argument("--input", metavar="input", dest="input", type=str, help="csv file with the points")
    common.add_argument("--label-column", metavar="label_column", dest="label_column", type=str, default=None,
                        help="name or 0-based index of the ground-truth label column")
    common.add_argument("--method", dest="method", choices=[method.value for method in Method], default="cpsca",
                        help="clustering method. Default cpsca")
    common.add_argument("--k-clusters", dest="k_clusters", type=int, help="number of clusters")
    common.add_argument("--sigma", dest="sigma", type=float, help="Gaussian scale")
    common.add_argument("--epsilon", dest="epsilon", type=float, help="radius of the ε-graph")
    common.add_argument("--k-nn", dest="k_nn", type=int, help="number of nearest neighbours")
    common.add_argument("--gamma", dest="gamma", type=float, help="power of the powered Gaussian affinity")
    common.add_argument("--bandwidth", dest="bandwidth", type=float, help="bandwidth of the kde measure")
    common.add_argument("--ncm", dest="ncm", choices=["knn", "kde"], help="non-conformity measure")
    common.add_argument("--deterministic-tau", dest="deterministic_tau", type=float,
                        help="use this fixed value in (0, 1] instead of random tie smoothing")
    common.add_argument("--seed", dest="seed", type=int, help="root random seed")
    common.add_argument("--jobs", dest="jobs", type=int, help="number of worker processes")
    common.add_argument("--out", dest="out", type=str, help="output directory")
    common.add_argument("--format", dest="format", choices=["json", "csv"], help="format of reports and tables")
    common.add_argument("--normalization", dest="normalization", choices=["minmax", "zscore", "none"],
                        help="feature normalization. Default minmax")
    common.add_argument("--grid-epsilon", dest="grid_epsilon", type=float, nargs="+",
                        help="radii to try instead of the default grid")
    common.add_argument("--grid-k", dest="grid_k", type=int, nargs="+",
                        help="k_nn values to try instead of the default grid")
    common.add_argument("--dump-graph", dest="dump_graph", action="store_true", default=False,
                        help="write the neighbourhood graph edges as csv")
    common.add_argument("--dump-affinity", dest="dump_affinity", action="store_true", default=False,
                        help="write the dense affinity matrix as csv")
    common.add_argument("--manifest", dest="manifest", type=str, help="benchmark manifest, yaml or json")
    parser = _ArgumentParser(description="Conformal prediction based spectral clustering")
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("cluster", parents=[common], help="cluster a dataset with one method")
    subparsers.add_parser("tune", parents=[common], help="select ε and k_nn by silhouette and cluster")
    subparsers.add_parser("sweep", parents=[common], help="score a conformal method over a range of k_nn")
    subparsers.add_parser("benchmark", parents=[common], help="run every method of a manifest on every dataset")
    return parser


def main(argv=None) -> int:
    args = create_parser().parse_args(argv)
    logging.basicConfig(filename=args.log_file, level=args.log_level, format='%(asctime)s - %(name)s - %(levelname)s:'
                                                                             ' %(message)s', force=True)
    try:
        conf_parser = CpscConfigParser(args.config_file)
        config = build_run_config(args, conf_parser)
        return COMMANDS[config.command](config, conf_parser)
    except CpscError as err:
        logger.error(str(err))
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        logger.error(str(err))
        print(f"error: {err}", file=sys.stderr)
        return DataError.exit_code


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
