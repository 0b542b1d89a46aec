from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from cpclustering.commons import CellStatus, Dataset, DistanceMatrix, ParameterError
from cpclustering.metrics import ari, clustering_error, nmi, silhouette

METRICS = ("ari", "nmi", "ce")


def evaluate_labels(data: Dataset, dm: DistanceMatrix, labels) -> Dict[str, Optional[float]]:
    """
    Score a clustering: external metrics when the dataset has ground-truth labels, silhouette when it is defined

    Args:
        data (Dataset): the clustered points
        dm (DistanceMatrix): distances used for the silhouette
        labels: the predicted cluster ids

    Returns:
        Dict[str, Optional[float]]: ari, nmi, ce and silhouette, None where not available
    """
    scores = OrderedDict([("ari", None), ("nmi", None), ("ce", None), ("silhouette", None)])
    if data.labels is not None and data.n >= 2:
        scores["ari"] = ari(data.labels, labels)
        scores["nmi"] = nmi(data.labels, labels)
        scores["ce"] = clustering_error(data.labels, labels)
    try:
        scores["silhouette"] = silhouette(dm, labels)
    except ParameterError:
        pass
    return scores


@dataclass
class RunRecord:
    """outcome of one method on one dataset"""
    dataset: str
    method: str
    status: CellStatus = CellStatus.OK
    message: str = ""
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    k_clusters: Optional[int] = None
    ari: Optional[float] = None
    nmi: Optional[float] = None
    ce: Optional[float] = None
    silhouette: Optional[float] = None
    wall_time_ms: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return OrderedDict([("dataset", self.dataset), ("method", self.method), ("status", self.status.value),
                            ("message", self.message), ("params", self.params), ("seed", self.seed),
                            ("k_clusters", self.k_clusters), ("ari", self.ari), ("nmi", self.nmi),
                            ("ce", self.ce), ("silhouette", self.silhouette)])


class EvaluationReport(object):
    """results of a benchmark run, one record per dataset and method"""

    def __init__(self):
        self.records: List[RunRecord] = []
        self.datasets: List[str] = []
        self.methods: List[str] = []

    def add_record(self, record: RunRecord):
        """add a run to the report, keeping datasets and methods in order of first appearance

        Args:
            record (RunRecord): the run to add
        """
        self.records.append(record)
        if record.dataset not in self.datasets:
            self.datasets.append(record.dataset)
        if record.method not in self.methods:
            self.methods.append(record.method)

    def get_record(self, dataset: str, method: str) -> Optional[RunRecord]:
        for record in self.records:
            if record.dataset == dataset and record.method == method:
                return record
        return None

    @property
    def all_failed(self) -> bool:
        return len(self.records) > 0 and all(record.status != CellStatus.OK for record in self.records)

    def metric_table(self, metric: str) -> List[List[str]]:
        """
        Table of one metric with one row per dataset and one column per method

        Failed runs read ERR, successful runs without ground truth read NA.

        Args:
            metric (str): one of ari, nmi, ce

        Returns:
            List[List[str]]: header row followed by one row per dataset
        """
        if metric not in METRICS:
            raise ParameterError(f"unknown metric '{metric}', expected one of {METRICS}")
        table = [["dataset"] + self.methods]
        for dataset in self.datasets:
            row = [dataset]
            for method in self.methods:
                record = self.get_record(dataset, method)
                if record is None or record.status != CellStatus.OK:
                    row.append("ERR")
                elif getattr(record, metric) is None:
                    row.append("NA")
                else:
                    row.append(f"{getattr(record, metric):.4f}")
            table.append(row)
        return table

    def calculate_stats(self) -> Dict[str, Any]:
        """average of every metric per method over the datasets where it ran successfully"""
        stats = OrderedDict()
        for method in self.methods:
            records = [record for record in self.records if record.method == method]
            succeeded = [record for record in records if record.status == CellStatus.OK]
            method_stats = OrderedDict([("runs", len(records)), ("failed", len(records) - len(succeeded))])
            for metric in METRICS + ("silhouette",):
                values = [getattr(record, metric) for record in succeeded if getattr(record, metric) is not None]
                method_stats["average_" + metric] = float(np.average(values)) if len(values) > 0 else None
            stats[method] = method_stats
        return stats
