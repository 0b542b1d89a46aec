import csv
import json
import logging
import os
from collections import OrderedDict
from typing import Any, Dict, List

import numpy as np

from cpclustering.commons import Dataset
from cpclustering.evaluation import EvaluationReport, METRICS

logger = logging.getLogger(__name__)


def _json_ready(value):
    if isinstance(value, dict):
        return OrderedDict((str(key), _json_ready(item)) for key, item in value.items())
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_ready(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _flatten(report: Dict[str, Any], prefix: str = "") -> List[List[str]]:
    rows = []
    for key, value in report.items():
        name = prefix + str(key)
        if isinstance(value, dict):
            rows.extend(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple)):
            rows.append([name, " ".join(str(item) for item in value)])
        else:
            rows.append([name, "" if value is None else str(value)])
    return rows


class ResultsWriter(object):
    """write clustering outputs to an output directory"""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)

    def path(self, file_name: str) -> str:
        return os.path.join(self.out_dir, file_name)

    def write_labels(self, labels, file_name: str = "labels.csv") -> str:
        """write the predicted labels as csv rows point_index,label

        Args:
            labels: cluster id of every point
            file_name (str): name of the file in the output directory
        Returns:
            str: the path of the written file
        """
        file_path = self.path(file_name)
        with open(file_path, "w", newline="") as outfile:
            writer = csv.writer(outfile)
            writer.writerow(["point_index", "label"])
            for point_idx, label in enumerate(labels):
                writer.writerow([point_idx, int(label)])
        return file_path

    def write_clustered_points(self, data: Dataset, labels, file_name: str = "clustered_points.csv") -> str:
        """write the points with their predicted label, ready to be plotted"""
        file_path = self.path(file_name)
        names = list(data.names) if data.names is not None else [f"x{col}" for col in range(data.d)]
        with open(file_path, "w", newline="") as outfile:
            writer = csv.writer(outfile)
            writer.writerow(names + ["label"])
            for row, label in zip(data.points, labels):
                writer.writerow([repr(float(value)) for value in row] + [int(label)])
        return file_path

    def write_report(self, report: Dict[str, Any], fmt: str = "json", file_name: str = "report") -> str:
        """write a run report as json, or as key,value csv rows with nested keys joined by dots

        Args:
            report (Dict[str, Any]): the report
            fmt (str): json or csv
            file_name (str): name of the file without extension
        Returns:
            str: the path of the written file
        """
        file_path = self.path(file_name + "." + fmt)
        if fmt == "json":
            self.write_json(report, file_path)
        else:
            with open(file_path, "w", newline="") as outfile:
                writer = csv.writer(outfile)
                writer.writerow(["key", "value"])
                writer.writerows(_flatten(_json_ready(report)))
        return file_path

    @staticmethod
    def write_json(content, file_path: str, pretty: bool = True):
        indent = None
        if pretty:
            indent = 4
        logger.debug(f"writing {file_path}")
        with open(file_path, "w") as outfile:
            json.dump(_json_ready(content), outfile, indent=indent)
            outfile.write("\n")

    def write_metric_tables(self, report: EvaluationReport, fmt: str = "csv") -> List[str]:
        """write one table per external metric, datasets as rows and methods as columns"""
        paths = []
        for metric in METRICS:
            table = report.metric_table(metric)
            file_path = self.path(f"{metric}_table.{fmt}")
            if fmt == "json":
                header = table[0]
                self.write_json([OrderedDict(zip(header, row)) for row in table[1:]], file_path)
            else:
                with open(file_path, "w", newline="") as outfile:
                    csv.writer(outfile).writerows(table)
            paths.append(file_path)
        return paths

    def write_runs(self, report: EvaluationReport, file_name: str = "runs.json") -> str:
        """write every run and the per-method summary; wall times are left out so reruns give identical files"""
        file_path = self.path(file_name)
        self.write_json(OrderedDict([("runs", [record.to_dict() for record in report.records]),
                                     ("summary", report.calculate_stats())]), file_path)
        return file_path

    def write_timings(self, report: EvaluationReport, file_name: str = "timings.csv") -> str:
        file_path = self.path(file_name)
        with open(file_path, "w", newline="") as outfile:
            writer = csv.writer(outfile)
            writer.writerow(["dataset", "method", "wall_time_ms"])
            for record in report.records:
                writer.writerow([record.dataset, record.method, f"{record.wall_time_ms:.3f}"])
        return file_path
