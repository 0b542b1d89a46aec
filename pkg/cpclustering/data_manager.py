import csv
import logging
import math
import os

from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn import datasets

from cpclustering.commons import Dataset, DistanceMatrix, DataError


logger = logging.getLogger(__name__)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _resolve_label_column(label_column: Union[str, int, None], header: Optional[List[str]], width: int,
                          path: str) -> Optional[int]:
    if label_column is None:
        return None
    if isinstance(label_column, int):
        index = label_column if label_column >= 0 else width + label_column
        if not 0 <= index < width:
            raise DataError(f"{path}: label column index {label_column} out of range for {width} columns")
        return index
    if header is None:
        if label_column.lstrip("-").isdigit():
            return _resolve_label_column(int(label_column), header, width, path)
        raise DataError(f"{path}: label column '{label_column}' requested but the file has no header row")
    if label_column in header:
        return header.index(label_column)
    if label_column.lstrip("-").isdigit():
        return _resolve_label_column(int(label_column), header, width, path)
    raise DataError(f"{path}: label column '{label_column}' not found in header {header}")


def dataset_from_arrays(points, labels=None, names: Sequence[str] = None) -> Dataset:
    """build a dataset from in-memory arrays, densifying labels by first appearance

    Args:
        points: n x d array-like of feature values
        labels: optional length-n sequence of hashable cluster ids
        names (Sequence[str]): optional feature names
    Returns:
        Dataset: the validated dataset
    """
    dense_labels = None
    if labels is not None:
        mapping = {}
        dense_labels = [mapping.setdefault(label, len(mapping)) for label in list(labels)]
    return Dataset(points=np.asarray(points, dtype=float), labels=dense_labels,
                   names=tuple(names) if names is not None else None)


def load_csv(path: str, label_column: Union[str, int, None] = None) -> Dataset:
    """load a dataset from a comma separated file

    A header row is detected when any cell of the first row is not numeric. The label column, if requested, is
    removed from the features and its values are mapped to dense integer ids in order of first appearance.

    Args:
        path (str): the path to the csv file
        label_column (Union[str, int, None]): name or 0-based index of the ground-truth label column
    Returns:
        Dataset: the loaded dataset
    """
    if not os.path.isfile(path):
        raise DataError(f"cannot read data file {path}: no such file")
    try:
        with open(path, newline="", encoding="utf-8") as csv_file:
            rows = [(line_num, [cell.strip() for cell in row]) for line_num, row in
                    enumerate(csv.reader(csv_file), start=1) if row and any(cell.strip() for cell in row)]
    except (OSError, UnicodeDecodeError, csv.Error) as err:
        raise DataError(f"cannot read data file {path}: {err}")
    if not rows:
        raise DataError(f"{path}: file contains no data rows")
    header = None
    if any(not _is_number(cell) for cell in rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: file contains a header but no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    label_idx = _resolve_label_column(label_column, header, width, path)
    points = []
    raw_labels = []
    for line_num, row in rows:
        if len(row) != width:
            raise DataError(f"{path}: row {line_num} has {len(row)} columns, expected {width}")
        values = []
        for col_idx, cell in enumerate(row):
            if col_idx == label_idx:
                raw_labels.append(cell)
                continue
            try:
                value = float(cell)
            except ValueError:
                col_name = f" ('{header[col_idx]}')" if header is not None else ""
                raise DataError(f"{path}: non-numeric value '{cell}' at row {line_num}, column {col_idx}{col_name}")
            if not math.isfinite(value):
                raise DataError(f"{path}: non-finite value '{cell}' at row {line_num}, column {col_idx}")
            values.append(value)
        points.append(values)
    if width - (1 if label_idx is not None else 0) < 1:
        raise DataError(f"{path}: no feature columns left after removing the label column")
    names = None
    if header is not None:
        names = [name for col_idx, name in enumerate(header) if col_idx != label_idx]
    dataset = dataset_from_arrays(points, labels=raw_labels if label_idx is not None else None, names=names)
    logger.info(f"loaded {dataset.n} points with {dataset.d} features from {path}")
    return dataset


def save_csv(data: Dataset, path: str) -> None:
    """write a dataset to csv with a header row and a trailing label column when labels are present

    Args:
        data (Dataset): the dataset to write
        path (str): the path to the file to write
    """
    names = list(data.names) if data.names is not None else [f"x{col}" for col in range(data.d)]
    with open(path, "w", newline="", encoding="utf-8") as outfile:
        writer = csv.writer(outfile)
        writer.writerow(names + (["label"] if data.labels is not None else []))
        for row_idx, row in enumerate(data.points):
            cells = [repr(float(value)) for value in row]
            if data.labels is not None:
                cells.append(str(int(data.labels[row_idx])))
            writer.writerow(cells)


def normalize_minmax(data: Dataset) -> Dataset:
    """rescale every feature to [0, 1]; constant features become all zeros"""
    mins = data.points.min(axis=0)
    ranges = data.points.max(axis=0) - mins
    safe_ranges = np.where(ranges > 0, ranges, 1.0)
    points = np.where(ranges > 0, (data.points - mins) / safe_ranges, 0.0)
    return Dataset(points=points, labels=data.labels, names=data.names)


def normalize_zscore(data: Dataset) -> Dataset:
    """standardize every feature to zero mean and unit variance; constant features become all zeros"""
    means = data.points.mean(axis=0)
    stds = data.points.std(axis=0)
    safe_stds = np.where(stds > 0, stds, 1.0)
    points = np.where(stds > 0, (data.points - means) / safe_stds, 0.0)
    return Dataset(points=points, labels=data.labels, names=data.names)


NORMALIZATIONS = {
    "minmax": normalize_minmax,
    "zscore": normalize_zscore,
    "none": lambda data: data
}


def normalize(data: Dataset, method: str = "minmax") -> Dataset:
    if method not in NORMALIZATIONS:
        raise DataError(f"unknown normalization '{method}', expected one of {sorted(NORMALIZATIONS)}")
    return NORMALIZATIONS[method](data)


def pairwise_distances(data: Dataset) -> DistanceMatrix:
    """dense matrix of euclidean distances between all points

    Args:
        data (Dataset): the dataset
    Returns:
        DistanceMatrix: symmetric n x n distances with zero diagonal and the largest off-diagonal entry
    """
    dist = squareform(pdist(data.points, metric="euclidean"))
    dist.setflags(write=False)
    max_dist = float(dist.max()) if data.n > 1 else 0.0
    return DistanceMatrix(dist=dist, max_dist=max_dist)


def make_blobs_fixture(n_per_blob: int = 30, centers: Sequence[Sequence[float]] = ((0.0, 0.0), (10.0, 10.0)),
                       spread: float = 0.5, seed: int = 0) -> Dataset:
    """isotropic gaussian blobs with known generation labels"""
    points, labels = datasets.make_blobs(n_samples=[n_per_blob] * len(centers), centers=np.asarray(centers),
                                         cluster_std=spread, random_state=seed)
    return dataset_from_arrays(points, labels=labels, names=["x", "y"] if len(centers[0]) == 2 else None)


def make_moons_fixture(n_points: int = 200, noise: float = 0.05, seed: int = 0) -> Dataset:
    """two interleaving half circles"""
    points, labels = datasets.make_moons(n_samples=n_points, noise=noise, random_state=seed)
    return dataset_from_arrays(points, labels=labels, names=["x", "y"])
