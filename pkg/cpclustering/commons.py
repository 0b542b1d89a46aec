from enum import Enum
from typing import List, Optional, Tuple, Dict, Any
from dataclasses import dataclass, field, replace

import numpy as np


DEFAULT_SEED = 20210


class CpscError(Exception):
    """base class for all errors raised by the package"""
    exit_code = 3


class ConfigError(CpscError):
    exit_code = 1


class DataError(CpscError, ValueError):
    exit_code = 2


class ParameterError(CpscError, ValueError):
    exit_code = 1


class NumericalError(CpscError, ArithmeticError):
    exit_code = 3


class Method(Enum):
    NJW = "njw"
    LOCAL_SCALE = "local_scale"
    SELF_TUNING = "self_tuning"
    CNN = "cnn"
    NP = "np"
    SNN = "snn"
    CSNN = "csnn"
    PG = "pg"
    CPSC = "cpsc"
    CPSCA = "cpsca"
    HYBRID = "hybrid"


CONFORMAL_METHODS = (Method.CPSC, Method.CPSCA, Method.HYBRID)


class GraphKind(Enum):
    EPSILON = 1
    KNN = 2


class NcmKind(Enum):
    KNN = "knn"
    KDE = "kde"


class TauKind(Enum):
    SMOOTHED = 1
    DETERMINISTIC = 2


class CellStatus(Enum):
    OK = "ok"
    EMPTY_GRAPH = "empty_graph"
    DEGENERATE = "degenerate"
    ERROR = "error"


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: Optional[np.ndarray] = None
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise DataError(f"points must be a non-empty n x d matrix, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            row, col = np.argwhere(~np.isfinite(points))[0]
            raise DataError(f"non-finite value at row {row}, column {col}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if self.labels is not None:
            labels = _frozen_array(self.labels, int)
            if labels.shape != (points.shape[0],):
                raise DataError(f"expected {points.shape[0]} labels, got {labels.size}")
            if np.any(labels < 0):
                raise DataError("labels must be non-negative integers")
            object.__setattr__(self, "labels", labels)
        if self.names is not None:
            if len(self.names) != points.shape[1]:
                raise DataError(f"expected {points.shape[1]} feature names, got {len(self.names)}")
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    dist: np.ndarray
    max_dist: float

    @property
    def n(self) -> int:
        return self.dist.shape[0]


@dataclass(frozen=True)
class NeighborhoodGraph:
    """ε-graph or directed kNN graph over point indices

    adjacency[u] lists the neighbours of u; for the kNN kind the list is ordered by (distance, index)
    """
    kind: GraphKind
    adjacency: Tuple[Tuple[int, ...], ...]
    epsilon: Optional[float] = None
    k_nn: Optional[int] = None
    directed: bool = False

    @property
    def n(self) -> int:
        return len(self.adjacency)


@dataclass(frozen=True)
class NcmSpec:
    kind: NcmKind
    k_nn: Optional[int] = None
    h: Optional[float] = None

    def __post_init__(self):
        if self.kind == NcmKind.KNN and (self.k_nn is None or int(self.k_nn) < 1):
            raise ParameterError(f"knn non-conformity measure needs k_nn >= 1, got {self.k_nn}")
        if self.kind == NcmKind.KDE and (self.h is None or not np.isfinite(self.h) or self.h <= 0):
            raise ParameterError(f"kde non-conformity measure needs a finite bandwidth h > 0, got {self.h}")

    @classmethod
    def knn(cls, k_nn: int) -> "NcmSpec":
        return cls(kind=NcmKind.KNN, k_nn=int(k_nn))

    @classmethod
    def kde(cls, h: float) -> "NcmSpec":
        return cls(kind=NcmKind.KDE, h=float(h))

    def describe(self) -> str:
        return f"knn(k_nn={self.k_nn})" if self.kind == NcmKind.KNN else f"kde(h={self.h})"


@dataclass(frozen=True)
class TauMode:
    kind: TauKind = TauKind.SMOOTHED
    seed: int = DEFAULT_SEED
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind == TauKind.DETERMINISTIC and (self.tau is None or not 0 < self.tau <= 1):
            raise ParameterError(f"deterministic tau must lie in (0, 1], got {self.tau}")

    @classmethod
    def smoothed(cls, seed: int = DEFAULT_SEED) -> "TauMode":
        return cls(kind=TauKind.SMOOTHED, seed=int(seed))

    @classmethod
    def deterministic(cls, tau: float = 1.0) -> "TauMode":
        return cls(kind=TauKind.DETERMINISTIC, tau=float(tau))

    def with_seed(self, seed: int) -> "TauMode":
        if self.kind == TauKind.DETERMINISTIC:
            return self
        return TauMode(kind=TauKind.SMOOTHED, seed=int(seed))


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    values: np.ndarray
    builder: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ParameterError(f"affinity must be a square matrix, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.values, self.values.T, rtol=0, atol=atol))

    def describe(self) -> str:
        return self.builder + "(" + ", ".join(f"{key}={value}" for key, value in self.params.items()) + ")"


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    X: np.ndarray
    eigenvalues: np.ndarray
    Y: Optional[np.ndarray] = None


@dataclass
class ClusteringResult:
    labels: np.ndarray
    k_clusters: int
    distortion: float
    seed: int
    eigenvalues: Tuple[float, ...] = ()
    restarts: int = 0

    @property
    def n_clusters_found(self) -> int:
        return int(np.unique(self.labels).size)

    def to_dict(self) -> Dict[str, Any]:
        return {"k_clusters": self.k_clusters, "clusters_found": self.n_clusters_found,
                "distortion": float(self.distortion), "seed": int(self.seed),
                "eigenvalues": [float(value) for value in self.eigenvalues], "restarts": self.restarts}


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    total: int


@dataclass
class GridCell:
    epsilon: float
    k_nn: int
    silhouette: Optional[float] = None
    status: CellStatus = CellStatus.OK
    message: str = ""
    result: Optional[ClusteringResult] = None


@dataclass
class TuneReport:
    best_epsilon: float
    best_k_nn: int
    best_silhouette: float
    result: ClusteringResult
    grid: List[GridCell] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return self.result.labels

    def to_dict(self) -> Dict[str, Any]:
        return {"best_epsilon": self.best_epsilon, "best_k_nn": self.best_k_nn,
                "best_silhouette": self.best_silhouette, "result": self.result.to_dict(),
                "cells_evaluated": len(self.grid),
                "cells_failed": len([cell for cell in self.grid if cell.status != CellStatus.OK])}


@dataclass(frozen=True)
class AffinityParams:
    """parameters of an affinity builder; a method only reads the ones its formula needs"""
    sigma: Optional[float] = None
    epsilon: Optional[float] = None
    k_nn: Optional[int] = None
    gamma: Optional[float] = None
    ncm: NcmKind = NcmKind.KNN
    bandwidth: Optional[float] = None
    tau: TauMode = field(default_factory=TauMode)

    def with_values(self, **kwargs) -> "AffinityParams":
        return replace(self, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        values = {"sigma": self.sigma, "epsilon": self.epsilon, "k_nn": self.k_nn, "gamma": self.gamma,
                  "ncm": self.ncm.value, "bandwidth": self.bandwidth}
        values = {key: value for key, value in values.items() if value is not None}
        if self.tau.kind == TauKind.DETERMINISTIC:
            values["deterministic_tau"] = self.tau.tau
        else:
            values["tau_seed"] = self.tau.seed
        return values


@dataclass(frozen=True)
class KMeansSettings:
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-9


@dataclass
class SweepRow:
    k_nn: int
    ari: Optional[float] = None
    nmi: Optional[float] = None
    ce: Optional[float] = None
    silhouette: Optional[float] = None
    status: CellStatus = CellStatus.OK
    message: str = ""
