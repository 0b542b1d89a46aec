import copy
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import dacite
import yaml

from cpclustering.commons import AffinityParams, ConfigError, KMeansSettings, Method, NcmKind, TauMode, \
    DEFAULT_SEED
from cpclustering.data_manager import NORMALIZATIONS


class ConfigProperty(Enum):
    SIGMA = 1
    EPSILON = 2
    K_NN = 3
    GAMMA = 4
    BANDWIDTH = 5


DEFAULT_CONFIG = {
    "generic": {
        "seed": DEFAULT_SEED,
        "output_dir": "results",
        "normalization": "minmax",
        "format": "json"
    },
    "conformal": {
        "ncm": "knn",
        "k_nn": 5,
        "bandwidth": None,
        "deterministic_tau": None
    },
    "tuning": {
        "epsilon_step": 0.01,
        "k_min": 1,
        "k_max": 30,
        "jobs": 1
    },
    "kmeans": {
        "n_init": 10,
        "max_iter": 300,
        "tol": 1e-9
    },
    "methods": {
        "local_scale": {"k_nn": 7},
        "self_tuning": {"k_nn": 7}
    }
}


def _merge(base: Dict[str, Any], overlay: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


class CpscConfigParser(object):
    def __init__(self, file_path: str = None):
        self.config = copy.deepcopy(DEFAULT_CONFIG)
        if file_path:
            try:
                with open(file_path) as conf_file:
                    user_config = yaml.safe_load(conf_file) or {}
            except OSError as err:
                raise ConfigError(f"cannot read configuration file {file_path}: {err}")
            except yaml.YAMLError as err:
                raise ConfigError(f"invalid yaml in configuration file {file_path}: {err}")
            if not isinstance(user_config, dict):
                raise ConfigError(f"configuration file {file_path} must contain a mapping")
            _merge(self.config, user_config)

    def get_method_property(self, method: Method, prop: ConfigProperty):
        property_name = self._get_property_name(prop)
        methods = self.config.get("methods") or {}
        if method.value in methods and methods[method.value] and property_name in methods[method.value]:
            return methods[method.value][property_name]
        else:
            return None

    @staticmethod
    def _get_property_name(prop: ConfigProperty):
        property_name = ""
        if prop == ConfigProperty.SIGMA:
            property_name = "sigma"
        elif prop == ConfigProperty.EPSILON:
            property_name = "epsilon"
        elif prop == ConfigProperty.K_NN:
            property_name = "k_nn"
        elif prop == ConfigProperty.GAMMA:
            property_name = "gamma"
        elif prop == ConfigProperty.BANDWIDTH:
            property_name = "bandwidth"
        return property_name

    def get_seed(self) -> int:
        return int(self.config["generic"]["seed"])

    def get_out_dir(self) -> str:
        return self.config["generic"]["output_dir"]

    def get_normalization(self) -> str:
        normalization = self.config["generic"]["normalization"]
        if normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization '{normalization}', expected one of {sorted(NORMALIZATIONS)}")
        return normalization

    def get_output_format(self) -> str:
        return self.config["generic"]["format"]

    def get_ncm(self) -> NcmKind:
        try:
            return NcmKind(self.config["conformal"]["ncm"])
        except ValueError:
            raise ConfigError(f"unknown non-conformity measure '{self.config['conformal']['ncm']}'")

    def get_conformal_k_nn(self) -> Optional[int]:
        return self.config["conformal"]["k_nn"]

    def get_bandwidth(self) -> Optional[float]:
        return self.config["conformal"]["bandwidth"]

    def get_deterministic_tau(self) -> Optional[float]:
        return self.config["conformal"]["deterministic_tau"]

    def get_epsilon_step(self) -> float:
        return float(self.config["tuning"]["epsilon_step"])

    def get_k_min(self) -> int:
        return int(self.config["tuning"]["k_min"])

    def get_k_max(self) -> int:
        return int(self.config["tuning"]["k_max"])

    def get_jobs(self) -> int:
        return int(self.config["tuning"]["jobs"])

    def get_kmeans_settings(self) -> KMeansSettings:
        kmeans = self.config["kmeans"]
        return KMeansSettings(n_init=int(kmeans["n_init"]), max_iter=int(kmeans["max_iter"]), tol=float(kmeans["tol"]))


@dataclass
class RunConfig:
    command: str
    input_path: Optional[str] = None
    label_column: Union[str, int, None] = None
    method: Method = Method.CPSCA
    k_clusters: Optional[int] = None
    params: AffinityParams = field(default_factory=AffinityParams)
    seed: int = DEFAULT_SEED
    out_dir: str = "results"
    fmt: str = "json"
    normalization: str = "minmax"
    jobs: int = 1
    kmeans: KMeansSettings = field(default_factory=KMeansSettings)
    grid_epsilon: Optional[List[float]] = None
    grid_k: Optional[List[int]] = None
    epsilon_step: float = 0.01
    k_min: int = 1
    k_max: int = 30
    dump_graph: bool = False
    dump_affinity: bool = False
    manifest: Optional[str] = None


def _first_set(*values):
    for value in values:
        if value is not None:
            return value
    return None


def method_params(conf_parser: CpscConfigParser, method: Method, overrides: Dict[str, Any] = None,
                  seed: int = DEFAULT_SEED) -> AffinityParams:
    """
    Merge the parameters of a method: explicit overrides first, then the method section of the configuration, then
    the conformal section

    Args:
        conf_parser (CpscConfigParser): the configuration
        method (Method): the clustering method
        overrides (Dict[str, Any]): values given on the command line or in a benchmark manifest
        seed (int): seed of the smoothed τ draws

    Returns:
        AffinityParams: the merged parameters
    """
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    unknown = set(overrides) - {"sigma", "epsilon", "k_nn", "gamma", "bandwidth", "ncm", "deterministic_tau"}
    if unknown:
        raise ConfigError(f"unknown parameters for method {method.value}: {sorted(unknown)}")
    conformal_k_nn = conf_parser.get_conformal_k_nn() if method in (Method.CPSC, Method.CPSCA, Method.HYBRID) \
        else None
    try:
        ncm = NcmKind(overrides["ncm"]) if "ncm" in overrides else conf_parser.get_ncm()
    except ValueError:
        raise ConfigError(f"unknown non-conformity measure '{overrides['ncm']}', expected knn or kde")
    deterministic_tau = _first_set(overrides.get("deterministic_tau"), conf_parser.get_deterministic_tau())
    tau = TauMode.deterministic(deterministic_tau) if deterministic_tau is not None else TauMode.smoothed(seed)
    k_nn = _first_set(overrides.get("k_nn"), conf_parser.get_method_property(method, ConfigProperty.K_NN),
                      conformal_k_nn)
    return AffinityParams(
        sigma=_first_set(overrides.get("sigma"), conf_parser.get_method_property(method, ConfigProperty.SIGMA)),
        epsilon=_first_set(overrides.get("epsilon"), conf_parser.get_method_property(method, ConfigProperty.EPSILON)),
        k_nn=int(k_nn) if k_nn is not None else None,
        gamma=_first_set(overrides.get("gamma"), conf_parser.get_method_property(method, ConfigProperty.GAMMA)),
        ncm=ncm,
        bandwidth=_first_set(overrides.get("bandwidth"),
                             conf_parser.get_method_property(method, ConfigProperty.BANDWIDTH),
                             conf_parser.get_bandwidth()),
        tau=tau)


@dataclass
class DatasetEntry:
    name: str
    path: str
    k_clusters: int
    label_column: Union[str, int, None] = None


@dataclass
class MethodEntry:
    method: str
    name: Optional[str] = None
    tune: bool = False
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def display_name(self) -> str:
        return self.name if self.name else self.method


@dataclass
class Manifest:
    datasets: List[DatasetEntry]
    methods: List[MethodEntry]


def load_manifest(file_path: str) -> Manifest:
    """
    Read a benchmark manifest, in yaml or json, with dataset paths resolved against the manifest directory

    Args:
        file_path (str): path to the manifest

    Returns:
        Manifest: the datasets and the methods to run on each of them
    """
    try:
        with open(file_path) as manifest_file:
            raw = yaml.safe_load(manifest_file)
    except OSError as err:
        raise ConfigError(f"cannot read manifest {file_path}: {err}")
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid manifest {file_path}: {err}")
    try:
        manifest = dacite.from_dict(data_class=Manifest, data=raw or {}, config=dacite.Config(strict=True))
    except dacite.DaciteError as err:
        raise ConfigError(f"invalid manifest {file_path}: {err}")
    if not manifest.datasets or not manifest.methods:
        raise ConfigError(f"manifest {file_path} must list at least one dataset and one method")
    known_methods = {method.value for method in Method}
    for entry in manifest.methods:
        if entry.method not in known_methods:
            raise ConfigError(f"unknown method '{entry.method}' in manifest {file_path}")
    base_dir = os.path.dirname(os.path.abspath(file_path))
    for dataset in manifest.datasets:
        if not os.path.isabs(dataset.path):
            dataset.path = os.path.join(base_dir, dataset.path)
    return manifest
