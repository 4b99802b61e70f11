"""
Configuration management for Haptica components.
"""

import os
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import psutil
import yaml

from .categories import FeatureSet
from .errors import ConfigError
from .features import ON_DEGENERATE_CENTER, ON_DEGENERATE_RAISE
from .models.gaussian_hmm import COVARIANCE_DIAG, COVARIANCE_FULL, TrainConfig
from .taxels import parse_pool_factor


EXPERIMENT_KINDS = (
    "cv4",
    "resolution_sweep",
    "state_sweep",
    "multivariate_cv",
    "baseline_cv",
    "generalization",
)

ConfigT = TypeVar("ConfigT")


class HapticaPaths:
    """XDG locations used when no explicit path is given."""

    @classmethod
    def get_config_dir(cls) -> Path:
        config_home = os.getenv("XDG_CONFIG_HOME", os.path.expanduser("~/.config"))
        return Path(config_home) / "haptica"

    @classmethod
    def get_data_dir(cls) -> Path:
        data_home = os.getenv("XDG_DATA_HOME", os.path.expanduser("~/.local/share"))
        return Path(data_home) / "haptica"


def default_jobs() -> int:
    """Worker count from HAPTICA_JOBS, else the number of physical cores."""
    env = os.getenv("HAPTICA_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"HAPTICA_JOBS must be an integer, got '{env}'") from None
        if jobs < 1:
            raise ConfigError("HAPTICA_JOBS must be >= 1")
        return jobs
    return psutil.cpu_count(logical=False) or 1


@dataclass
class ExperimentConfig:
    """One experiment run, read from a flat key: value file."""

    kind: str = "cv4"
    # Either an existing dataset directory or a generation preset.
    dataset: Optional[str] = None
    generate: Optional[str] = None
    trials_per_cell: Optional[int] = None
    folds: int = 5
    n_states: List[int] = field(default_factory=lambda: [10])
    pooling: List[str] = field(default_factory=lambda: ["1", "2", "4", "8", "full"])
    feature_set: str = "force"
    seed: int = 0
    # Defaults to <XDG data dir>/haptica/reports.
    output_dir: Optional[str] = None
    jobs: Optional[int] = None

    # Feature extraction
    window: float = 1.2
    connectivity: int = 4
    on_degenerate: str = ON_DEGENERATE_CENTER

    # HMM training
    max_iterations: int = 200
    tolerance: float = 1e-4
    variance_floor: float = 1e-6
    covariance: str = COVARIANCE_FULL

    # Baseline
    pca_components: int = 3
    neighbors: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"must be one of {', '.join(EXPERIMENT_KINDS)}", field="kind")
        if (self.dataset is None) == (self.generate is None):
            raise ConfigError("exactly one of 'dataset' or 'generate' must be set", field="dataset")
        if self.folds < 2:
            raise ConfigError("must be >= 2", field="folds")
        if not self.n_states or any(n < 2 for n in self.n_states):
            raise ConfigError("must be a non-empty list of integers >= 2", field="n_states")
        if not self.pooling:
            raise ConfigError("must be a non-empty list", field="pooling")
        for factor in self.pooling:
            try:
                parse_pool_factor(factor)
            except ValueError:
                raise ConfigError(f"invalid pooling factor '{factor}'", field="pooling") from None
        try:
            FeatureSet(self.feature_set)
        except ValueError:
            names = ", ".join(fs.value for fs in FeatureSet)
            raise ConfigError(f"must be one of {names}", field="feature_set") from None
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("must be >= 1", field="jobs")
        if self.trials_per_cell is not None and self.trials_per_cell < 1:
            raise ConfigError("must be >= 1", field="trials_per_cell")
        if not self.window > 0:
            raise ConfigError("must be positive", field="window")
        if self.connectivity not in (4, 8):
            raise ConfigError("must be 4 or 8", field="connectivity")
        if self.on_degenerate not in (ON_DEGENERATE_RAISE, ON_DEGENERATE_CENTER):
            raise ConfigError("must be 'raise' or 'center'", field="on_degenerate")
        if self.covariance not in (COVARIANCE_FULL, COVARIANCE_DIAG):
            raise ConfigError("must be 'full' or 'diag'", field="covariance")
        if not self.tolerance > 0:
            raise ConfigError("must be positive", field="tolerance")
        if self.pca_components < 1:
            raise ConfigError("must be >= 1", field="pca_components")
        if self.neighbors < 1:
            raise ConfigError("must be >= 1", field="neighbors")

    @property
    def feature_set_enum(self) -> FeatureSet:
        return FeatureSet(self.feature_set)

    @property
    def pool_factors(self) -> list:
        return [parse_pool_factor(factor) for factor in self.pooling]

    def output_path(self) -> Path:
        if self.output_dir is not None:
            return Path(self.output_dir)
        return HapticaPaths.get_data_dir() / "reports"

    def train_config(self, n_states: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            n_states=n_states if n_states is not None else self.n_states[0],
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            variance_floor=self.variance_floor,
            covariance=self.covariance,
        )

    @classmethod
    def load(cls, config_file: Path) -> "ExperimentConfig":
        return load_flat_config(Path(config_file), cls)

    def save(self, config_file: Path):
        with open(config_file, "w") as f:
            yaml.dump(self.to_dict(), f, default_flow_style=False, sort_keys=False)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _convert(value: Any, annotation: Any, name: str, line: Optional[int]) -> Any:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union and type(None) in args:
        if value is None:
            return None
        inner = next(arg for arg in args if arg is not type(None))
        return _convert(value, inner, name, line)
    if origin in (list, List):
        items = value if isinstance(value, list) else [value]
        return [_convert(item, args[0], name, line) for item in items]
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", field=name, line=line)
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=name, line=line)
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=name, line=line)
        return float(value)
    if annotation is str:
        if isinstance(value, (dict, list)):
            raise ConfigError(f"expected a scalar, got {value!r}", field=name, line=line)
        return str(value)
    return value


def load_flat_config(config_file: Path, cls: Type[ConfigT]) -> ConfigT:
    """Build a dataclass from a flat YAML mapping, reporting the line of any bad field."""
    try:
        text = config_file.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {config_file}: {e}") from None
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text) or {}
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark is not None else None
        raise ConfigError(f"invalid YAML: {e.problem}", line=line) from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of key: value pairs", line=1)

    lines = {}
    if isinstance(root, yaml.MappingNode):
        for key_node, _ in root.value:
            lines[key_node.value] = key_node.start_mark.line + 1

    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = str(key)
        if name not in known:
            raise ConfigError("unknown setting", field=name, line=lines.get(name))
        kwargs[name] = _convert(value, hints[name], name, lines.get(name))
    try:
        return cls(**kwargs)
    except ConfigError as e:
        if e.line is None and e.field in lines:
            raise ConfigError(e.message, field=e.field, line=lines[e.field]) from None
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
