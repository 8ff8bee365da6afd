import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import load_dotenv

from .errors import ConfigError

SCHEMA_VERSION = 1

METHODS = (
    "traditional",
    "ciliate",
    "joint",
    "ciliate-no-selection",
    "ciliate-no-verification",
    "ciliate-no-distillation",
    "ciliate-pure-dropout",
    "ciliate-pure-ordinary",
)
QUANTIFIERS = ("existential", "universal")
NORMALIZATIONS = ("per_input", "per_batch")
DIVERGENCES = ("jensen_shannon", "kullback_leibler", "hellinger")
LOSS_ASSIGNMENTS = ("prose", "printed")
DISTILL_TEACHERS = ("incremental", "base")


@dataclass(frozen=True)
class Settings:
    log_dir: str
    log_level: str
    jobs: int
    output_dir: str

    @classmethod
    def from_env(cls, env_file: Optional[str] = None) -> 'Settings':
        if env_file:
            load_dotenv(env_file)
        else:
            load_dotenv()

        jobs = os.getenv('CILFAIR_JOBS', '1')
        try:
            jobs_value = int(jobs)
        except ValueError:
            raise ConfigError("CILFAIR_JOBS", f"expected an integer, got {jobs!r}")

        return cls(
            log_dir=os.getenv('CILFAIR_LOG_DIR', 'logs'),
            log_level=os.getenv('CILFAIR_LOG_LEVEL', 'INFO'),
            jobs=jobs_value,
            output_dir=os.getenv('CILFAIR_OUTPUT_DIR', 'output'),
        )

    def validate(self) -> None:
        if self.jobs < 1:
            raise ConfigError("CILFAIR_JOBS", "must be at least 1")
        if not isinstance(logging.getLevelName(self.log_level.upper()), int):
            raise ConfigError("CILFAIR_LOG_LEVEL", f"unknown log level {self.log_level!r}")


def _check_unit(prefix: str, name: str, value: float, upper_open: bool = False) -> None:
    if upper_open:
        if not 0.0 <= value < 1.0:
            raise ConfigError(f"{prefix}{name}", f"must be in [0, 1), got {value}")
    elif not 0.0 <= value <= 1.0:
        raise ConfigError(f"{prefix}{name}", f"must be in [0, 1], got {value}")


def _check_choice(prefix: str, name: str, value: str, choices: Tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigError(f"{prefix}{name}", f"must be one of {', '.join(choices)}; got {value!r}")


def _build(cls, data: Any, prefix: str, renames: Optional[Mapping[str, str]] = None):
    """Instantiate a frozen config dataclass from a JSON mapping; unknown keys are rejected."""
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(prefix.rstrip(".") or "config", "expected a JSON object")
    renames = dict(renames or {})
    known = {f.name: f for f in fields(cls)}
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        name = renames.get(key, key)
        if name not in known:
            raise ConfigError(f"{prefix}{key}", "unknown field")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(prefix.rstrip(".") or "config", str(e))


@dataclass(frozen=True)
class CoverageConfig:
    activation_threshold: float = 0.99
    coverage_threshold: float = 0.95
    quantifier: str = "existential"
    max_resample_attempts: int = 20
    normalization: str = "per_input"

    def validate(self, prefix: str = "coverage.") -> None:
        _check_unit(prefix, "activation_threshold", self.activation_threshold)
        _check_unit(prefix, "coverage_threshold", self.coverage_threshold)
        _check_choice(prefix, "quantifier", self.quantifier, QUANTIFIERS)
        _check_choice(prefix, "normalization", self.normalization, NORMALIZATIONS)
        if int(self.max_resample_attempts) < 1:
            raise ConfigError(f"{prefix}max_resample_attempts", "must be at least 1")


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: Tuple[int, ...] = (64, 64)
    epochs_base: int = 60
    epochs_cil: int = 40
    epochs_dropout_phase: int = 20
    epochs_ordinary_phase: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1
    lr_decay_milestones: Tuple[float, ...] = (0.4, 0.6, 0.8)
    lr_decay_factor: float = 0.1
    lam: Union[float, str] = "auto"
    temperature: float = 2.0
    ce_temperature: float = 1.0
    dropout_rate: float = 0.5
    eta: float = 0.01
    activation_threshold: float = 0.99
    coverage_threshold: float = 0.95
    quantifier: str = "existential"
    normalization: str = "per_input"
    max_resample_attempts: int = 20
    gamma: float = 0.0
    divergence: str = "jensen_shannon"
    distill_teacher: str = "incremental"
    loss_assignment: str = "prose"
    distill_weight: float = 0.0
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Any, prefix: str = "train.") -> 'TrainConfig':
        cfg = _build(cls, data, prefix, renames={"lambda": "lam"})
        cfg.validate(prefix)
        return cfg

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        return data

    def validate(self, prefix: str = "train.") -> None:
        if not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes):
            raise ConfigError(f"{prefix}hidden_sizes", "needs at least one positive layer width")
        for name in ("epochs_base", "epochs_cil", "epochs_dropout_phase", "epochs_ordinary_phase"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{prefix}{name}", "must be non-negative")
        if int(self.batch_size) < 1:
            raise ConfigError(f"{prefix}batch_size", "must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError(f"{prefix}learning_rate", "must be positive")
        for m in self.lr_decay_milestones:
            if not 0.0 <= m <= 1.0:
                raise ConfigError(f"{prefix}lr_decay_milestones", "fractions must be in [0, 1]")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ConfigError(f"{prefix}lr_decay_factor", "must be in (0, 1]")
        if isinstance(self.lam, str):
            if self.lam != "auto":
                raise ConfigError(f"{prefix}lambda", "must be a number in [0, 1] or \"auto\"")
        else:
            _check_unit(prefix, "lambda", float(self.lam))
        if self.temperature <= 0:
            raise ConfigError(f"{prefix}temperature", "must be positive")
        if self.ce_temperature <= 0:
            raise ConfigError(f"{prefix}ce_temperature", "must be positive")
        _check_unit(prefix, "dropout_rate", self.dropout_rate, upper_open=True)
        _check_unit(prefix, "eta", self.eta)
        if self.distill_weight < 0:
            raise ConfigError(f"{prefix}distill_weight", "must be non-negative")
        _check_choice(prefix, "divergence", self.divergence, DIVERGENCES)
        _check_choice(prefix, "distill_teacher", self.distill_teacher, DISTILL_TEACHERS)
        _check_choice(prefix, "loss_assignment", self.loss_assignment, LOSS_ASSIGNMENTS)
        self.coverage_config().validate(prefix)

    def coverage_config(self) -> CoverageConfig:
        return CoverageConfig(
            activation_threshold=self.activation_threshold,
            coverage_threshold=self.coverage_threshold,
            quantifier=self.quantifier,
            max_resample_attempts=self.max_resample_attempts,
            normalization=self.normalization,
        )

    def with_seed(self, seed: int) -> 'TrainConfig':
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "synthetic"
    classes: int = 20
    train_per_class: int = 100
    test_per_class: int = 30
    feature_dim: int = 16
    cluster_spread: float = 1.0
    center_scale: float = 3.0
    seed: Optional[int] = 0
    train_path: Optional[str] = None
    test_path: Optional[str] = None

    def validate(self, prefix: str = "dataset.") -> None:
        _check_choice(prefix, "kind", self.kind, ("synthetic", "csv"))
        if self.kind == "csv":
            if not self.train_path or not self.test_path:
                raise ConfigError(f"{prefix}train_path", "csv datasets need train_path and test_path")
            return
        for name in ("classes", "train_per_class", "test_per_class", "feature_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{prefix}{name}", "must be positive")
        if self.cluster_spread < 0:
            raise ConfigError(f"{prefix}cluster_spread", "must be non-negative")


@dataclass(frozen=True)
class ScheduleSpec:
    steps: int = 5
    classes_per_step: int = 4
    order_seed: int = 0

    def validate(self, total_classes: Optional[int] = None, prefix: str = "schedule.") -> None:
        if int(self.steps) < 1:
            raise ConfigError(f"{prefix}steps", "must be at least 1")
        if int(self.classes_per_step) < 1:
            raise ConfigError(f"{prefix}classes_per_step", "must be at least 1")
        if total_classes is not None and self.steps * self.classes_per_step > total_classes:
            raise ConfigError(
                f"{prefix}steps",
                f"steps x classes_per_step ({self.steps * self.classes_per_step}) "
                f"exceeds the class count ({total_classes})",
            )


@dataclass(frozen=True)
class ProbeSpec:
    mask_ratios: Tuple[float, ...] = (0.0, 0.1, 0.2)
    memory_sizes: Tuple[int, ...] = (50, 100, 200, 400)
    imbalance_counts: Tuple[int, ...] = (100, 50, 20)
    repetitions: int = 20
    coverage_capacity: int = 20

    def validate(self, prefix: str = "probe.") -> None:
        for a in self.mask_ratios:
            _check_unit(prefix, "mask_ratios", a)
        if any(int(m) < 1 for m in self.memory_sizes):
            raise ConfigError(f"{prefix}memory_sizes", "sizes must be positive")
        if any(int(c) < 0 for c in self.imbalance_counts):
            raise ConfigError(f"{prefix}imbalance_counts", "counts must be non-negative")
        if int(self.repetitions) < 2:
            raise ConfigError(f"{prefix}repetitions", "needs at least 2 runs for a correlation")
        if int(self.coverage_capacity) < 1:
            raise ConfigError(f"{prefix}coverage_capacity", "must be positive")


@dataclass(frozen=True)
class SweepSpec:
    eta_grid: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7)
    activation_grid: Tuple[float, ...] = (0.5, 0.7, 0.9, 0.99)
    coverage_grid: Tuple[float, ...] = (0.9, 0.95, 0.99)
    divergence_metrics: Tuple[str, ...] = DIVERGENCES
    class_splits: Tuple[int, ...] = (20, 5, 2)

    def validate(self, prefix: str = "sweep.") -> None:
        for value in self.eta_grid:
            _check_unit(prefix, "eta_grid", value)
        for value in self.activation_grid:
            _check_unit(prefix, "activation_grid", value)
        for value in self.coverage_grid:
            _check_unit(prefix, "coverage_grid", value)
        for metric in self.divergence_metrics:
            _check_choice(prefix, "divergence_metrics", metric, DIVERGENCES)
        if any(int(c) < 1 for c in self.class_splits):
            raise ConfigError(f"{prefix}class_splits", "classes per step must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    exemplar_capacity: int = 80
    methods: Tuple[str, ...] = ("traditional", "ciliate")
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7)
    output_dir: Optional[str] = None
    probe: ProbeSpec = field(default_factory=ProbeSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_file(cls, path: str) -> 'ExperimentConfig':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON at line {e.lineno}: {e.msg}")
        config = cls.from_dict(data)
        # データセットのパスは設定ファイルからの相対パス
        base = os.path.dirname(os.path.abspath(path))
        dataset = config.dataset
        resolved = {name: os.path.join(base, getattr(dataset, name))
                    for name in ("train_path", "test_path")
                    if getattr(dataset, name) and not os.path.isabs(getattr(dataset, name))}
        if resolved:
            config = replace(config, dataset=replace(dataset, **resolved))
        return config

    @classmethod
    def from_dict(cls, data: Any) -> 'ExperimentConfig':
        if not isinstance(data, Mapping):
            raise ConfigError("config", "expected a JSON object")
        allowed = {"schema_version", "dataset", "schedule", "train", "exemplar_capacity",
                   "methods", "seeds", "output_dir", "probe", "sweep"}
        for key in data:
            if key not in allowed:
                raise ConfigError(key, "unknown field")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")

        config = cls(
            dataset=_build(DatasetSpec, data.get("dataset"), "dataset."),
            schedule=_build(ScheduleSpec, data.get("schedule"), "schedule."),
            train=_build(TrainConfig, data.get("train"), "train.", renames={"lambda": "lam"}),
            exemplar_capacity=data.get("exemplar_capacity", 80),
            methods=tuple(data.get("methods", ("traditional", "ciliate"))),
            seeds=tuple(data.get("seeds", (1, 2, 3, 4, 5, 6, 7))),
            output_dir=data.get("output_dir"),
            probe=_build(ProbeSpec, data.get("probe"), "probe."),
            sweep=_build(SweepSpec, data.get("sweep"), "sweep."),
        )
        config.validate()
        return config

    def validate(self) -> None:
        self.dataset.validate()
        total = self.dataset.classes if self.dataset.kind == "synthetic" else None
        self.schedule.validate(total)
        self.train.validate()
        self.probe.validate()
        self.sweep.validate()
        if isinstance(self.exemplar_capacity, bool) or not isinstance(self.exemplar_capacity, int):
            raise ConfigError("exemplar_capacity", "must be an integer")
        if self.exemplar_capacity < self.schedule.classes_per_step * max(self.schedule.steps - 1, 1):
            raise ConfigError(
                "exemplar_capacity",
                "must hold at least one sample for every old class",
            )
        if not self.methods:
            raise ConfigError("methods", "at least one method is required")
        for method in self.methods:
            _check_choice("", "methods", method, METHODS)
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if any(isinstance(s, bool) or not isinstance(s, int) for s in self.seeds):
            raise ConfigError("seeds", "seeds must be integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "seeds must be unique")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "dataset": asdict(self.dataset),
            "schedule": asdict(self.schedule),
            "train": self.train.to_dict(),
            "exemplar_capacity": self.exemplar_capacity,
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "probe": asdict(self.probe),
            "sweep": asdict(self.sweep),
        }
