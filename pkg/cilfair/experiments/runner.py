"""Multi-step incremental runs and the parallel (method, seed) driver."""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..analysis.coverage import CoverageReport, neuron_coverage
from ..analysis.metrics import StepReport, evaluate_step
from ..data.csv_io import load_csv
from ..data.dataset import (IncrementalSchedule, LabeledDataset, random_exemplar_sample,
                            split_benchmark, split_train_test, synth_generate)
from ..nn.checkpoint import save_checkpoint
from ..nn.mlp import Mlp
from ..phases import (VARIANTS, CiliatePhase, enforce_hard_samples, save_divergences, train_base,
                      traditional_cil_step)
from ..utils import ExperimentConfig, Stream, TrainConfig, derive_seed, setup_logger
from ..utils.config import DatasetSpec
from ..utils.errors import ConfigError, ParameterError

logger = setup_logger(__name__)

# hard-sample 分析専用: 従来 CIL の後、最難サンプルで dropout 学習を続ける
HARD_SAMPLE = "hard-sample"

# (step index starting at 0, training data of that step) -> training data actually used
StepTransform = Callable[[int, LabeledDataset], LabeledDataset]


@dataclass
class RunTrace:
    method: str
    seed: int
    reports: List[StepReport] = field(default_factory=list)
    coverages: List[Optional[CoverageReport]] = field(default_factory=list)
    # per incremental step, None where the method does no refinement
    splits: List[Optional[Dict]] = field(default_factory=list)
    error_sizes: List[Optional[int]] = field(default_factory=list)
    final_model: Optional[Mlp] = None

    @property
    def final(self) -> StepReport:
        return self.reports[-1]

    def to_dict(self) -> Dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "steps": [
                dict(report.to_dict(), split=split, error_set=error_size)
                for report, split, error_size in zip(self.reports, self.splits, self.error_sizes)
            ],
            "final_layer_sizes": list(self.final_model.layer_sizes) if self.final_model else None,
        }


@dataclass(frozen=True)
class RunOptions:
    save_models_dir: Optional[str] = None
    divergences_dir: Optional[str] = None


def load_benchmark(spec: DatasetSpec, seed: int) -> Tuple[LabeledDataset, LabeledDataset]:
    """Train and test sets; a synthetic spec without a seed follows the run seed."""
    if spec.kind == "csv":
        return load_csv(spec.train_path), load_csv(spec.test_path)
    data_seed = seed if spec.seed is None else spec.seed
    full = synth_generate(spec.classes, spec.train_per_class + spec.test_per_class, spec.feature_dim,
                          spec.cluster_spread, data_seed, spec.center_scale)
    return split_train_test(full, spec.test_per_class, derive_seed(data_seed, 0))


def _seen_test(test_steps: Sequence[LabeledDataset], k: int) -> LabeledDataset:
    seen = test_steps[0]
    for ds in test_steps[1:k + 1]:
        seen = seen.concat(ds)
    return seen


class IncrementalRunner:
    def __init__(self, config: TrainConfig, schedule: IncrementalSchedule, capacity: int,
                 options: RunOptions = RunOptions()):
        self.config = config
        self.schedule = schedule
        self.capacity = capacity
        self.options = options

    def _checkpoint(self, net: Mlp, method: str, step: int) -> None:
        if self.options.save_models_dir:
            path = os.path.join(self.options.save_models_dir,
                                f"{method}_seed{self.config.seed}_step{step}.bin")
            save_checkpoint(net, path)

    def process(self, train: LabeledDataset, test: LabeledDataset, method: str,
                transform: Optional[StepTransform] = None) -> RunTrace:
        cfg = self.config
        if method not in VARIANTS and method not in ("traditional", "joint", HARD_SAMPLE):
            raise ParameterError(f"unknown method {method!r}")
        train_steps, test_steps = split_benchmark(train, test, self.schedule)
        if transform is not None:
            train_steps = [transform(k, ds) for k, ds in enumerate(train_steps)]

        logger.info(f"Run {method} seed={cfg.seed}: {self.schedule.steps} steps x "
                    f"{self.schedule.classes_per_step} classes")
        trace = RunTrace(method, cfg.seed)
        cov_cfg = cfg.coverage_config()

        model = train_base(train_steps[0], cfg, derive_seed(cfg.seed, 0))
        coverage = neuron_coverage(model, train_steps[0], cov_cfg)
        report = evaluate_step(model, _seen_test(test_steps, 0), 1, coverage)
        self._record(trace, report, coverage, None, None)
        self._checkpoint(model, method, 1)
        pool = train_steps[0]
        seen_train = train_steps[0]

        for k in range(1, self.schedule.steps):
            step_seed = derive_seed(cfg.seed, k)
            x_new = train_steps[k]
            split = error_size = None
            seen_train = seen_train.concat(x_new)

            if method == "joint":
                model = train_base(seen_train, cfg, step_seed)
                coverage = neuron_coverage(model, seen_train, cov_cfg)
                memory_ds = seen_train
            elif method in ("traditional", HARD_SAMPLE):
                memory = random_exemplar_sample(pool, self.capacity, derive_seed(step_seed, Stream.EXEMPLAR))
                coverage = neuron_coverage(model, memory.dataset, cov_cfg)
                m_new = traditional_cil_step(model, x_new, memory, cfg, step_seed)
                if method == HARD_SAMPLE:
                    m_new = enforce_hard_samples(m_new, model, x_new.concat(memory.dataset), cfg, step_seed)
                model = m_new
                memory_ds = memory.dataset
            else:
                result = CiliatePhase(cfg, VARIANTS[method]).process(model, x_new, pool, self.capacity,
                                                                     step_seed)
                model = result.model
                coverage = result.coverage
                memory_ds = result.memory.dataset
                split = result.split.summary()
                error_size = len(result.error_set)
                if self.options.divergences_dir:
                    save_divergences(result.records, os.path.join(
                        self.options.divergences_dir, f"divergences_{method}_seed{cfg.seed}_step{k + 1}.csv"))

            previous = trace.reports[-1].cwv
            report = evaluate_step(model, _seen_test(test_steps, k), k + 1, coverage, previous, cfg.gamma)
            if report.fairness_bug:
                logger.info(f"Step {k + 1}: CWV rose from {previous:.5f} to {report.cwv:.5f}")
            self._record(trace, report, coverage, split, error_size)
            self._checkpoint(model, method, k + 1)
            pool = memory_ds.concat(x_new) if method != "joint" else seen_train

        trace.final_model = model
        logger.info(f"Run {method} seed={cfg.seed} finished: acc={trace.final.accuracy:.4f} "
                    f"cwv={trace.final.cwv:.5f}")
        return trace

    @staticmethod
    def _record(trace: RunTrace, report: StepReport, coverage, split, error_size) -> None:
        trace.reports.append(report)
        trace.coverages.append(coverage)
        trace.splits.append(split)
        trace.error_sizes.append(error_size)


def run_incremental(train: LabeledDataset, test: LabeledDataset, sched: IncrementalSchedule, method: str,
                    cfg: TrainConfig, capacity: int, options: RunOptions = RunOptions(),
                    transform: Optional[StepTransform] = None) -> RunTrace:
    return IncrementalRunner(cfg, sched, capacity, options).process(train, test, method, transform)


@dataclass(frozen=True)
class RunJob:
    """One (method, seed) run of an experiment; picklable for worker processes."""
    config: ExperimentConfig
    method: str
    seed: int
    train_overrides: Tuple[Tuple[str, object], ...] = ()
    schedule: Optional[IncrementalSchedule] = None
    capacity: Optional[int] = None
    options: RunOptions = RunOptions()
    transform: Optional[StepTransform] = None


def execute_job(job: RunJob) -> RunTrace:
    config = job.config
    cfg = config.train.with_seed(job.seed)
    if job.train_overrides:
        cfg = replace(cfg, **dict(job.train_overrides))
        cfg.validate()
    schedule = job.schedule or schedule_of(config)
    capacity = config.exemplar_capacity if job.capacity is None else job.capacity
    train, test = load_benchmark(config.dataset, job.seed)
    return run_incremental(train, test, schedule, job.method, cfg, capacity, job.options, job.transform)


def schedule_of(config: ExperimentConfig) -> IncrementalSchedule:
    s = config.schedule
    return IncrementalSchedule(s.steps, s.classes_per_step, s.order_seed)


def check_dataset(config: ExperimentConfig) -> None:
    """Validate the configured dataset against the schedule without running anything."""
    if config.dataset.kind != "csv":
        return
    loaded = []
    for name in ("train_path", "test_path"):
        try:
            loaded.append(load_csv(getattr(config.dataset, name)))
        except FileNotFoundError as e:
            raise ConfigError(f"dataset.{name}", str(e))
    train, test = loaded
    if train.feature_dim != test.feature_dim:
        raise ConfigError("dataset.test_path", "train and test feature dimensions differ")
    if set(train.class_set) != set(test.class_set):
        raise ConfigError("dataset.test_path", "train and test files hold different classes")
    config.schedule.validate(len(train.class_set))


def run_jobs(jobs: Sequence[RunJob], workers: int = 1) -> List[RunTrace]:
    """Run jobs, in worker processes when ``workers > 1``; results keep job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [execute_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute_job, jobs))
