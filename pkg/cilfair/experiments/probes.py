import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..analysis.coverage import neuron_coverage
from ..analysis.metrics import evaluate_step, pearson_correlation
from ..data.corruption import imbalance_subsample, mask_features
from ..data.dataset import LabeledDataset, random_exemplar_sample, split_benchmark
from ..phases import train_base, traditional_cil_step
from ..utils import ExperimentConfig, Stream, derive_seed, setup_logger
from ..utils.errors import ConfigError, UndefinedCorrelationError
from .reporting import write_csv, write_json
from .runner import HARD_SAMPLE, RunJob, RunTrace, load_benchmark, run_jobs, schedule_of

logger = setup_logger(__name__)

PROBES = ("imbalance", "memory", "mask", "coverage-bias", "distill", "hard-sample")
PROBE_HEADER = ("condition", "acc", "cwv", "mcd", "coverage")
RUNS_HEADER = ("condition", "seed", "acc", "cwv", "mcd", "coverage")


@dataclass(frozen=True)
class MaskTransform:
    ratio: float
    seed: int

    def __call__(self, step: int, ds: LabeledDataset) -> LabeledDataset:
        return mask_features(ds, self.ratio, derive_seed(self.seed, Stream.PROBE, step))


@dataclass(frozen=True)
class ImbalanceTransform:
    """Cut every class of each incremental step down to ``count`` training samples."""
    count: int
    seed: int

    def __call__(self, step: int, ds: LabeledDataset) -> LabeledDataset:
        if step == 0:
            return ds
        counts = {c: min(self.count, len(ds.indices_of_class(c))) for c in ds.class_set}
        return imbalance_subsample(ds, counts, derive_seed(self.seed, Stream.PROBE, step))


def validate_probe(kind: str, config: ExperimentConfig) -> None:
    if kind not in PROBES:
        raise ConfigError("probe", f"unknown probe {kind!r}, expected one of {', '.join(PROBES)}")
    schedule = config.schedule
    if schedule.steps < 2:
        raise ConfigError("schedule.steps", f"the {kind} probe needs at least 2 steps")
    old_classes = schedule.classes_per_step * (schedule.steps - 1)
    if kind == "memory" and min(config.probe.memory_sizes) < old_classes:
        raise ConfigError("probe.memory_sizes", f"every size must hold the {old_classes} old classes")
    if kind == "coverage-bias" and config.probe.coverage_capacity < schedule.classes_per_step:
        raise ConfigError("probe.coverage_capacity",
                          f"must hold the {schedule.classes_per_step} classes of the first step")


def _final_row(trace: RunTrace) -> Tuple[float, float, float, float]:
    final = trace.final
    coverage = final.coverage.coverage if final.coverage is not None else float("nan")
    return final.accuracy, final.cwv, final.mcd, coverage


def coverage_bias_runs(config: ExperimentConfig, seed: int) -> List[Tuple]:
    """(repetition, seed, acc, cwv, mcd, coverage) of one seed's resampling runs."""
    cfg = config.train.with_seed(seed)
    train, test = load_benchmark(config.dataset, seed)
    train_steps, test_steps = split_benchmark(train, test, schedule_of(config))
    base_data, new_data = train_steps[:2]
    seen_test = test_steps[0].concat(test_steps[1])

    base = train_base(base_data, cfg, derive_seed(seed, 0))
    step_seed = derive_seed(seed, 1)
    rows = []
    for rep in range(config.probe.repetitions):
        memory = random_exemplar_sample(base_data, config.probe.coverage_capacity,
                                        derive_seed(seed, Stream.PROBE, rep))
        coverage = neuron_coverage(base, memory.dataset, cfg.coverage_config())
        m_new = traditional_cil_step(base, new_data, memory, cfg, step_seed)
        report = evaluate_step(m_new, seen_test, 2, coverage)
        rows.append((rep, seed, report.accuracy, report.cwv, report.mcd, coverage.coverage))
    return rows


def _coverage_bias_job(args: Tuple[ExperimentConfig, int]) -> List[Tuple]:
    return coverage_bias_runs(*args)


class ProbeRunner:
    def __init__(self, config: ExperimentConfig, out_dir: str, workers: int = 1):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers

    def conditions(self, kind: str) -> List[Tuple[str, Dict]]:
        probe = self.config.probe
        if kind == "mask":
            return [(format(a, "g"), {"mask_ratio": a}) for a in probe.mask_ratios]
        if kind == "memory":
            return [(str(c), {"capacity": c}) for c in probe.memory_sizes]
        if kind == "imbalance":
            return [(str(c), {"imbalance": c}) for c in probe.imbalance_counts]
        if kind == "distill":
            weight = self.config.train.distill_weight or 1.0
            return [("cross_entropy", {"distill_weight": 0.0}), ("distillation", {"distill_weight": weight})]
        if kind == "hard-sample":
            return [("traditional", {"method": "traditional"}), ("dropout_enforced", {"method": HARD_SAMPLE})]
        raise ConfigError("probe", f"{kind!r} has no condition list")

    def _job(self, seed: int, options: Dict) -> RunJob:
        transform = None
        if "mask_ratio" in options:
            transform = MaskTransform(options["mask_ratio"], seed)
        elif "imbalance" in options:
            transform = ImbalanceTransform(options["imbalance"], seed)
        overrides = (("distill_weight", options["distill_weight"]),) if "distill_weight" in options else ()
        return RunJob(self.config, options.get("method", "traditional"), seed,
                      train_overrides=overrides, capacity=options.get("capacity"), transform=transform)

    def process(self, kind: str) -> List[str]:
        validate_probe(kind, self.config)
        logger.info(f"Running {kind} probe over seeds {list(self.config.seeds)}")
        if kind == "coverage-bias":
            return self._coverage_bias()

        conditions = self.conditions(kind)
        jobs = [(label, self._job(seed, options)) for label, options in conditions for seed in self.config.seeds]
        traces = run_jobs([job for _, job in jobs], self.workers)

        runs, medians = [], []
        for label, _ in conditions:
            rows = [(job.seed,) + _final_row(trace) for (l, job), trace in zip(jobs, traces) if l == label]
            runs.extend((label,) + row for row in sorted(rows))
            medians.append((label,) + tuple(float(v) for v in np.median(np.array(rows)[:, 1:], axis=0)))

        paths = [os.path.join(self.out_dir, f"probe_{kind}.csv"), os.path.join(self.out_dir, f"probe_{kind}_runs.csv")]
        write_csv(paths[0], PROBE_HEADER, medians)
        write_csv(paths[1], RUNS_HEADER, runs)
        return paths

    def _coverage_bias(self) -> List[str]:
        args = [(self.config, seed) for seed in self.config.seeds]
        if self.workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                per_seed = list(pool.map(_coverage_bias_job, args))
        else:
            per_seed = [_coverage_bias_job(a) for a in args]
        rows = [row for seed_rows in per_seed for row in seed_rows]

        result = {"runs": len(rows), "pearson_r": None, "per_seed": {}}
        result["pearson_r"] = _correlation([r[5] for r in rows], [r[3] for r in rows])
        for seed, seed_rows in zip(self.config.seeds, per_seed):
            result["per_seed"][str(seed)] = _correlation([r[5] for r in seed_rows], [r[3] for r in seed_rows])
        if result["pearson_r"] is not None:
            logger.info(f"Coverage vs CWV: r={result['pearson_r']:.4f} over {len(rows)} runs")

        csv_path = os.path.join(self.out_dir, "probe_coverage-bias.csv")
        json_path = os.path.join(self.out_dir, "probe_coverage-bias.json")
        write_csv(csv_path, RUNS_HEADER, rows)
        write_json(json_path, result)
        return [csv_path, json_path]


def _correlation(xs: Sequence[float], ys: Sequence[float]):
    try:
        return pearson_correlation(xs, ys)
    except UndefinedCorrelationError:
        logger.warning("Correlation undefined: coverage or CWV did not vary")
        return None


def run_probe(kind: str, config: ExperimentConfig, out_dir: str, workers: int = 1) -> List[str]:
    return ProbeRunner(config, out_dir, workers).process(kind)
