"""Hyperparameter sweeps of the fairness-repairing method."""
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..data.dataset import IncrementalSchedule
from ..utils import ExperimentConfig, setup_logger
from ..utils.errors import ConfigError
from .reporting import step_averages, write_csv, write_json
from .runner import RunJob, RunTrace, run_jobs

logger = setup_logger(__name__)

SWEEPS = ("eta", "coverage-thresholds", "divergence-metric", "class-split")
SWEEP_HEADER = ("param", "value", "seed", "acc", "cwv", "mcd", "avg_acc", "avg_cwv", "avg_mcd")


@dataclass(frozen=True)
class GridPoint:
    value: str
    overrides: Tuple[Tuple[str, object], ...] = ()
    schedule: Optional[IncrementalSchedule] = None


def validate_sweep(param: str, config: ExperimentConfig) -> None:
    if param not in SWEEPS:
        raise ConfigError("sweep", f"unknown sweep {param!r}, expected one of {', '.join(SWEEPS)}")
    if param == "class-split":
        for cps in config.sweep.class_splits:
            steps = _class_split_steps(config, cps)
            if config.exemplar_capacity < cps * max(steps - 1, 1):
                raise ConfigError("sweep.class_splits",
                                  f"{cps} classes per step leave too many old classes for the exemplar capacity")


def _class_count(config: ExperimentConfig) -> int:
    s = config.schedule
    return s.steps * s.classes_per_step


def _class_split_steps(config: ExperimentConfig, classes_per_step: int) -> int:
    steps = _class_count(config) // classes_per_step
    if steps < 1:
        raise ConfigError("sweep.class_splits",
                          f"{classes_per_step} classes per step exceed the {_class_count(config)} scheduled classes")
    return steps


def grid(param: str, config: ExperimentConfig) -> List[GridPoint]:
    sweep = config.sweep
    if param == "eta":
        return [GridPoint(format(eta, "g"), (("eta", eta),)) for eta in sweep.eta_grid]
    if param == "coverage-thresholds":
        return [GridPoint(f"t={t:g};beta={b:g}", (("activation_threshold", t), ("coverage_threshold", b)))
                for t in sweep.activation_grid for b in sweep.coverage_grid]
    if param == "divergence-metric":
        return [GridPoint(metric, (("divergence", metric),)) for metric in sweep.divergence_metrics]
    # class-split: the same classes, cut into a different number of steps
    return [GridPoint(str(cps), schedule=IncrementalSchedule(_class_split_steps(config, cps), cps,
                                                             config.schedule.order_seed))
            for cps in sweep.class_splits]


def _row(param: str, value: str, trace: RunTrace) -> Tuple:
    final = trace.final
    averages = step_averages(trace, skip_first=len(trace.reports) > 1)
    # CSV column order: acc, precision, recall, cwv, mcd, coverage
    return (param, value, trace.seed, final.accuracy, final.cwv, final.mcd,
            float(averages[0]), float(averages[3]), float(averages[4]))


class SweepRunner:
    def __init__(self, config: ExperimentConfig, out_dir: str, workers: int = 1):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers

    def process(self, param: str, method: str = "ciliate") -> List[str]:
        validate_sweep(param, self.config)
        points = grid(param, self.config)
        logger.info(f"Sweeping {param} over {len(points)} points x {len(self.config.seeds)} seeds")

        jobs = [(point, RunJob(self.config, method, seed, train_overrides=point.overrides,
                               schedule=point.schedule))
                for point in points for seed in self.config.seeds]
        traces = run_jobs([job for _, job in jobs], self.workers)
        rows = [_row(param, point.value, trace) for (point, _), trace in zip(jobs, traces)]

        summary = []
        for point in points:
            mine = np.array([r[3:] for r in rows if r[1] == point.value], dtype=np.float64)
            summary.append({
                "value": point.value,
                "mean_acc": float(mine[:, 0].mean()),
                "mean_cwv": float(mine[:, 1].mean()),
                "mean_mcd": float(mine[:, 2].mean()),
                "mean_avg_acc": float(mine[:, 3].mean()),
                "mean_avg_cwv": float(mine[:, 4].mean()),
                "mean_avg_mcd": float(mine[:, 5].mean()),
            })
        # CWV 平均が最小のもの（同点はグリッド順）
        best = min(summary, key=lambda p: p["mean_avg_cwv"])
        logger.info(f"Best {param}: {best['value']} (mean CWV {best['mean_avg_cwv']:.5f})")

        csv_path = os.path.join(self.out_dir, f"sweep_{param}.csv")
        json_path = os.path.join(self.out_dir, f"sweep_{param}_best.json")
        write_csv(csv_path, SWEEP_HEADER, rows)
        write_json(json_path, {"param": param, "method": method, "best_value": best["value"],
                               "best": best, "points": summary})
        return [csv_path, json_path]


def run_sweep(param: str, config: ExperimentConfig, out_dir: str, workers: int = 1) -> List[str]:
    return SweepRunner(config, out_dir, workers).process(param)
