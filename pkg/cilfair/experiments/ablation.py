import os
from typing import List, Sequence

import numpy as np

from ..phases import VARIANTS
from ..utils import ExperimentConfig, setup_logger
from .reporting import METRICS, step_averages, write_csv, write_trace
from .runner import RunJob, run_jobs

logger = setup_logger(__name__)

ABLATION_METHODS = ("traditional",) + tuple(VARIANTS)
ABLATION_HEADER = ("method", "last_acc", "last_cwv", "last_mcd", "avg_acc", "avg_cwv", "avg_mcd",
                   "avg_all_acc", "avg_all_cwv", "avg_all_mcd")

_ACC, _CWV, _MCD = (METRICS.index(m) for m in ("acc", "cwv", "mcd"))


def _pick(values: np.ndarray) -> List[float]:
    return [float(values[_ACC]), float(values[_CWV]), float(values[_MCD])]


class AblationRunner:
    """Every variant of the repair method side by side, averaged over seeds."""

    def __init__(self, config: ExperimentConfig, out_dir: str, workers: int = 1):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers

    def process(self, methods: Sequence[str] = ABLATION_METHODS) -> List[str]:
        jobs = [RunJob(self.config, method, seed) for method in methods for seed in self.config.seeds]
        logger.info(f"Ablation over {len(methods)} methods x {len(self.config.seeds)} seeds")
        traces = run_jobs(jobs, self.workers)

        rows = []
        for method in methods:
            mine = [t for t in traces if t.method == method]
            for trace in mine:
                write_trace(os.path.join(self.out_dir, "runs"), trace)
            last = np.mean([t.final.csv_row()[1:] for t in mine], axis=0)
            average_all = np.mean([step_averages(t, False) for t in mine], axis=0)
            if len(mine[0].reports) > 1:
                average = np.mean([step_averages(t, True) for t in mine], axis=0)
            else:
                average = average_all
            rows.append([method] + _pick(last) + _pick(average) + _pick(average_all))

        path = os.path.join(self.out_dir, "ablation.csv")
        write_csv(path, ABLATION_HEADER, rows)
        return [path]


def run_ablation(config: ExperimentConfig, out_dir: str, workers: int = 1) -> List[str]:
    return AblationRunner(config, out_dir, workers).process()
