import os
from typing import List

from ..utils import ExperimentConfig, setup_logger
from .reporting import write_summary, write_trace
from .runner import RunJob, RunOptions, run_jobs

logger = setup_logger(__name__)


class BenchmarkRunner:
    """Every configured (method, seed) run, one CSV each, then the summary."""

    def __init__(self, config: ExperimentConfig, out_dir: str, workers: int = 1,
                 save_models: bool = False, export_divergences: bool = False):
        self.config = config
        self.out_dir = out_dir
        self.workers = workers
        self.options = RunOptions(
            save_models_dir=os.path.join(out_dir, "models") if save_models else None,
            divergences_dir=os.path.join(out_dir, "divergences") if export_divergences else None,
        )

    def process(self) -> List[str]:
        jobs = [RunJob(self.config, method, seed, options=self.options)
                for method in self.config.methods for seed in sorted(self.config.seeds)]
        logger.info(f"Running {len(jobs)} runs with {self.workers} worker(s)")
        traces = run_jobs(jobs, self.workers)
        for trace in traces:
            write_trace(self.out_dir, trace)
        # 最後にジョブ順で書き出す
        return [write_summary(self.out_dir, traces, self.config.methods)]


def run_benchmark(config: ExperimentConfig, out_dir: str, workers: int = 1, save_models: bool = False,
                  export_divergences: bool = False) -> List[str]:
    return BenchmarkRunner(config, out_dir, workers, save_models, export_divergences).process()
