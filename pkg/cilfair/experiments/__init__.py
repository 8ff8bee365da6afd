from .runner import (HARD_SAMPLE, IncrementalRunner, RunJob, RunOptions, RunTrace, check_dataset,
                     load_benchmark, run_incremental, run_jobs)
from .reporting import CSV_HEADER, summarize, write_summary, write_trace
from .benchmark import BenchmarkRunner, run_benchmark
from .probes import PROBES, ProbeRunner, run_probe, validate_probe
from .sweeps import SWEEPS, SweepRunner, run_sweep, validate_sweep
from .ablation import ABLATION_METHODS, AblationRunner, run_ablation

__all__ = [
    'HARD_SAMPLE', 'IncrementalRunner', 'RunJob', 'RunOptions', 'RunTrace', 'check_dataset',
    'load_benchmark', 'run_incremental', 'run_jobs', 'CSV_HEADER', 'summarize', 'write_summary',
    'write_trace', 'BenchmarkRunner', 'run_benchmark', 'PROBES', 'ProbeRunner', 'run_probe',
    'validate_probe', 'SWEEPS', 'SweepRunner', 'run_sweep', 'validate_sweep', 'ABLATION_METHODS',
    'AblationRunner', 'run_ablation',
]
