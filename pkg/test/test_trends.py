"""Directional trends on the default synthetic benchmark.

These train dozens of networks and are deselected by default; run them with ``pytest -m slow``.
"""
import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from cilfair.experiments import RunJob, run_jobs, run_probe
from cilfair.utils import ExperimentConfig

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_config():
    return ExperimentConfig.from_dict({"schema_version": 1})


def probe_medians(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [float(r["acc"]) for r in rows], [float(r["cwv"]) for r in rows]


def non_increasing(values):
    return all(a >= b for a, b in zip(values, values[1:]))


def test_repair_lowers_final_class_variance(default_config):
    seeds = default_config.seeds
    assert len(seeds) >= 7
    jobs = [RunJob(default_config, method, seed) for method in ("traditional", "ciliate") for seed in seeds]
    traces = run_jobs(jobs)
    traditional = [t.final for t in traces if t.method == "traditional"]
    ciliate = [t.final for t in traces if t.method == "ciliate"]

    assert np.median([r.cwv for r in ciliate]) < np.median([r.cwv for r in traditional])
    assert np.median([r.accuracy for r in ciliate]) >= np.median([r.accuracy for r in traditional]) - 0.02


def test_masking_hurts_accuracy_and_fairness(default_config, tmp_path):
    config = replace(default_config, seeds=(1, 2, 3, 4, 5),
                     probe=replace(default_config.probe, mask_ratios=(0.0, 0.1, 0.2)))
    run_probe("mask", config, str(tmp_path))
    acc, cwv = probe_medians(tmp_path / "probe_mask.csv")
    assert non_increasing(acc)
    assert non_increasing(cwv[::-1])


def test_larger_memory_helps(default_config, tmp_path):
    config = replace(default_config, seeds=(1, 2, 3, 4, 5))
    assert len(config.probe.memory_sizes) >= 4
    run_probe("memory", config, str(tmp_path))
    acc, cwv = probe_medians(tmp_path / "probe_memory.csv")
    assert non_increasing(acc[::-1])
    assert non_increasing(cwv)


def test_coverage_is_negatively_correlated_with_variance(default_config, tmp_path):
    config = replace(default_config, seeds=(1,))
    assert config.probe.repetitions >= 20
    run_probe("coverage-bias", config, str(tmp_path))
    with open(tmp_path / "probe_coverage-bias.json") as f:
        result = json.load(f)
    assert result["pearson_r"] is not None
    assert result["pearson_r"] < 0
