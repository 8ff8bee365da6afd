"""Result files: per-run step CSVs, run traces and the aggregated summary."""
import csv
import json
import math
import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from ..analysis.metrics import CSV_HEADER
from ..utils import setup_logger
from .runner import RunTrace

logger = setup_logger(__name__)

METRICS = CSV_HEADER[1:]


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_value(v) for v in row])
    logger.info(f"Results written to: {path}")


def write_json(path: str, document) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_finite(document), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Summary written to: {path}")


def _finite(value):
    """JSON has no NaN; undefined statistics are written as null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def trace_csv_path(out_dir: str, method: str, seed: int) -> str:
    return os.path.join(out_dir, f"{method}_seed{seed}.csv")


def write_trace(out_dir: str, trace: RunTrace) -> None:
    write_csv(trace_csv_path(out_dir, trace.method, trace.seed), CSV_HEADER,
              (report.csv_row() for report in trace.reports))
    write_json(os.path.join(out_dir, "traces", f"{trace.method}_seed{trace.seed}.json"), trace.to_dict())


def metric_rows(trace: RunTrace) -> np.ndarray:
    """Steps x metrics matrix in CSV column order."""
    return np.array([report.csv_row()[1:] for report in trace.reports], dtype=np.float64)


def _stats(values: np.ndarray) -> Dict[str, Dict[str, float]]:
    # values: seeds x metrics
    return {
        "mean": {m: float(v) for m, v in zip(METRICS, values.mean(axis=0))},
        "median": {m: float(v) for m, v in zip(METRICS, np.median(values, axis=0))},
    }


def step_averages(trace: RunTrace, skip_first: bool) -> Optional[np.ndarray]:
    rows = metric_rows(trace)
    if skip_first:
        rows = rows[1:]
    if rows.shape[0] == 0:
        return None
    return rows.mean(axis=0)


def summarize_method(traces: Sequence[RunTrace]) -> Dict:
    traces = sorted(traces, key=lambda t: t.seed)
    stacked = np.stack([metric_rows(t) for t in traces])  # seeds x steps x metrics
    steps = [dict(step=k + 1, **_stats(stacked[:, k, :])) for k in range(stacked.shape[1])]
    summary = {
        "seeds": [t.seed for t in traces],
        "steps": steps,
        "average_all_steps": _stats(np.stack([step_averages(t, False) for t in traces])),
        "average_except_first": None,
        "fairness_bugs": {str(t.seed): sum(r.fairness_bug for r in t.reports) for t in traces},
    }
    if stacked.shape[1] > 1:
        summary["average_except_first"] = _stats(np.stack([step_averages(t, True) for t in traces]))
    return summary


def summarize(traces: Sequence[RunTrace], methods: Sequence[str]) -> Dict:
    grouped: Dict[str, List[RunTrace]] = {m: [] for m in methods}
    for trace in traces:
        grouped.setdefault(trace.method, []).append(trace)
    return {
        "schema_version": 1,
        "metrics": list(METRICS),
        "methods": {m: summarize_method(ts) for m, ts in grouped.items() if ts},
    }


def write_summary(out_dir: str, traces: Sequence[RunTrace], methods: Sequence[str]) -> str:
    path = os.path.join(out_dir, "summary.json")
    write_json(path, summarize(traces, methods))
    return path
