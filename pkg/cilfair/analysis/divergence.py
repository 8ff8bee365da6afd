# rowwise_* は検証済みの分布行列を前提とする
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import rel_entr

from ..utils.errors import ParameterError

DISTRIBUTION_TOLERANCE = 1e-6
KL_EPSILON = 1e-12


class DivergenceMetric(str, Enum):
    JENSEN_SHANNON = "jensen_shannon"
    KULLBACK_LEIBLER = "kullback_leibler"
    HELLINGER = "hellinger"


def _check_pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or p.shape != q.shape or p.size == 0:
        raise ParameterError(f"distributions must be non-empty vectors of equal length, got {p.shape} and {q.shape}")
    for name, v in (("P", p), ("Q", q)):
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ParameterError(f"{name} must have finite non-negative entries")
        if abs(v.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
            raise ParameterError(f"{name} sums to {v.sum()}, not 1")
    return p, q


def _smooth(v: np.ndarray, epsilon: float) -> np.ndarray:
    v = v + epsilon
    return v / v.sum(axis=-1, keepdims=True)


def rowwise_js(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m = 0.5 * (p + q)
    js = 0.5 * rel_entr(p, m).sum(axis=-1) + 0.5 * rel_entr(q, m).sum(axis=-1)
    return np.clip(js, 0.0, np.log(2.0))


def rowwise_kl(p: np.ndarray, q: np.ndarray, epsilon: Optional[float] = KL_EPSILON) -> np.ndarray:
    violation = np.any((p > 0) & (q <= 0), axis=-1, keepdims=True)
    if violation.any():
        if epsilon is None:
            raise ParameterError("Q has zero mass where P does not; KL is undefined without smoothing")
        q = np.where(violation, _smooth(q, epsilon), q)
        p = np.where(violation, _smooth(p, epsilon), p)
    return np.maximum(rel_entr(p, q).sum(axis=-1), 0.0)


def rowwise_hellinger(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    h = np.sqrt(0.5 * ((np.sqrt(p) - np.sqrt(q)) ** 2).sum(axis=-1))
    return np.clip(h, 0.0, 1.0)


def js_divergence(p, q) -> float:
    p, q = _check_pair(p, q)
    return float(rowwise_js(p, q))


def kl_divergence(p, q, epsilon: Optional[float] = None) -> float:
    """KL(P || Q); with ``epsilon`` set, support violations are smoothed instead of rejected."""
    p, q = _check_pair(p, q)
    return float(rowwise_kl(p, q, epsilon))


def hellinger_distance(p, q) -> float:
    p, q = _check_pair(p, q)
    return float(rowwise_hellinger(p, q))


def rowwise_divergence(p: np.ndarray, q: np.ndarray, metric: DivergenceMetric) -> np.ndarray:
    metric = DivergenceMetric(metric)
    if metric is DivergenceMetric.JENSEN_SHANNON:
        return rowwise_js(p, q)
    if metric is DivergenceMetric.KULLBACK_LEIBLER:
        return rowwise_kl(p, q, KL_EPSILON)
    return rowwise_hellinger(p, q)
