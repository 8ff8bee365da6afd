"""Neuron coverage of hidden layers and coverage-verified exemplar sampling."""
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..data.dataset import ExemplarMemory, LabeledDataset, random_exemplar_sample
from ..nn.mlp import Mlp, forward
from ..utils.config import CoverageConfig
from ..utils.errors import ParameterError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class CoverageReport:
    coverage: float
    covered_neuron_count: int
    total_neuron_count: int
    attempts_used: int = 1
    passed: bool = False

    def to_dict(self) -> Dict:
        return asdict(self)


def _normalize(activations: np.ndarray, normalization: str) -> np.ndarray:
    """Min-max scale one layer's activations to [0, 1]; constant rows map to 0."""
    if normalization == "per_input":
        low = activations.min(axis=1, keepdims=True)
        high = activations.max(axis=1, keepdims=True)
    else:
        low = activations.min()
        high = activations.max()
    span = high - low
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (activations - low) / safe, 0.0)


def hidden_activations(net: Mlp, ds: LabeledDataset) -> List[np.ndarray]:
    _, cache = forward(net, ds.features)
    return cache.hidden_activations


def neuron_coverage(net: Mlp, ds: LabeledDataset, cfg: CoverageConfig) -> CoverageReport:
    # per_input ならデータ追加で被覆率は下がらない。per_batch は最大値が変わるので下がりうる
    if len(ds) == 0:
        raise ParameterError("neuron coverage needs a non-empty dataset")
    cfg.validate()
    covered = 0
    total = 0
    for layer in hidden_activations(net, ds):
        above = _normalize(layer, cfg.normalization) > cfg.activation_threshold
        if cfg.quantifier == "existential":
            covered += int(np.count_nonzero(above.any(axis=0)))
        else:
            covered += int(np.count_nonzero(above.all(axis=0)))
        total += layer.shape[1]
    coverage = covered / total
    return CoverageReport(coverage, covered, total, 1, _passes(coverage, cfg.coverage_threshold))


def _passes(coverage: float, beta: float) -> bool:
    # beta=0 なら被覆率 0 でも合格
    return beta == 0.0 or coverage > beta


def verified_sample(net_base: Mlp, old_pool: LabeledDataset, capacity: int, cfg: CoverageConfig,
                    seed: int) -> Tuple[ExemplarMemory, CoverageReport]:
    """Resample the exemplar memory until the base model's coverage on it exceeds beta."""
    best = None
    for attempt in range(cfg.max_resample_attempts):
        memory = random_exemplar_sample(old_pool, capacity, seed + attempt)
        report = neuron_coverage(net_base, memory.dataset, cfg)
        logger.debug(f"Sampling attempt {attempt + 1}: coverage {report.coverage:.4f}")
        if report.passed:
            return memory, CoverageReport(report.coverage, report.covered_neuron_count,
                                          report.total_neuron_count, attempt + 1, True)
        if best is None or report.coverage > best[1].coverage:
            best = (memory, report)

    memory, report = best
    logger.info(f"Coverage threshold {cfg.coverage_threshold} not reached after "
                f"{cfg.max_resample_attempts} attempts; keeping best coverage {report.coverage:.4f}")
    return memory, CoverageReport(report.coverage, report.covered_neuron_count,
                                  report.total_neuron_count, cfg.max_resample_attempts, False)
