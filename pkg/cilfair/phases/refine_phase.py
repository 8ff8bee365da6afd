import csv
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..analysis.divergence import DivergenceMetric, rowwise_divergence
from ..data.dataset import LabeledDataset
from ..nn.losses import softmax
from ..nn.mlp import Mlp
from ..utils import TrainConfig, setup_logger
from ..utils.errors import ContractViolation, ParameterError, RejectedInputError

logger = setup_logger(__name__)


@dataclass(frozen=True)
class DivergenceRecord:
    sample_id: int
    divergence: float

    def __post_init__(self):
        if not np.isfinite(self.divergence) or self.divergence < 0:
            raise ContractViolation(f"divergence of sample {self.sample_id} is {self.divergence}")


@dataclass(frozen=True)
class RefinedSplit:
    high: LabeledDataset
    low: LabeledDataset
    cutoff_index: int
    eta: float

    def summary(self) -> Dict:
        return {"high": len(self.high), "low": len(self.low),
                "cutoff_index": self.cutoff_index, "eta": self.eta}


def cutoff_index(eta: float, n: int) -> int:
    """floor(eta * n), computed on the decimal value of eta."""
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    return int(Fraction(str(eta)) * n)


def output_distributions(m_base: Mlp, m_new: Mlp, features: np.ndarray,
                         temperature: float) -> Tuple[np.ndarray, np.ndarray]:
    k = m_base.num_classes
    if m_new.num_classes < k:
        raise RejectedInputError(f"new model knows {m_new.num_classes} classes, base model {k}")
    p = softmax(m_base.logits(features), temperature)
    q = softmax(m_new.logits(features)[:, :k], temperature)
    return p, q


def differential_analysis(m_base: Mlp, m_new: Mlp, ds: LabeledDataset,
                          metric: Union[DivergenceMetric, str] = DivergenceMetric.JENSEN_SHANNON,
                          temperature: float = 2.0) -> List[DivergenceRecord]:
    if len(ds) == 0:
        raise ParameterError("differential analysis needs a non-empty dataset")
    p, q = output_distributions(m_base, m_new, ds.features, temperature)
    scores = rowwise_divergence(p, q, DivergenceMetric(metric))
    return [DivergenceRecord(int(i), float(s)) for i, s in zip(ds.ids, scores)]


def _ranked_ids(records: Sequence[DivergenceRecord], ds: LabeledDataset) -> List[int]:
    ids = [r.sample_id for r in records]
    if len(ids) != len(ds) or set(ids) != set(ds.ids.tolist()):
        raise ContractViolation(
            f"{len(records)} divergence records do not cover the {len(ds)} samples exactly")
    ranked = sorted(records, key=lambda r: (-r.divergence, r.sample_id))
    return [r.sample_id for r in ranked]


def select_samples(records: Sequence[DivergenceRecord], ds: LabeledDataset, eta: float) -> RefinedSplit:
    """Largest divergences (ties by ascending id) up to the cutoff go to ``high``."""
    ranked = _ranked_ids(records, ds)
    cut = cutoff_index(eta, len(ranked))
    high_ids = set(ranked[:cut])
    in_high = np.isin(ds.ids, np.fromiter(high_ids, dtype=np.int64, count=len(high_ids)))
    return RefinedSplit(ds.subset(np.flatnonzero(in_high)), ds.subset(np.flatnonzero(~in_high)), cut, eta)


def random_select(ds: LabeledDataset, eta: float, seed: int) -> RefinedSplit:
    """Same-size split as ``select_samples`` with the hard set drawn at random."""
    cut = cutoff_index(eta, len(ds))
    chosen = np.random.default_rng(seed).choice(len(ds), size=cut, replace=False)
    in_high = np.zeros(len(ds), dtype=bool)
    in_high[chosen] = True
    return RefinedSplit(ds.subset(np.flatnonzero(in_high)), ds.subset(np.flatnonzero(~in_high)), cut, eta)


def save_divergences(records: Sequence[DivergenceRecord], path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(["sample_id", "divergence"])
        for r in records:
            writer.writerow([r.sample_id, repr(r.divergence)])
    logger.info(f"Divergences written to: {path}")


class RefinePhase:
    def __init__(self, config: TrainConfig):
        self.config = config

    def process(self, m_base: Mlp, m_new: Mlp, x_t: LabeledDataset,
                eta: Optional[float] = None) -> Tuple[List[DivergenceRecord], RefinedSplit]:
        eta = self.config.eta if eta is None else eta
        records = differential_analysis(m_base, m_new, x_t, self.config.divergence, self.config.temperature)
        split = select_samples(records, x_t, eta)
        logger.info(f"Refined {len(x_t)} samples with {self.config.divergence}: "
                    f"{len(split.high)} hard, {len(split.low)} ordinary (eta={eta})")
        return records, split
