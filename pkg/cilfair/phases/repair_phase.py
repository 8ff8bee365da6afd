from dataclasses import dataclass
from typing import FrozenSet, Optional

import numpy as np

from ..data.dataset import LabeledDataset
from ..nn.losses import balanced_distillation_loss, softmax
from ..nn.mlp import DropoutSpec, Mlp, backward, forward
from ..utils import Stream, TrainConfig, derive_seed, setup_logger
from ..utils.errors import ParameterError
from .base_phase import check_labels, run_epochs
from .cil_phase import resolve_lambda

logger = setup_logger(__name__)

__all__ = [
    'ErrorSet', 'compute_error_set', 'teacher_probabilities', 'train_balanced',
    'selective_train', 'SelectiveTrainingPhase', 'balanced_distillation_loss',
]


@dataclass(frozen=True)
class ErrorSet:
    ids: FrozenSet[int]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, sample_id: int) -> bool:
        return int(sample_id) in self.ids

    @classmethod
    def everything(cls, ds: LabeledDataset) -> 'ErrorSet':
        return cls(frozenset(ds.ids.tolist()))

    def mask_for(self, ds: LabeledDataset) -> np.ndarray:
        return np.isin(ds.ids, np.fromiter(self.ids, dtype=np.int64, count=len(self.ids)))


def compute_error_set(m_new: Mlp, x_t: LabeledDataset) -> ErrorSet:
    """Ids of the samples the model misclassifies."""
    if len(x_t) == 0:
        return ErrorSet(frozenset())
    check_labels(x_t, m_new.num_classes)
    wrong = m_new.predict(x_t.features) != x_t.labels
    return ErrorSet(frozenset(x_t.ids[wrong].tolist()))


def teacher_probabilities(teacher: Mlp, ds: LabeledDataset, temperature: float) -> np.ndarray:
    if len(ds) == 0:
        return np.zeros((0, teacher.num_classes))
    return softmax(teacher.logits(ds.features), temperature)


def train_balanced(net: Mlp, ds: LabeledDataset, teacher_probs: np.ndarray, in_error: np.ndarray,
                   cfg: TrainConfig, lam: float, epochs: int, shuffle_seed: int,
                   mask_seed: Optional[int] = None, name: str = "ordinary") -> Mlp:
    """Balanced-distillation SGD over ``ds``; dropout is on when ``mask_seed`` is given."""
    features, labels = ds.features, ds.labels

    def step(current: Mlp, idx: np.ndarray, epoch: int, batch_no: int):
        dropout = None
        if mask_seed is not None:
            dropout = DropoutSpec(cfg.dropout_rate, derive_seed(mask_seed, epoch, batch_no))
        logits, cache = forward(current, features[idx], dropout)
        loss, grad = balanced_distillation_loss(
            logits, labels[idx], teacher_probs[idx], in_error[idx], lam,
            cfg.temperature, cfg.ce_temperature, cfg.loss_assignment)
        return loss, backward(current, cache, grad)

    return run_epochs(net, len(ds), epochs, cfg, shuffle_seed, step, name)


class SelectiveTrainingPhase:
    """Dropout training on the hard samples, then ordinary training on the rest."""

    def __init__(self, config: TrainConfig):
        self.config = config

    def process(self, m_start: Mlp, x_h: LabeledDataset, x_l: LabeledDataset, teacher: Mlp,
                error_set: ErrorSet, seed: Optional[int] = None, old_classes: Optional[int] = None) -> Mlp:
        cfg = self.config
        seed = cfg.seed if seed is None else seed
        if np.intersect1d(x_h.ids, x_l.ids).size:
            raise ParameterError("hard and ordinary sample sets overlap")
        if cfg.lam == "auto" and old_classes is None:
            raise ParameterError("lambda='auto' needs the number of old classes")
        lam = resolve_lambda(cfg.lam, old_classes or 0, m_start.num_classes)

        logger.info(f"Selective training: {len(x_h)} samples with dropout {cfg.dropout_rate} "
                    f"for {cfg.epochs_dropout_phase} epochs, {len(x_l)} ordinary samples "
                    f"for {cfg.epochs_ordinary_phase} epochs")
        net = m_start.copy()
        if len(x_h):
            net = train_balanced(
                net, x_h, teacher_probabilities(teacher, x_h, cfg.temperature), error_set.mask_for(x_h),
                cfg, lam, cfg.epochs_dropout_phase, derive_seed(seed, Stream.SHUFFLE_DROPOUT),
                mask_seed=derive_seed(seed, Stream.DROPOUT_MASK), name="dropout")
        if len(x_l):
            net = train_balanced(
                net, x_l, teacher_probabilities(teacher, x_l, cfg.temperature), error_set.mask_for(x_l),
                cfg, lam, cfg.epochs_ordinary_phase, derive_seed(seed, Stream.SHUFFLE_ORDINARY))
        return net


def selective_train(m_start: Mlp, x_h: LabeledDataset, x_l: LabeledDataset, teacher: Mlp,
                    error_set: ErrorSet, cfg: TrainConfig, seed: Optional[int] = None,
                    old_classes: Optional[int] = None) -> Mlp:
    return SelectiveTrainingPhase(cfg).process(m_start, x_h, x_l, teacher, error_set, seed, old_classes)
