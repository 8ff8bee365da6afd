from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..data.dataset import ExemplarMemory, LabeledDataset
from ..nn.losses import cross_entropy, distillation_loss, softmax
from ..nn.mlp import Gradients, Mlp, backward, expand_output_layer, forward, sgd_step
from ..nn.optim import iterate_minibatches, learning_rate_at
from ..utils import Stream, TrainConfig, derive_seed, setup_logger
from ..utils.errors import ParameterError
from .base_phase import check_labels

logger = setup_logger(__name__)


def resolve_lambda(lam: Union[float, str], old_classes: int, total_classes: int) -> float:
    if lam == "auto":
        return old_classes / total_classes
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    return lam


def expand_to(m_base: Mlp, total_classes: int, seed: int) -> Mlp:
    """Expanded copy of the base model; the step seed fixes the new rows."""
    if total_classes == m_base.num_classes:
        return m_base.copy()
    return expand_output_layer(m_base, total_classes, derive_seed(seed, Stream.EXPAND))


@dataclass(frozen=True)
class CompositeLoss:
    loss: float
    new_loss: float
    memory_loss: float
    distill_loss: float
    gradients: Gradients


def cil_composite_loss(net: Mlp, x_new: np.ndarray, y_new: np.ndarray, x_mem: np.ndarray,
                       y_mem: np.ndarray, lam: float, ce_temperature: float = 1.0,
                       teacher_new: Optional[np.ndarray] = None,
                       teacher_mem: Optional[np.ndarray] = None,
                       distill_weight: float = 0.0, temperature: float = 2.0) -> CompositeLoss:
    """(1 - lam) * CE(new) + lam * CE(memory) [+ w * KD over both batches]."""
    logits_n, cache_n = forward(net, x_new)
    logits_s, cache_s = forward(net, x_mem)
    l_n, g_n = cross_entropy(logits_n, y_new, ce_temperature)
    l_s, g_s = cross_entropy(logits_s, y_mem, ce_temperature)
    grad_n = (1.0 - lam) * g_n
    grad_s = lam * g_s

    l_r = 0.0
    if distill_weight > 0:
        total = logits_n.shape[0] + logits_s.shape[0]
        if total:
            r_n, d_n = distillation_loss(logits_n, teacher_new, temperature)
            r_s, d_s = distillation_loss(logits_s, teacher_mem, temperature)
            # バッチごとの平均から和集合全体の平均に戻す
            w_n, w_s = logits_n.shape[0] / total, logits_s.shape[0] / total
            l_r = w_n * r_n + w_s * r_s
            grad_n = grad_n + distill_weight * w_n * d_n
            grad_s = grad_s + distill_weight * w_s * d_s

    grads = backward(net, cache_n, grad_n) + backward(net, cache_s, grad_s)
    loss = (1.0 - lam) * l_n + lam * l_s + distill_weight * l_r
    return CompositeLoss(loss, l_n, l_s, l_r, grads)


class TraditionalCilPhase:
    """Fine-tune an expanded base model on new data plus the exemplar memory."""

    def __init__(self, config: TrainConfig):
        self.config = config

    def process(self, m_base: Mlp, x_new: LabeledDataset, x_s: ExemplarMemory,
                seed: Optional[int] = None) -> Mlp:
        cfg = self.config
        seed = cfg.seed if seed is None else seed
        memory = x_s.dataset
        overlap = set(x_new.present_classes) & set(memory.present_classes)
        if overlap:
            raise ParameterError(f"new data and exemplar memory share classes {sorted(overlap)}")

        old_classes = m_base.num_classes
        total_classes = max((old_classes,) + tuple(c + 1 for c in x_new.class_set))
        check_labels(x_new, total_classes, "new data")
        check_labels(memory, old_classes, "exemplar memory")

        net = expand_to(m_base, total_classes, seed)
        lam = resolve_lambda(cfg.lam, old_classes, total_classes)
        logger.info(f"Traditional CIL: {len(x_new)} new + {len(memory)} exemplars, "
                    f"{old_classes} -> {total_classes} classes, lambda={lam:.4f}")

        teacher_new = teacher_mem = None
        if cfg.distill_weight > 0:
            teacher_new = softmax(m_base.logits(x_new.features), cfg.temperature) if len(x_new) else None
            teacher_mem = softmax(m_base.logits(memory.features), cfg.temperature) if len(memory) else None

        rng = np.random.default_rng(derive_seed(seed, Stream.SHUFFLE_CIL))
        for epoch in range(cfg.epochs_cil):
            lr = learning_rate_at(epoch, cfg.epochs_cil, cfg.learning_rate,
                                  cfg.lr_decay_milestones, cfg.lr_decay_factor)
            new_batches = list(iterate_minibatches(len(x_new), cfg.batch_size, rng))
            if not new_batches:
                new_batches = [np.zeros(0, dtype=np.int64)]
            # メモリは新データのバッチ数に合わせて分配
            mem_batches = np.array_split(rng.permutation(len(memory)), len(new_batches))
            losses = []
            for idx_n, idx_s in zip(new_batches, mem_batches):
                result = cil_composite_loss(
                    net, x_new.features[idx_n], x_new.labels[idx_n],
                    memory.features[idx_s], memory.labels[idx_s], lam, cfg.ce_temperature,
                    teacher_new[idx_n] if teacher_new is not None else None,
                    teacher_mem[idx_s] if teacher_mem is not None else None,
                    cfg.distill_weight, cfg.temperature)
                net = sgd_step(net, result.gradients, lr)
                losses.append(result.loss)
            logger.debug(f"[cil] epoch {epoch + 1}/{cfg.epochs_cil} lr={lr:.4g} loss={np.mean(losses):.6f}")
        return net


def traditional_cil_step(m_base: Mlp, x_new: LabeledDataset, x_s: ExemplarMemory, cfg: TrainConfig,
                         seed: Optional[int] = None) -> Mlp:
    return TraditionalCilPhase(cfg).process(m_base, x_new, x_s, seed)
