from typing import Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax as _softmax, xlogy

from ..utils.errors import ContractViolation, ParameterError, RejectedInputError


def _check_temperature(temperature: float) -> None:
    if not temperature > 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax over the last axis (scipy subtracts the max first)."""
    _check_temperature(temperature)
    return _softmax(np.asarray(logits, dtype=np.float64) / temperature, axis=-1)


def _check_labels(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise RejectedInputError(f"labels of shape {labels.shape} do not match logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise RejectedInputError(f"labels must lie in [0, {logits.shape[1]})")
    return labels


def cross_entropy_terms(logits: np.ndarray, labels: np.ndarray,
                        temperature: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample cross-entropy and its per-sample (unaveraged) gradient."""
    _check_temperature(temperature)
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(logits, labels)
    rows = np.arange(labels.shape[0])
    log_p = log_softmax(logits / temperature, axis=1)
    losses = -log_p[rows, labels]
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    return losses, grad / temperature


def cross_entropy(logits: np.ndarray, labels: np.ndarray,
                  temperature: float = 1.0) -> Tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[0] == 0:
        return 0.0, np.zeros_like(logits)
    losses, grad = cross_entropy_terms(logits, labels, temperature)
    n = logits.shape[0]
    return float(losses.mean()), grad / n


def distillation_terms(student_logits: np.ndarray, teacher_probs: np.ndarray,
                       temperature: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample T^2 * KL(teacher || softened student) over the teacher's classes."""
    _check_temperature(temperature)
    student_logits = np.asarray(student_logits, dtype=np.float64)
    teacher_probs = np.asarray(teacher_probs, dtype=np.float64)
    if (student_logits.ndim != 2 or teacher_probs.ndim != 2
            or teacher_probs.shape[0] != student_logits.shape[0]
            or teacher_probs.shape[1] > student_logits.shape[1]):
        raise RejectedInputError(
            f"teacher probabilities {teacher_probs.shape} do not fit student logits {student_logits.shape}")
    k = teacher_probs.shape[1]
    log_q = log_softmax(student_logits[:, :k] / temperature, axis=1)
    t2 = temperature * temperature
    losses = t2 * (xlogy(teacher_probs, teacher_probs) - teacher_probs * log_q).sum(axis=1)
    grad = np.zeros_like(student_logits)
    # teacher rows sum to one, so d/dz of -sum p log q is (q - p) / T
    grad[:, :k] = temperature * (np.exp(log_q) - teacher_probs)
    return losses, grad


def distillation_loss(student_logits: np.ndarray, teacher_probs: np.ndarray,
                      temperature: float) -> Tuple[float, np.ndarray]:
    student_logits = np.asarray(student_logits, dtype=np.float64)
    if student_logits.shape[0] == 0:
        return 0.0, np.zeros_like(student_logits)
    losses, grad = distillation_terms(student_logits, teacher_probs, temperature)
    n = student_logits.shape[0]
    return float(losses.mean()), grad / n


def balanced_distillation_loss(student_logits: np.ndarray, labels: np.ndarray,
                               teacher_probs: Optional[np.ndarray], in_error: np.ndarray,
                               lam: float, temperature: float, ce_temperature: float = 1.0,
                               assignment: str = "prose") -> Tuple[float, np.ndarray]:
    """Error-set samples get cross-entropy, the rest lam * distillation (``printed`` swaps them)."""
    student_logits = np.asarray(student_logits, dtype=np.float64)
    in_error = np.asarray(in_error, dtype=bool)
    if in_error.shape != (student_logits.shape[0],):
        raise RejectedInputError("error mask must have one entry per batch row")
    if assignment == "prose":
        ce_rows, kd_rows = in_error, ~in_error
    elif assignment == "printed":
        ce_rows, kd_rows = ~in_error, in_error
    else:
        raise ParameterError(f"unknown loss assignment {assignment!r}")

    grad = np.zeros_like(student_logits)
    loss = 0.0
    n_ce = int(ce_rows.sum())
    if n_ce:
        losses, g = cross_entropy_terms(student_logits[ce_rows], np.asarray(labels)[ce_rows], ce_temperature)
        loss += float(losses.mean())
        grad[ce_rows] = g / n_ce
    n_kd = int(kd_rows.sum())
    if n_kd:
        if teacher_probs is None:
            raise ContractViolation("teacher probabilities are required for distilled samples")
        targets = np.asarray(teacher_probs, dtype=np.float64)[kd_rows]
        if not np.all(np.isfinite(targets)):
            raise ContractViolation("missing teacher probabilities for distilled samples")
        losses, g = distillation_terms(student_logits[kd_rows], targets, temperature)
        loss += lam * float(losses.mean())
        grad[kd_rows] = lam * g / n_kd
    return loss, grad
