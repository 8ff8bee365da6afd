from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import pearsonr

from ..data.dataset import LabeledDataset
from ..nn.mlp import Mlp
from ..utils.errors import ParameterError, RejectedInputError, UndefinedCorrelationError
from .coverage import CoverageReport

CSV_HEADER = ("step", "acc", "precision", "recall", "cwv", "mcd", "coverage")


@dataclass(frozen=True)
class ClassAccuracies:
    accuracies: Dict[int, float]
    counts: Dict[int, int]
    # classes of the test set's class set that had no test samples
    excluded: Tuple[int, ...] = ()

    def values(self) -> np.ndarray:
        return np.array([self.accuracies[c] for c in sorted(self.accuracies)], dtype=np.float64)


@dataclass(frozen=True)
class StepReport:
    step: int
    accuracy: float
    precision: float
    recall: float
    cwv: float
    mcd: float
    coverage: Optional[CoverageReport]
    class_accuracies: ClassAccuracies
    fairness_bug: bool = False

    def csv_row(self) -> Tuple:
        coverage = self.coverage.coverage if self.coverage is not None else float("nan")
        return (self.step, self.accuracy, self.precision, self.recall, self.cwv, self.mcd, coverage)

    def to_dict(self) -> Dict:
        return {
            "step": self.step,
            "acc": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "cwv": self.cwv,
            "mcd": self.mcd,
            "coverage": self.coverage.to_dict() if self.coverage is not None else None,
            "class_accuracies": {str(c): a for c, a in sorted(self.class_accuracies.accuracies.items())},
            "class_counts": {str(c): n for c, n in sorted(self.class_accuracies.counts.items())},
            "excluded_classes": list(self.class_accuracies.excluded),
            "fairness_bug": self.fairness_bug,
        }


def _predictions(net: Mlp, test: LabeledDataset) -> np.ndarray:
    if len(test) and test.labels.max() >= net.num_classes:
        raise RejectedInputError(
            f"test labels reach {int(test.labels.max())} but the model knows {net.num_classes} classes")
    if len(test) == 0:
        return np.zeros(0, dtype=np.int64)
    return net.predict(test.features)


def class_accuracies_from_predictions(labels: np.ndarray, predictions: np.ndarray,
                                      class_set: Sequence[int]) -> ClassAccuracies:
    accuracies, counts, excluded = {}, {}, []
    for c in class_set:
        members = labels == c
        total = int(members.sum())
        if total == 0:
            excluded.append(int(c))
            continue
        counts[int(c)] = total
        accuracies[int(c)] = float(np.count_nonzero(predictions[members] == c)) / total
    return ClassAccuracies(accuracies, counts, tuple(excluded))


def per_class_accuracy(net: Mlp, test: LabeledDataset) -> ClassAccuracies:
    return class_accuracies_from_predictions(test.labels, _predictions(net, test), test.class_set)


def overall_accuracy(net: Mlp, test: LabeledDataset) -> float:
    if len(test) == 0:
        raise ParameterError("accuracy needs a non-empty test set")
    return float(np.mean(_predictions(net, test) == test.labels))


def cwv(acc: ClassAccuracies) -> float:
    values = acc.values()
    if values.size == 0:
        raise ParameterError("CWV needs at least one class accuracy")
    return float(np.var(values))


def mcd(acc: ClassAccuracies) -> float:
    values = acc.values()
    if values.size == 0:
        raise ParameterError("MCD needs at least one class accuracy")
    return float(values.max() - values.min())


def _precision_recall(labels: np.ndarray, predictions: np.ndarray, classes: Sequence[int]) -> Tuple[float, float]:
    if not classes:
        raise ParameterError("precision and recall need a non-empty test set")
    precisions, recalls = [], []
    for c in classes:
        true_positive = np.count_nonzero((predictions == c) & (labels == c))
        predicted = np.count_nonzero(predictions == c)
        actual = np.count_nonzero(labels == c)
        precisions.append(true_positive / predicted if predicted else 0.0)
        recalls.append(true_positive / actual)
    return float(np.mean(precisions)), float(np.mean(recalls))


def macro_precision_recall(net: Mlp, test: LabeledDataset) -> Tuple[float, float]:
    """Unweighted means over the test classes; no predicted positives gives precision 0."""
    return _precision_recall(test.labels, _predictions(net, test), test.present_classes)


def fairness_bug(f_new: float, f_base: float, gamma: float) -> bool:
    return f_new - f_base > gamma


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ParameterError("correlation needs two equal-length sequences of at least 2 values")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    r, _ = pearsonr(xs, ys)
    return float(np.clip(r, -1.0, 1.0))


def evaluate_step(net: Mlp, test: LabeledDataset, step: int, coverage: Optional[CoverageReport] = None,
                  previous_cwv: Optional[float] = None, gamma: float = 0.0) -> StepReport:
    predictions = _predictions(net, test)
    acc = class_accuracies_from_predictions(test.labels, predictions, test.class_set)
    precision, recall = _precision_recall(test.labels, predictions, test.present_classes)
    step_cwv = cwv(acc)
    bug = previous_cwv is not None and fairness_bug(step_cwv, previous_cwv, gamma)
    return StepReport(
        step=step,
        accuracy=float(np.mean(predictions == test.labels)),
        precision=precision,
        recall=recall,
        cwv=step_cwv,
        mcd=mcd(acc),
        coverage=coverage,
        class_accuracies=acc,
        fairness_bug=bug,
    )
