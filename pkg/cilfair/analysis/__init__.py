from .coverage import CoverageReport, neuron_coverage, verified_sample
from .divergence import (DivergenceMetric, hellinger_distance, js_divergence, kl_divergence,
                         rowwise_divergence)
from .metrics import (CSV_HEADER, ClassAccuracies, StepReport, cwv, evaluate_step, fairness_bug,
                      macro_precision_recall, mcd, pearson_correlation, per_class_accuracy)

__all__ = [
    'CoverageReport', 'neuron_coverage', 'verified_sample', 'DivergenceMetric',
    'hellinger_distance', 'js_divergence', 'kl_divergence', 'rowwise_divergence', 'CSV_HEADER',
    'ClassAccuracies', 'StepReport', 'cwv', 'evaluate_step', 'fairness_bug',
    'macro_precision_recall', 'mcd', 'pearson_correlation', 'per_class_accuracy',
]
