from .base_phase import BaseTrainingPhase, train_base
from .cil_phase import TraditionalCilPhase, cil_composite_loss, resolve_lambda, traditional_cil_step
from .refine_phase import (DivergenceRecord, RefinedSplit, RefinePhase, differential_analysis,
                           save_divergences, select_samples)
from .repair_phase import (ErrorSet, SelectiveTrainingPhase, compute_error_set, selective_train,
                           train_balanced)
from .ciliate_phase import (VARIANTS, CiliatePhase, CiliateResult, CiliateVariant, ciliate_step,
                            enforce_hard_samples)

__all__ = [
    'BaseTrainingPhase', 'train_base', 'TraditionalCilPhase', 'cil_composite_loss', 'resolve_lambda',
    'traditional_cil_step', 'DivergenceRecord', 'RefinedSplit', 'RefinePhase', 'differential_analysis',
    'save_divergences', 'select_samples', 'ErrorSet', 'SelectiveTrainingPhase', 'compute_error_set',
    'selective_train', 'train_balanced', 'VARIANTS', 'CiliatePhase', 'CiliateResult', 'CiliateVariant',
    'ciliate_step', 'enforce_hard_samples',
]
