from dataclasses import dataclass
from typing import Dict, List, Optional

from ..analysis.coverage import CoverageReport, neuron_coverage, verified_sample
from ..data.dataset import ExemplarMemory, LabeledDataset, random_exemplar_sample
from ..nn.mlp import Mlp
from ..utils import Stream, TrainConfig, derive_seed, setup_logger
from ..utils.errors import ParameterError
from .cil_phase import expand_to, traditional_cil_step
from .refine_phase import DivergenceRecord, RefinedSplit, RefinePhase, random_select
from .repair_phase import ErrorSet, compute_error_set, selective_train

logger = setup_logger(__name__)


@dataclass(frozen=True)
class CiliateVariant:
    name: str = "ciliate"
    verify_sampling: bool = True
    divergence_selection: bool = True
    distillation: bool = True
    eta: Optional[float] = None


VARIANTS: Dict[str, CiliateVariant] = {
    "ciliate": CiliateVariant(),
    "ciliate-no-selection": CiliateVariant("ciliate-no-selection", divergence_selection=False),
    "ciliate-no-verification": CiliateVariant("ciliate-no-verification", verify_sampling=False),
    "ciliate-no-distillation": CiliateVariant("ciliate-no-distillation", distillation=False),
    "ciliate-pure-dropout": CiliateVariant("ciliate-pure-dropout", eta=1.0),
    "ciliate-pure-ordinary": CiliateVariant("ciliate-pure-ordinary", eta=0.0),
}


@dataclass(frozen=True)
class CiliateResult:
    model: Mlp
    incremental_model: Mlp
    memory: ExemplarMemory
    coverage: CoverageReport
    records: List[DivergenceRecord]
    split: RefinedSplit
    error_set: ErrorSet
    new_size: int

    def diagnostics(self) -> Dict:
        return {
            "coverage": self.coverage.to_dict(),
            "new_samples": self.new_size,
            "exemplars": len(self.memory),
            "split": self.split.summary(),
            "error_set": len(self.error_set),
        }


class CiliatePhase:
    def __init__(self, config: TrainConfig, variant: CiliateVariant = CiliateVariant()):
        self.config = config
        self.variant = variant

    def sample_memory(self, m_base: Mlp, pool: LabeledDataset, capacity: int, seed: int):
        cov_cfg = self.config.coverage_config()
        exemplar_seed = derive_seed(seed, Stream.EXEMPLAR)
        if self.variant.verify_sampling:
            return verified_sample(m_base, pool, capacity, cov_cfg, exemplar_seed)
        memory = random_exemplar_sample(pool, capacity, exemplar_seed)
        return memory, neuron_coverage(m_base, memory.dataset, cov_cfg)

    def process(self, m_base: Mlp, x_new: LabeledDataset, exemplar_pool: LabeledDataset,
                capacity: int, seed: Optional[int] = None) -> CiliateResult:
        cfg = self.config
        seed = cfg.seed if seed is None else seed
        eta = cfg.eta if self.variant.eta is None else self.variant.eta
        logger.info(f"Running {self.variant.name} step on {len(x_new)} new samples "
                    f"(pool {len(exemplar_pool)}, capacity {capacity})")

        memory, coverage = self.sample_memory(m_base, exemplar_pool, capacity, seed)
        logger.info(f"Exemplar coverage {coverage.coverage:.4f} after {coverage.attempts_used} attempt(s)")

        m_new = traditional_cil_step(m_base, x_new, memory, cfg, seed)
        x_t = x_new.concat(memory.dataset)

        records, split = RefinePhase(cfg).process(m_base, m_new, x_t, eta)
        if not self.variant.divergence_selection:
            split = random_select(x_t, eta, derive_seed(seed, Stream.RANDOM_SELECTION))

        if self.variant.distillation:
            error_set = compute_error_set(m_new, x_t)
        else:
            error_set = ErrorSet.everything(x_t)
        logger.info(f"Error set holds {len(error_set)} of {len(x_t)} samples")

        teacher = m_new if cfg.distill_teacher == "incremental" else m_base
        m_start = expand_to(m_base, m_new.num_classes, seed)
        m_c = selective_train(m_start, split.high, split.low, teacher, error_set, cfg, seed,
                              old_classes=m_base.num_classes)
        return CiliateResult(m_c, m_new, memory, coverage, records, split, error_set, len(x_new))


def ciliate_step(m_base: Mlp, x_new: LabeledDataset, exemplar_pool: LabeledDataset, cfg: TrainConfig,
                 capacity: int, seed: Optional[int] = None, variant: str = "ciliate") -> CiliateResult:
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}")
    return CiliatePhase(cfg, VARIANTS[variant]).process(m_base, x_new, exemplar_pool, capacity, seed)


def enforce_hard_samples(m_new: Mlp, m_base: Mlp, x_t: LabeledDataset, cfg: TrainConfig,
                         seed: Optional[int] = None) -> Mlp:
    """Continue training an incremental model with dropout on its hardest samples."""
    seed = cfg.seed if seed is None else seed
    _, split = RefinePhase(cfg).process(m_base, m_new, x_t)
    return selective_train(m_new, split.high, split.low, m_new, ErrorSet.everything(x_t), cfg, seed,
                           old_classes=m_base.num_classes)
