from .logger import configure_logging, setup_logger
from .config import (CoverageConfig, ExperimentConfig, Settings, TrainConfig)
from .errors import (CilFairError, ConfigError, ContractViolation, NumericalError, ParameterError,
                     ParseError, RejectedInputError, UndefinedCorrelationError)
from .seeding import Stream, derive_seed, make_rng

__all__ = [
    'setup_logger', 'configure_logging', 'CoverageConfig', 'ExperimentConfig', 'Settings', 'TrainConfig',
    'CilFairError', 'ConfigError', 'ContractViolation', 'NumericalError', 'ParameterError',
    'ParseError', 'RejectedInputError', 'UndefinedCorrelationError', 'Stream', 'derive_seed',
    'make_rng',
]
