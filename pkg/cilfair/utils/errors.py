from typing import Optional


class CilFairError(Exception):
    """Base class for every error raised by cilfair."""


class ParameterError(CilFairError, ValueError):
    pass


class RejectedInputError(CilFairError, ValueError):
    pass


class ContractViolation(CilFairError, RuntimeError):
    pass


class NumericalError(CilFairError, ArithmeticError):
    pass


class UndefinedCorrelationError(ParameterError):
    pass


class ParseError(CilFairError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        location = ""
        if path:
            location = f"{path}:"
        if line is not None:
            location = f"{location}{line}: "
        elif location:
            location = f"{location} "
        super().__init__(f"{location}{message}")


class ConfigError(CilFairError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
