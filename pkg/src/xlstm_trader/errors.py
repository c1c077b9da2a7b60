"""Exception hierarchy shared across the package."""


class XlstmTraderError(Exception):
    """Base class for all package errors."""


class DimensionError(XlstmTraderError, ValueError):
    """Operand shapes do not conform."""


class ContractError(XlstmTraderError, ValueError):
    """A documented precondition was violated by the caller."""


class DomainError(XlstmTraderError, ValueError):
    """Input lies outside the domain of an operation."""


class NonFiniteError(XlstmTraderError, FloatingPointError):
    """A NaN or Inf value would have been stored in a tensor."""


class ParseError(XlstmTraderError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(XlstmTraderError, ValueError):
    """Market data violates an invariant (ordering, price bounds, alignment)."""


class TrainingError(XlstmTraderError, RuntimeError):
    """Training hit a non-recoverable numerical failure.

    ``dump`` carries a JSON-serialisable snapshot of the offending batch.
    """

    def __init__(self, message: str, dump: dict | None = None):
        super().__init__(message)
        self.dump = dump or {}


class CheckpointError(XlstmTraderError, ValueError):
    """Checkpoint file is malformed or incompatible with the model."""
