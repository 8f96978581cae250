"""
Error types raised across the minimax coding lab

Every failure the library can signal derives from MinimaxError so callers
(the CLI in particular) can map whole families of errors to exit codes.
"""


class MinimaxError(Exception):
    """Base class for all library errors"""


class DomainError(MinimaxError, ValueError):
    """A parameter lies outside its domain or a symbol outside the alphabet"""


class NumericalError(MinimaxError, ArithmeticError):
    """A numeric quantity is non-finite or a matrix is not positive definite"""


class ConfigurationError(MinimaxError, ValueError):
    """A spec or configuration is invalid or violates a construction's hypotheses"""


class EnumerationLimitError(MinimaxError):
    """Too many count classes to enumerate exactly"""

    def __init__(self, num_classes: int, limit: int):
        self.num_classes = num_classes
        self.limit = limit
        super().__init__(
            f"{num_classes} count classes exceed the enumeration guard of {limit}; "
            f"use Monte Carlo evaluation (expected_regret_mc) instead"
        )


class TiltingError(NumericalError):
    """The tilt normalizer psi is not finite on the configured beta box"""


class CoderError(MinimaxError):
    """Arithmetic coder or container failure"""


class TruncatedStreamError(CoderError):
    """The coded stream ended before all symbols were determined"""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Coded stream truncated while decoding symbol {index}")


class DigestMismatchError(CoderError):
    """The container was produced with a different strategy spec"""
