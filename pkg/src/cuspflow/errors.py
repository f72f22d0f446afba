"""Exception types shared across the package."""

from __future__ import annotations


class CuspflowError(Exception):
    """Base class for all package-specific errors."""


class ModelSyntaxError(CuspflowError):
    """Malformed model file. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DeltaTooSmall(CuspflowError):
    """delta must exceed (1/2) log q for the excursion tails to be summable."""


class UnknownVertex(CuspflowError):
    pass


class DuplicateRay(CuspflowError):
    pass


class UnknownEdge(CuspflowError):
    pass


class UnknownState(CuspflowError):
    pass


class NotIrreducible(CuspflowError):
    pass


class UnsupportedMode(CuspflowError):
    """Operation not defined for this compact-block mode."""


class SingularCompactBlock(CuspflowError):
    """The compact part has no invertible (I - Q); sojourns do not terminate."""


class InadmissiblePath(CuspflowError):
    pass


class EmptySamples(CuspflowError):
    pass


class InvalidModel(CuspflowError):
    """Raised when an operation requires a model that passes validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.rule} at {v.where}: {v.detail}" for v in self.violations)
        super().__init__(f"model failed validation: {lines}")
