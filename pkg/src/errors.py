"""Exceptions raised across the planning, simulation and VLM layers."""

from typing import Optional


class PlanningError(Exception):
    """Root of every error this package raises on purpose."""


class PDDLError(PlanningError):
    """Problem with PDDL text, optionally located at a line and column."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class PDDLSyntaxError(PDDLError):
    pass


class PDDLSemanticError(PDDLError):
    """Unknown type/predicate/object, arity mismatch, duplicate name or non-ground init."""


class UnsupportedRequirementError(PDDLSemanticError):
    pass


class PreconditionViolation(PlanningError):
    """An action was applied to a state where its precondition does not hold."""

    def __init__(self, action, failed):
        self.action = action
        self.failed = tuple(failed)
        super().__init__(f"precondition of {action} does not hold: {', '.join(str(f) for f in self.failed)}")


class UnsolvableError(PlanningError):
    pass


class ResourceLimitError(PlanningError):
    def __init__(self, message: str, expanded: int):
        self.expanded = expanded
        super().__init__(message)


class UnknownActionFamilyError(PlanningError):
    pass


class PerceptionContractError(PlanningError):
    """A non vision-class atom was passed to the simulated perceiver."""


class ConfigurationError(PlanningError):
    pass


class VLMError(PlanningError):
    pass


class VLMTransportError(VLMError):
    pass


class VLMAuthError(VLMError):
    pass


class MalformedResponseError(VLMError):
    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}: {raw!r}")
