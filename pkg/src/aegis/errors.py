"""Exception hierarchy shared by every platform module."""

from __future__ import annotations


class AegisError(Exception):
    """Base class for platform errors."""


class NotFoundError(AegisError):
    """A referenced entity (service, job, snapshot, user) does not exist."""


class ConflictError(AegisError):
    """Write refused because it would duplicate or overwrite existing state."""


class StateError(AegisError):
    """Operation not legal in the entity's current lifecycle state."""


class FormatError(AegisError):
    """Document could not be parsed at all; distinct from validation failure."""


class ConfigurationError(AegisError):
    """Platform or request configuration is unusable."""


class PermissionDeniedError(AegisError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class PassportInvalidError(AegisError):
    """Passport parsed but violates invariants; carries the full report."""

    def __init__(self, report):
        super().__init__(f"invalid passport: {len(report.violations)} violation(s)")
        self.report = report


class UnitConversionError(AegisError):
    def __init__(self, variable: str, message: str):
        super().__init__(f"{variable}: {message}")
        self.variable = variable


class MappingError(AegisError):
    """Required model inputs could not be produced from the case."""

    def __init__(self, missing):
        super().__init__(f"unmapped required inputs: {sorted(missing)}")
        self.missing = tuple(sorted(missing))


class DirectIdentifierError(AegisError):
    """Document carries a field flagged as a direct patient identifier."""

    def __init__(self, fields):
        super().__init__(f"direct identifier fields present: {sorted(fields)}")
        self.fields = tuple(sorted(fields))


class AdapterError(AegisError):
    """Model adapter unreachable, timed out, or returned garbage."""


class OutputSchemaError(AegisError):
    """Adapter response violates the service's declared output schema."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


class GateRefusal(AegisError):
    """A governance gate (quality, regulation, disclaimer) refused the step."""

    def __init__(self, gate: str, reasons):
        reasons = tuple(reasons)
        super().__init__(f"{gate}: " + "; ".join(reasons))
        self.gate = gate
        self.reasons = reasons


class AttributionError(AegisError):
    """Attribution aborted; partial results are discarded."""
