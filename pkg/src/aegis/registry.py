"""Model-service registry: versioned passports with dynamic evaluation history.

A passport is the regulatory statement for a registered prediction service:
purpose, schemas, training data descriptor, declared limitations,
certification references, and a growing list of evaluation snapshot
references. Passports are parsed strictly from a published JSON document
format; unknown fields are rejected because silent field loss in a
regulatory statement is unacceptable.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from .audit import AuditAction, AuditTrail
from .errors import ConflictError, NotFoundError, PassportInvalidError

INTENDED_CONTEXTS = ("inpatient", "outpatient", "primary_care", "academic")
VALUE_TYPES = ("numeric", "categorical", "boolean", "datetime")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    value_type: str
    unit: str | None = None
    valid_range: tuple[float, float] | None = None
    categories: tuple[str, ...] | None = None
    required: bool = True

    def to_document(self) -> dict:
        doc: dict[str, Any] = {
            "name": self.name,
            "value_type": self.value_type,
            "required": self.required,
        }
        if self.unit is not None:
            doc["unit"] = self.unit
        if self.valid_range is not None:
            doc["valid_range"] = list(self.valid_range)
        if self.categories is not None:
            doc["categories"] = list(self.categories)
        return doc


@dataclass(frozen=True)
class TrainingDescriptor:
    dataset_name: str
    collection_period: tuple[str, str]
    population: str
    demographic_attributes_present: frozenset[str]
    known_absent_attributes: frozenset[str]
    case_count: int
    # Optional evaluation details: per-feature medians feed the attribution
    # baseline; declared performance feeds the drift comparison.
    feature_medians: dict[str, float] | None = None
    declared_performance: dict[str, float] | None = None

    def to_document(self) -> dict:
        doc: dict[str, Any] = {
            "dataset_name": self.dataset_name,
            "collection_period": list(self.collection_period),
            "population": self.population,
            "demographic_attributes_present": sorted(self.demographic_attributes_present),
            "known_absent_attributes": sorted(self.known_absent_attributes),
            "case_count": self.case_count,
        }
        if self.feature_medians is not None:
            doc["feature_medians"] = dict(self.feature_medians)
        if self.declared_performance is not None:
            doc["declared_performance"] = dict(self.declared_performance)
        return doc


@dataclass(frozen=True)
class AiPassport:
    service_id: str
    version: int
    purpose: str
    intended_context: str
    ethical_declarations: tuple[str, ...]
    manufacturer: str
    training_descriptor: TrainingDescriptor
    input_schema: tuple[VariableSpec, ...]
    output_schema: tuple[VariableSpec, ...]
    declared_limitations: tuple[str, ...]
    certification_refs: tuple[str, ...]
    evaluation_history: tuple[str, ...]

    def to_document(self) -> dict:
        return {
            "service_id": self.service_id,
            "version": self.version,
            "purpose": self.purpose,
            "intended_context": self.intended_context,
            "ethical_declarations": list(self.ethical_declarations),
            "manufacturer": self.manufacturer,
            "training_descriptor": self.training_descriptor.to_document(),
            "input_schema": [spec.to_document() for spec in self.input_schema],
            "output_schema": [spec.to_document() for spec in self.output_schema],
            "declared_limitations": list(self.declared_limitations),
            "certification_refs": list(self.certification_refs),
            "evaluation_history": list(self.evaluation_history),
        }


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_document(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"path": v.path, "message": v.message} for v in self.violations
            ],
        }


_PASSPORT_FIELDS = {
    "service_id",
    "version",
    "purpose",
    "intended_context",
    "ethical_declarations",
    "manufacturer",
    "training_descriptor",
    "input_schema",
    "output_schema",
    "declared_limitations",
    "certification_refs",
    "evaluation_history",
}
_SPEC_FIELDS = {"name", "value_type", "unit", "valid_range", "categories", "required"}
_DESCRIPTOR_FIELDS = {
    "dataset_name",
    "collection_period",
    "population",
    "demographic_attributes_present",
    "known_absent_attributes",
    "case_count",
    "feature_medians",
    "declared_performance",
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class _Collector:
    def __init__(self):
        self.violations: list[Violation] = []

    def add(self, path: str, message: str) -> None:
        self.violations.append(Violation(path, message))

    def expect_str(self, doc: Mapping, key: str, path: str, allow_empty=False) -> str:
        value = doc.get(key)
        if not isinstance(value, str) or (not allow_empty and not value):
            self.add(f"{path}{key}", "must be a non-empty string")
            return ""
        return value

    def expect_str_list(self, doc: Mapping, key: str, path: str) -> tuple[str, ...]:
        value = doc.get(key)
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            self.add(f"{path}{key}", "must be a list of strings")
            return ()
        return tuple(value)


def _validate_variable_spec(raw: Any, path: str, out: _Collector, unit_known) -> VariableSpec | None:
    if not isinstance(raw, Mapping):
        out.add(path, "must be an object")
        return None
    for key in set(raw) - _SPEC_FIELDS:
        out.add(f"{path}.{key}", "unknown field")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        out.add(f"{path}.name", "must be a non-empty string")
        return None
    value_type = raw.get("value_type")
    if value_type not in VALUE_TYPES:
        out.add(f"{path}.value_type", f"must be one of {VALUE_TYPES}")
        return None
    unit = raw.get("unit")
    valid_range = raw.get("valid_range")
    categories = raw.get("categories")
    required = raw.get("required", True)
    if not isinstance(required, bool):
        out.add(f"{path}.required", "must be a boolean")
        required = True

    before = len(out.violations)
    if value_type == "numeric":
        if not isinstance(unit, str) or not unit:
            out.add(f"{path}.unit", "numeric variables must declare a unit")
        elif unit_known is not None and not unit_known(unit):
            out.add(f"{path}.unit", f"unit {unit!r} not in the unit table")
        if (
            not isinstance(valid_range, list)
            or len(valid_range) != 2
            or not all(_is_number(v) for v in valid_range)
        ):
            out.add(f"{path}.valid_range", "numeric variables must declare [low, high]")
            valid_range = None
        elif valid_range[0] > valid_range[1]:
            out.add(f"{path}.valid_range", "range low > high")
    else:
        if unit is not None:
            out.add(f"{path}.unit", "only numeric variables carry a unit")
        if valid_range is not None:
            out.add(f"{path}.valid_range", "only numeric variables carry a range")
    if value_type == "categorical":
        if not isinstance(categories, list) or not categories:
            out.add(f"{path}.categories", "categorical variables need a non-empty category list")
            categories = None
    elif categories is not None:
        out.add(f"{path}.categories", "only categorical variables carry categories")
        categories = None
    if len(out.violations) > before:
        return None
    return VariableSpec(
        name=name,
        value_type=value_type,
        unit=unit if value_type == "numeric" else None,
        valid_range=tuple(valid_range) if valid_range is not None else None,
        categories=tuple(categories) if categories is not None else None,
        required=required,
    )


def _validate_schema(raw: Any, field_name: str, out: _Collector, unit_known):
    if not isinstance(raw, list):
        out.add(field_name, "must be a list of variable specs")
        return ()
    specs = []
    seen: set[str] = set()
    for index, raw_spec in enumerate(raw):
        label = raw_spec.get("name") if isinstance(raw_spec, Mapping) else None
        path = f"{field_name}[{label or index}]"
        spec = _validate_variable_spec(raw_spec, path, out, unit_known)
        if spec is None:
            continue
        if spec.name in seen:
            out.add(path, "duplicate variable name")
            continue
        seen.add(spec.name)
        specs.append(spec)
    return tuple(specs)


def _validate_descriptor(raw: Any, out: _Collector) -> TrainingDescriptor | None:
    path = "training_descriptor"
    if not isinstance(raw, Mapping):
        out.add(path, "must be an object")
        return None
    for key in set(raw) - _DESCRIPTOR_FIELDS:
        out.add(f"{path}.{key}", "unknown field")
    before = len(out.violations)
    dataset_name = raw.get("dataset_name")
    if not isinstance(dataset_name, str) or not dataset_name:
        out.add(f"{path}.dataset_name", "must be a non-empty string")
    period = raw.get("collection_period")
    if (
        not isinstance(period, list)
        or len(period) != 2
        or any(not isinstance(v, str) for v in period)
    ):
        out.add(f"{path}.collection_period", "must be [start_date, end_date]")
        period = ["", ""]
    elif period[0] > period[1]:
        out.add(f"{path}.collection_period", "start after end")
    population = raw.get("population")
    if not isinstance(population, str):
        out.add(f"{path}.population", "must be a string")
    present = raw.get("demographic_attributes_present", [])
    absent = raw.get("known_absent_attributes", [])
    for key, value in (("demographic_attributes_present", present), ("known_absent_attributes", absent)):
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            out.add(f"{path}.{key}", "must be a list of strings")
    if isinstance(present, list) and isinstance(absent, list):
        overlap = set(present) & set(absent)
        if overlap:
            out.add(
                f"{path}.known_absent_attributes",
                f"attributes both present and absent: {sorted(overlap)}",
            )
    case_count = raw.get("case_count")
    if not isinstance(case_count, int) or isinstance(case_count, bool) or case_count < 0:
        out.add(f"{path}.case_count", "must be a non-negative integer")
    medians = raw.get("feature_medians")
    if medians is not None and (
        not isinstance(medians, Mapping) or any(not _is_number(v) for v in medians.values())
    ):
        out.add(f"{path}.feature_medians", "must map variable names to numbers")
    performance = raw.get("declared_performance")
    if performance is not None and (
        not isinstance(performance, Mapping)
        or any(not _is_number(v) for v in performance.values())
    ):
        out.add(f"{path}.declared_performance", "must map metric names to numbers")
    if len(out.violations) > before:
        return None
    return TrainingDescriptor(
        dataset_name=dataset_name,
        collection_period=(period[0], period[1]),
        population=population,
        demographic_attributes_present=frozenset(present),
        known_absent_attributes=frozenset(absent),
        case_count=case_count,
        feature_medians=dict(medians) if medians is not None else None,
        declared_performance=dict(performance) if performance is not None else None,
    )


def parse_variable_specs(
    raw: Any, unit_known: Callable[[str], bool] | None = None
) -> tuple[VariableSpec, ...]:
    """Parse a standalone schema document (a list of variable specs)."""
    out = _Collector()
    specs = _validate_schema(raw, "schema", out, unit_known)
    report = ValidationReport(tuple(out.violations))
    if not report.ok:
        raise PassportInvalidError(report)
    return specs


def validate_passport(document: Any, unit_known: Callable[[str], bool] | None = None) -> ValidationReport:
    """Check a parsed passport document against every invariant.

    Pure: identical documents yield identical reports. The report lists all
    violations with field paths; an empty list means the document is valid.
    """
    _, report = _parse(document, unit_known)
    return report


def parse_passport(document: Any, unit_known: Callable[[str], bool] | None = None) -> AiPassport:
    passport, report = _parse(document, unit_known)
    if passport is None or not report.ok:
        raise PassportInvalidError(report)
    return passport


def _parse(document: Any, unit_known) -> tuple[AiPassport | None, ValidationReport]:
    out = _Collector()
    if not isinstance(document, Mapping):
        out.add("", "document must be an object")
        return None, ValidationReport(tuple(out.violations))
    for key in set(document) - _PASSPORT_FIELDS:
        out.add(key, "unknown field")
    service_id = out.expect_str(document, "service_id", "")
    version = document.get("version")
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        out.add("version", "must be an integer >= 1")
        version = 1
    purpose = out.expect_str(document, "purpose", "")
    intended_context = document.get("intended_context")
    if intended_context not in INTENDED_CONTEXTS:
        out.add("intended_context", f"must be one of {INTENDED_CONTEXTS}")
    ethical = out.expect_str_list(document, "ethical_declarations", "")
    manufacturer = out.expect_str(document, "manufacturer", "")
    descriptor = _validate_descriptor(document.get("training_descriptor"), out)
    input_schema = _validate_schema(document.get("input_schema"), "input_schema", out, unit_known)
    output_schema = _validate_schema(document.get("output_schema"), "output_schema", out, unit_known)
    if isinstance(document.get("output_schema"), list) and not output_schema and not document["output_schema"]:
        out.add("output_schema", "must declare at least one output variable")
    limitations = out.expect_str_list(document, "declared_limitations", "")
    cert_refs = out.expect_str_list(document, "certification_refs", "")
    history = out.expect_str_list(document, "evaluation_history", "")

    report = ValidationReport(tuple(out.violations))
    if not report.ok or descriptor is None:
        return None, report
    passport = AiPassport(
        service_id=service_id,
        version=version,
        purpose=purpose,
        intended_context=intended_context,
        ethical_declarations=ethical,
        manufacturer=manufacturer,
        training_descriptor=descriptor,
        input_schema=input_schema,
        output_schema=output_schema,
        declared_limitations=limitations,
        certification_refs=cert_refs,
        evaluation_history=history,
    )
    return passport, report


@dataclass(frozen=True)
class MutationEvent:
    """Registry mutation log entry; replayed by the versioning property test."""

    service_id: str
    operation: str
    version: int
    detail: dict


class ServiceRegistry:
    """Versioned passport store. Single writer per service, many readers."""

    def __init__(self, audit: AuditTrail, unit_known: Callable[[str], bool] | None = None):
        self._audit = audit
        self._unit_known = unit_known
        self._passports: dict[str, dict[int, AiPassport]] = {}
        self._endpoints: dict[str, str] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._mutation_log: list[MutationEvent] = []
        # Set by the platform once monitor/usability exist.
        self.snapshot_exists: Callable[[str], bool] = lambda ref: False

    def _lock_for(self, service_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(service_id, threading.Lock())

    def validate(self, document: Any) -> ValidationReport:
        return validate_passport(document, self._unit_known)

    def register_service(self, document: Any, endpoint: str, *, user_id: str = "system") -> str:
        passport = parse_passport(document, self._unit_known)
        service_id = passport.service_id
        with self._lock_for(service_id):
            if service_id in self._passports:
                raise ConflictError(f"service {service_id!r} already registered")
            stored = replace(passport, version=1)
            self._passports[service_id] = {1: stored}
            self._endpoints[service_id] = endpoint
            self._mutation_log.append(
                MutationEvent(service_id, "register", 1, {"endpoint": endpoint})
            )
        self._audit.append(
            AuditAction.SERVICE_REGISTERED,
            user_id=user_id,
            service_id=service_id,
            passport_version=1,
            detail={"endpoint": endpoint, "purpose": passport.purpose},
        )
        return service_id

    def _mutate(self, service_id: str, operation: str, fn, detail: dict) -> AiPassport:
        with self._lock_for(service_id):
            versions = self._passports.get(service_id)
            if not versions:
                raise NotFoundError(f"service {service_id!r} not registered")
            current = versions[max(versions)]
            updated = fn(current)
            new_version = current.version + 1
            updated = replace(updated, version=new_version)
            versions[new_version] = updated
            self._mutation_log.append(
                MutationEvent(service_id, operation, new_version, detail)
            )
            return updated

    def append_evaluation(self, service_id: str, snapshot_ref: str, *, user_id: str = "system") -> int:
        if service_id not in self._passports:
            raise NotFoundError(f"service {service_id!r} not registered")
        if not self.snapshot_exists(snapshot_ref):
            raise NotFoundError(f"snapshot {snapshot_ref!r} not found")
        current = self.get_passport(service_id)
        if snapshot_ref in current.evaluation_history:
            raise ConflictError(f"snapshot {snapshot_ref!r} already in history")

        updated = self._mutate(
            service_id,
            "append_evaluation",
            lambda p: replace(p, evaluation_history=p.evaluation_history + (snapshot_ref,)),
            {"snapshot_ref": snapshot_ref},
        )
        self._audit.append(
            AuditAction.EVALUATION_APPENDED,
            user_id=user_id,
            service_id=service_id,
            passport_version=updated.version,
            detail={"snapshot_ref": snapshot_ref},
        )
        return updated.version

    def update_limitations(self, service_id: str, limitations: tuple[str, ...]) -> AiPassport:
        """Used by the bias module; the caller owns authorization and audit."""
        return self._mutate(
            service_id,
            "update_limitations",
            lambda p: replace(p, declared_limitations=tuple(limitations)),
            {"count": len(limitations)},
        )

    def get_passport(self, service_id: str, version: int | None = None) -> AiPassport:
        versions = self._passports.get(service_id)
        if not versions:
            raise NotFoundError(f"service {service_id!r} not registered")
        if version is None:
            return versions[max(versions)]
        if version not in versions:
            raise NotFoundError(f"service {service_id!r} has no version {version}")
        return versions[version]

    def endpoint_for(self, service_id: str) -> str:
        if service_id not in self._endpoints:
            raise NotFoundError(f"service {service_id!r} not registered")
        return self._endpoints[service_id]

    def list_services(self) -> list[str]:
        return sorted(self._passports)

    def versions_of(self, service_id: str) -> list[int]:
        versions = self._passports.get(service_id)
        if not versions:
            raise NotFoundError(f"service {service_id!r} not registered")
        return sorted(versions)

    @property
    def mutation_log(self) -> tuple[MutationEvent, ...]:
        return tuple(self._mutation_log)
