"""Clinical case ingestion, unit normalization, and input mapping.

Two external document formats are supported: a flat name/value format and a
simplified observation bundle whose coded paths are mapped to model variable
names through a per-service profile. Neither is a conformant openEHR or HL7
implementation; the profile abstraction deliberately stays standard-agnostic.
"""

from __future__ import annotations

import json
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Iterable, Mapping

from .clock import Clock, utc_ms
from .errors import (
    ConfigurationError,
    DirectIdentifierError,
    FormatError,
    MappingError,
    UnitConversionError,
)

# Mass-per-volume and molar concentration scales used to derive conversion
# factors for analytes whose molar mass is on file.
_MASS_TO_G_PER_L = {"g/L": 1.0, "g/dL": 10.0, "mg/dL": 0.01, "mg/L": 0.001}
_MOLAR_TO_MOL_PER_L = {"mol/L": 1.0, "mmol/L": 1e-3, "umol/L": 1e-6, "nmol/L": 1e-9}


class UnitTable:
    """Linear unit conversions shipped as fixture data.

    General edges (g/dL to g/L and the like) apply to every variable; molar
    edges are analyte-specific because they depend on the molar mass. The
    factor between two units is the product along a breadth-first path over
    both edge sets, so chained conversions (umol/L -> mmol/L -> ...) work
    without enumerating every pair.
    """

    def __init__(self, definitions: Mapping[str, Any]):
        self._units: set[str] = set(definitions.get("units", []))
        self._general: dict[str, list[tuple[str, float]]] = {}
        self._per_variable: dict[str, dict[str, list[tuple[str, float]]]] = {}
        for entry in definitions.get("linear", []):
            self._add_edge(self._general, entry["from"], entry["to"], float(entry["factor"]))
        for entry in definitions.get("molar", []):
            mass_unit = entry["mass_unit"]
            molar_unit = entry["molar_unit"]
            molar_mass = float(entry["molar_mass_g_per_mol"])
            if mass_unit not in _MASS_TO_G_PER_L or molar_unit not in _MOLAR_TO_MOL_PER_L:
                raise ConfigurationError(
                    f"unsupported molar pair {mass_unit} -> {molar_unit}"
                )
            factor = _MASS_TO_G_PER_L[mass_unit] / molar_mass / _MOLAR_TO_MOL_PER_L[molar_unit]
            edges = self._per_variable.setdefault(entry["variable"], {})
            self._add_edge(edges, mass_unit, molar_unit, factor)
            self._units.update((mass_unit, molar_unit))

    @staticmethod
    def _add_edge(graph: dict, src: str, dst: str, factor: float) -> None:
        graph.setdefault(src, []).append((dst, factor))
        graph.setdefault(dst, []).append((src, 1.0 / factor))

    @classmethod
    def default(cls) -> "UnitTable":
        data = resources.files("aegis.fixtures").joinpath("units.json").read_text()
        return cls(json.loads(data))

    def knows(self, unit: str) -> bool:
        return unit in self._units

    def factor(self, variable: str, from_unit: str, to_unit: str) -> float:
        if from_unit == to_unit:
            return 1.0
        queue = deque([(from_unit, 1.0)])
        seen = {from_unit}
        variable_edges = self._per_variable.get(variable, {})
        while queue:
            unit, acc = queue.popleft()
            for nxt, step in self._general.get(unit, []) + variable_edges.get(unit, []):
                if nxt in seen:
                    continue
                if nxt == to_unit:
                    return acc * step
                seen.add(nxt)
                queue.append((nxt, acc * step))
        raise UnitConversionError(
            variable, f"no conversion path from {from_unit!r} to {to_unit!r}"
        )


@dataclass(frozen=True)
class VariableReading:
    value: Any
    unit: str | None = None
    observed_at: str | None = None


@dataclass(frozen=True)
class ClinicalCase:
    case_id: str
    patient_pseudo_id: str
    variables: dict[str, VariableReading]
    source_system: str
    ingested_at: str
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.patient_pseudo_id:
            raise FormatError("patient_pseudo_id must be non-empty")

    def to_document(self) -> dict:
        return {
            "case_id": self.case_id,
            "patient_pseudo_id": self.patient_pseudo_id,
            "source_system": self.source_system,
            "ingested_at": self.ingested_at,
            "provenance": list(self.provenance),
            "variables": {
                name: {
                    "value": reading.value,
                    "unit": reading.unit,
                    "observed_at": reading.observed_at,
                }
                for name, reading in self.variables.items()
            },
        }


@dataclass(frozen=True)
class ProfileEntry:
    variable: str
    unit: str | None = None  # override when the source omits units


@dataclass(frozen=True)
class MappingProfile:
    service_id: str
    entries: dict[str, ProfileEntry]

    def missing_required(self, schema) -> list[str]:
        mapped = {entry.variable for entry in self.entries.values()}
        return [spec.name for spec in schema if spec.required and spec.name not in mapped]


@dataclass(frozen=True)
class IngestResult:
    case: ClinicalCase
    unrecognized: tuple[str, ...] = ()

    @property
    def recognized_count(self) -> int:
        return len(self.case.variables)


def _reject_direct_identifiers(document: Mapping, flagged: Iterable[str]) -> None:
    present = sorted(set(flagged) & set(document.keys()))
    if present:
        raise DirectIdentifierError(present)


def _coerce_reading(raw: Any) -> VariableReading:
    if isinstance(raw, Mapping):
        if "value" not in raw:
            raise FormatError("variable entry missing 'value'")
        return VariableReading(
            value=raw["value"],
            unit=raw.get("unit"),
            observed_at=raw.get("observed_at"),
        )
    return VariableReading(value=raw)


def ingest_case(
    document: Mapping,
    fmt: str,
    *,
    clock: Clock,
    profile: MappingProfile | None = None,
    identifier_fields: Iterable[str] = (),
) -> IngestResult:
    """Parse an external case document into a ClinicalCase.

    Nothing is silently dropped: bundle observations without a profile entry
    come back in ``unrecognized``. Documents carrying direct identifier
    fields are refused outright.
    """
    if not isinstance(document, Mapping):
        raise FormatError("case document must be an object")
    _reject_direct_identifiers(document, identifier_fields)
    pseudo_id = document.get("patient_pseudo_id")
    if not pseudo_id or not isinstance(pseudo_id, str):
        raise FormatError("missing patient_pseudo_id")
    case_id = document.get("case_id") or uuid.uuid4().hex
    source = document.get("source_system", "unknown")
    ingested_at = document.get("ingested_at") or utc_ms(clock.now())

    variables: dict[str, VariableReading] = {}
    unrecognized: list[str] = []

    if fmt == "flat":
        raw_vars = document.get("variables")
        if not isinstance(raw_vars, Mapping):
            raise FormatError("flat document needs a 'variables' object")
        _reject_direct_identifiers(raw_vars, identifier_fields)
        for name, raw in raw_vars.items():
            variables[name] = _coerce_reading(raw)
    elif fmt == "observation_bundle":
        if profile is None:
            raise ConfigurationError("observation_bundle ingestion requires a mapping profile")
        observations = document.get("observations")
        if not isinstance(observations, list):
            raise FormatError("bundle document needs an 'observations' list")
        for obs in observations:
            if not isinstance(obs, Mapping) or "path" not in obs:
                raise FormatError("each observation needs a 'path'")
            entry = profile.entries.get(obs["path"])
            if entry is None:
                unrecognized.append(obs["path"])
                continue
            reading = _coerce_reading(obs)
            if reading.unit is None and entry.unit is not None:
                reading = replace(reading, unit=entry.unit)
            variables[entry.variable] = reading
    else:
        raise FormatError(f"unknown case format: {fmt!r}")

    case = ClinicalCase(
        case_id=case_id,
        patient_pseudo_id=pseudo_id,
        variables=variables,
        source_system=source,
        ingested_at=ingested_at,
    )
    return IngestResult(case=case, unrecognized=tuple(unrecognized))


def convert_units(case: ClinicalCase, schema, table: UnitTable) -> ClinicalCase:
    """Rescale numeric readings to schema units; idempotent by construction.

    Readings that already carry the schema unit pass through untouched. A
    reading without a unit is assumed to be in the schema unit and the
    assumption is recorded in provenance (the range check still guards
    against gross unit mistakes). Unknown units fail loudly, naming the
    variable, which the gateway turns into a blocked job.
    """
    notes = list(case.provenance)
    converted = dict(case.variables)
    for spec in schema:
        if spec.value_type != "numeric" or spec.name not in case.variables:
            continue
        reading = case.variables[spec.name]
        if reading.unit is None:
            note = f"{spec.name}: no unit supplied, assumed {spec.unit}"
            if note not in notes:
                notes.append(note)
            converted[spec.name] = replace(reading, unit=spec.unit)
            continue
        if reading.unit == spec.unit:
            continue
        if not isinstance(reading.value, (int, float)) or isinstance(reading.value, bool):
            raise UnitConversionError(spec.name, "non-numeric value cannot be converted")
        factor = table.factor(spec.name, reading.unit, spec.unit)
        new_value = reading.value * factor
        notes.append(
            f"{spec.name}: {reading.value} {reading.unit} -> {new_value} {spec.unit}"
            f" (factor {factor})"
        )
        converted[spec.name] = replace(reading, value=new_value, unit=spec.unit)
    return replace(case, variables=converted, provenance=tuple(notes))


def build_model_inputs(case: ClinicalCase, schema) -> dict[str, Any]:
    """Final mapping step: schema-named inputs from a normalized case."""
    missing = [
        spec.name for spec in schema if spec.required and spec.name not in case.variables
    ]
    if missing:
        raise MappingError(missing)
    return {
        spec.name: case.variables[spec.name].value
        for spec in schema
        if spec.name in case.variables
    }
