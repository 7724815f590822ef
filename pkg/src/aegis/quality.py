"""Data quality assessment for operational cases and datasets.

Six dimensions are computed (completeness, consistency, uniqueness,
correctness, temporal stability, multi-source stability); three more
(contextualisation, predictive value, reliability) cannot be computed from
a single case or dataset without outcome data, so they are carried as
manufacturer-declared statements. Hard failures block the prediction
pipeline; everything else is reported as evidence.
"""

from __future__ import annotations

import math
import uuid
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .clock import parse_ts
from .errors import ConfigurationError
from .interop import ClinicalCase
from .registry import VariableSpec

COMPUTED_DIMENSIONS = (
    "completeness",
    "consistency",
    "uniqueness",
    "correctness",
    "temporal_stability",
    "multi_source_stability",
)
DECLARED_DIMENSIONS = ("contextualisation", "predictive_value", "reliability")

_COMPARATORS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


@dataclass(frozen=True)
class ConsistencyRule:
    """Cross-field rule, operator-configured.

    ``left`` is a variable name; ``right`` is either another variable name
    (``right_is_variable=True``) or a constant. Rules whose operands are
    absent from the case are skipped, not violated.
    """

    name: str
    left: str
    op: str
    right: Any
    right_is_variable: bool = False

    def evaluate(self, case: ClinicalCase) -> bool | None:
        """True = holds, False = violated, None = not applicable."""
        if self.left not in case.variables:
            return None
        left = case.variables[self.left].value
        if self.right_is_variable:
            if self.right not in case.variables:
                return None
            right = case.variables[self.right].value
        else:
            right = self.right
        try:
            return bool(_COMPARATORS[self.op](left, right))
        except TypeError:
            return False


@dataclass(frozen=True)
class HardFailure:
    variable: str
    check: str
    detail: str

    def to_document(self) -> dict:
        return {"variable": self.variable, "check": self.check, "detail": self.detail}


@dataclass(frozen=True)
class QualityReport:
    report_id: str
    target: str
    dimension_scores: dict[str, float | None]
    declared_dimensions: dict[str, str]
    hard_failures: tuple[HardFailure, ...]
    findings: tuple[str, ...] = ()

    @property
    def overall(self) -> float | None:
        computed = [v for v in self.dimension_scores.values() if v is not None]
        return min(computed) if computed else None

    @property
    def verdict(self) -> str:
        return "block" if self.hard_failures else "pass"

    def to_document(self) -> dict:
        return {
            "report_id": self.report_id,
            "target": self.target,
            "dimension_scores": self.dimension_scores,
            "declared_dimensions": self.declared_dimensions,
            "hard_failures": [f.to_document() for f in self.hard_failures],
            "findings": list(self.findings),
            "overall": self.overall,
            "verdict": self.verdict,
        }


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def check_value(spec: VariableSpec, value: Any) -> HardFailure | None:
    """Range, category, and type check for one value against its spec."""
    if spec.value_type == "numeric":
        if not _is_number(value):
            return HardFailure(spec.name, "type", f"expected a number, got {value!r}")
        low, high = spec.valid_range
        if not (low <= value <= high):
            return HardFailure(
                spec.name,
                "range",
                f"{value} outside [{low}, {high}] {spec.unit}",
            )
    elif spec.value_type == "categorical":
        if value not in spec.categories:
            return HardFailure(
                spec.name, "category", f"{value!r} not in {list(spec.categories)}"
            )
    elif spec.value_type == "boolean":
        if not isinstance(value, bool):
            return HardFailure(spec.name, "type", f"expected a boolean, got {value!r}")
    elif spec.value_type == "datetime":
        if not isinstance(value, str):
            return HardFailure(spec.name, "type", "expected an ISO datetime string")
        try:
            parse_ts(value)
        except ValueError:
            return HardFailure(spec.name, "type", f"unparseable datetime {value!r}")
    return None


def assess_case(
    case: ClinicalCase,
    schema: Sequence[VariableSpec],
    rules: Sequence[ConsistencyRule] = (),
) -> QualityReport:
    """Pure, deterministic per-case assessment.

    Completeness counts required fields; correctness range/category checks
    are hard failures, as is any missing required field (the predictive
    process must stop rather than run on bad inputs). Uniqueness and the
    two stability dimensions need a dataset, so they come back
    not-applicable here.
    """
    if not schema:
        raise ConfigurationError("empty schema")
    hard: list[HardFailure] = []
    findings: list[str] = []

    required = [spec for spec in schema if spec.required]
    present_required = [spec for spec in required if spec.name in case.variables]
    completeness = len(present_required) / len(required) if required else 1.0
    for spec in required:
        if spec.name not in case.variables:
            hard.append(HardFailure(spec.name, "missing", "required variable absent"))

    checked = 0
    correct = 0
    for spec in schema:
        if spec.name not in case.variables:
            continue
        checked += 1
        failure = check_value(spec, case.variables[spec.name].value)
        if failure is None:
            correct += 1
        else:
            hard.append(failure)
    correctness = correct / checked if checked else 1.0

    known = {spec.name for spec in schema}
    for name in case.variables:
        if name not in known:
            findings.append(f"{name}: not in the input schema, ignored")

    applicable = 0
    held = 0
    for rule in rules:
        outcome = rule.evaluate(case)
        if outcome is None:
            continue
        applicable += 1
        if outcome:
            held += 1
        else:
            findings.append(f"consistency rule violated: {rule.name}")
    consistency = held / applicable if applicable else 1.0

    return QualityReport(
        report_id=uuid.uuid4().hex,
        target=case.case_id,
        dimension_scores={
            "completeness": completeness,
            "consistency": consistency,
            "uniqueness": None,
            "correctness": correctness,
            "temporal_stability": None,
            "multi_source_stability": None,
        },
        declared_dimensions={},
        hard_failures=tuple(hard),
        findings=tuple(findings),
    )


# -- population stability index ---------------------------------------------


def population_stability_index(
    expected: Sequence[float], actual: Sequence[float], epsilon: float = 1e-4
) -> float:
    """PSI between two binned distributions given as proportions.

    Zero-count bins are replaced by ``epsilon`` so the log term stays
    finite. Every term (a-e)*ln(a/e) is non-negative, so PSI >= 0 with
    equality exactly when the binned distributions match.
    """
    if len(expected) != len(actual):
        raise ConfigurationError("histograms must share the binning")
    total = 0.0
    for e, a in zip(expected, actual):
        e = max(float(e), epsilon)
        a = max(float(a), epsilon)
        total += (a - e) * math.log(a / e)
    return total


def psi_from_samples(
    reference: Sequence[float],
    actual: Sequence[float],
    bins: int = 10,
    epsilon: float = 1e-4,
) -> float:
    """PSI over raw samples; bins are equal-frequency in the reference."""
    reference = np.asarray(reference, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if reference.size == 0 or actual.size == 0:
        raise ConfigurationError("both windows need samples")
    quantiles = np.quantile(reference, np.linspace(0, 1, bins + 1)[1:-1])
    edges = np.unique(quantiles)
    ref_counts = np.bincount(np.searchsorted(edges, reference, side="right"), minlength=len(edges) + 1)
    act_counts = np.bincount(np.searchsorted(edges, actual, side="right"), minlength=len(edges) + 1)
    return population_stability_index(
        ref_counts / reference.size, act_counts / actual.size, epsilon
    )


def _numeric_variables(schema: Sequence[VariableSpec]) -> list[str]:
    return [spec.name for spec in schema if spec.value_type == "numeric"]


def _mean_psi_over_variables(
    groups: Sequence[Sequence[ClinicalCase]],
    schema: Sequence[VariableSpec],
    bins: int,
    epsilon: float,
) -> float | None:
    """Average PSI over numeric variables, pairwise across groups."""
    values = []
    for name in _numeric_variables(schema):
        series = []
        for group in groups:
            data = [
                c.variables[name].value
                for c in group
                if name in c.variables and _is_number(c.variables[name].value)
            ]
            series.append(data)
        if any(len(data) == 0 for data in series):
            continue
        pair_values = []
        for i in range(len(series)):
            for j in range(i + 1, len(series)):
                pair_values.append(psi_from_samples(series[i], series[j], bins, epsilon))
        if pair_values:
            values.append(sum(pair_values) / len(pair_values))
    if not values:
        return None
    return sum(values) / len(values)


def assess_dataset(
    cases: Sequence[ClinicalCase],
    schema: Sequence[VariableSpec],
    rules: Sequence[ConsistencyRule] = (),
    *,
    bins: int = 10,
    epsilon: float = 1e-4,
    declared_dimensions: Mapping[str, str] | None = None,
) -> QualityReport:
    """Dataset-level assessment: per-case dimensions averaged, plus
    uniqueness and the two stability dimensions.

    Temporal stability sorts by ingestion timestamp first and compares the
    two halves, so the score is invariant to the order cases arrive in.
    A single window or a single source makes the respective score
    not-applicable rather than 1.0.
    """
    if not cases:
        raise ConfigurationError("empty dataset")
    if not schema:
        raise ConfigurationError("empty schema")

    per_case = [assess_case(case, schema, rules) for case in cases]
    hard = tuple(
        HardFailure(f"{case.case_id}:{failure.variable}", failure.check, failure.detail)
        for case, report in zip(cases, per_case)
        for failure in report.hard_failures
    )
    findings = tuple(
        finding for report in per_case for finding in report.findings
    )

    def mean_dim(dimension: str) -> float:
        return sum(r.dimension_scores[dimension] for r in per_case) / len(per_case)

    fingerprints = {
        (
            case.patient_pseudo_id,
            tuple(sorted((n, repr(r.value)) for n, r in case.variables.items())),
        )
        for case in cases
    }
    duplicates = len(cases) - len(fingerprints)
    uniqueness = 1.0 - duplicates / len(cases)

    ordered = sorted(cases, key=lambda c: c.ingested_at)
    half = len(ordered) // 2
    temporal: float | None = None
    if half >= 2:
        psi = _mean_psi_over_variables([ordered[:half], ordered[half:]], schema, bins, epsilon)
        if psi is not None:
            temporal = 1.0 - min(1.0, psi)

    by_source: dict[str, list[ClinicalCase]] = defaultdict(list)
    for case in cases:
        by_source[case.source_system].append(case)
    multi_source: float | None = None
    if len(by_source) >= 2:
        psi = _mean_psi_over_variables(list(by_source.values()), schema, bins, epsilon)
        if psi is not None:
            multi_source = 1.0 - min(1.0, psi)

    return QualityReport(
        report_id=uuid.uuid4().hex,
        target=f"dataset[{len(cases)}]",
        dimension_scores={
            "completeness": mean_dim("completeness"),
            "consistency": mean_dim("consistency"),
            "uniqueness": uniqueness,
            "correctness": mean_dim("correctness"),
            "temporal_stability": temporal,
            "multi_source_stability": multi_source,
        },
        declared_dimensions=dict(declared_dimensions or {}),
        hard_failures=hard,
        findings=findings,
    )
