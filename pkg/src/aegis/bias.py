"""Bias declaration and bias testing.

Two routes, both supported: the manufacturer declares the potential bias of
the predictions as passport limitations, or a labeled dataset with subgroup
attributes is run through the model and standard disparity measures are
reported raw, with group sizes, as evidence rather than verdict.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Mapping, Sequence

from .adapter import AdapterClient, AdapterRequest
from .audit import AuditAction, AuditTrail
from .clock import Clock, utc_ms
from .errors import ConfigurationError, NotFoundError
from .iam import Action, IamService
from .monitor import auc_rank, confusion_counts
from .registry import ServiceRegistry


@dataclass(frozen=True)
class LabeledCase:
    inputs: dict[str, Any]
    label: int
    attributes: dict[str, str]


@dataclass(frozen=True)
class GroupMetrics:
    n: int
    positive_rate: float | None
    tpr: float | None
    fpr: float | None
    auc: float | None
    insufficient_n: bool

    def to_document(self) -> dict:
        return {
            "n": self.n,
            "positive_rate": self.positive_rate,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "auc": self.auc,
            "insufficient_n": self.insufficient_n,
        }


@dataclass(frozen=True)
class AttributeReport:
    groups: dict[str, GroupMetrics]
    demographic_parity_difference: float | None
    equalized_odds_gap: float | None
    auc_gap: float | None

    def to_document(self) -> dict:
        return {
            "groups": {k: v.to_document() for k, v in self.groups.items()},
            "demographic_parity_difference": self.demographic_parity_difference,
            "equalized_odds_gap": self.equalized_odds_gap,
            "auc_gap": self.auc_gap,
        }


@dataclass(frozen=True)
class BiasReport:
    report_id: str
    service_id: str
    mode: str  # declared | tested
    declared_limitations: tuple[str, ...]
    per_attribute: dict[str, AttributeReport]
    missing_attributes: tuple[str, ...]
    computed_at: str

    def to_document(self) -> dict:
        return {
            "report_id": self.report_id,
            "service_id": self.service_id,
            "mode": self.mode,
            "declared_limitations": list(self.declared_limitations),
            "per_attribute": {k: v.to_document() for k, v in self.per_attribute.items()},
            "missing_attributes": list(self.missing_attributes),
            "computed_at": self.computed_at,
        }


def _max_pairwise_gap(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    return max(abs(a - b) for a, b in combinations(values, 2))


def attribute_metrics(
    scores: Sequence[float],
    labels: Sequence[int],
    groups: Sequence[str],
    *,
    threshold: float = 0.5,
    min_group_n: int = 5,
) -> AttributeReport:
    """Disparity measures for one subgroup attribute.

    Groups below the minimum size are flagged, never silently dropped; they
    are listed with their n but excluded from the pairwise gaps so noise is
    not presented as disparity.
    """
    by_group: dict[str, list[int]] = {}
    for index, group in enumerate(groups):
        by_group.setdefault(group, []).append(index)

    metrics: dict[str, GroupMetrics] = {}
    for group, idx in sorted(by_group.items()):
        g_scores = [scores[i] for i in idx]
        g_labels = [labels[i] for i in idx]
        insufficient = len(idx) < min_group_n
        if insufficient:
            metrics[group] = GroupMetrics(len(idx), None, None, None, None, True)
            continue
        tp, fp, tn, fn = confusion_counts(g_scores, g_labels, threshold)
        positive_rate = (tp + fp) / len(idx)
        tpr = tp / (tp + fn) if (tp + fn) else None
        fpr = fp / (fp + tn) if (fp + tn) else None
        metrics[group] = GroupMetrics(
            n=len(idx),
            positive_rate=positive_rate,
            tpr=tpr,
            fpr=fpr,
            auc=auc_rank(g_scores, g_labels),
            insufficient_n=False,
        )

    usable = [m for m in metrics.values() if not m.insufficient_n]
    rates = [m.positive_rate for m in usable if m.positive_rate is not None]
    tprs = [m.tpr for m in usable if m.tpr is not None]
    fprs = [m.fpr for m in usable if m.fpr is not None]
    aucs = [m.auc for m in usable if m.auc is not None]

    tpr_gap = _max_pairwise_gap(tprs)
    fpr_gap = _max_pairwise_gap(fprs)
    if tpr_gap is None and fpr_gap is None:
        odds_gap = None
    else:
        odds_gap = max(v for v in (tpr_gap, fpr_gap) if v is not None)

    return AttributeReport(
        groups=metrics,
        demographic_parity_difference=_max_pairwise_gap(rates),
        equalized_odds_gap=odds_gap,
        auc_gap=_max_pairwise_gap(aucs),
    )


class BiasService:
    def __init__(
        self,
        *,
        registry: ServiceRegistry,
        iam: IamService,
        adapters: AdapterClient,
        audit: AuditTrail,
        clock: Clock,
        threshold: float = 0.5,
        min_group_n: int = 5,
    ):
        self._registry = registry
        self._iam = iam
        self._adapters = adapters
        self._audit = audit
        self._clock = clock
        self.threshold = threshold
        self.min_group_n = min_group_n
        self._reports: dict[str, BiasReport] = {}
        self._per_service: dict[str, list[str]] = {}
        self._lock = threading.Lock()

    def declare_bias_limitations(
        self, token: str, service_id: str, limitations: Sequence[str]
    ):
        user = self._iam.require(token, Action.DECLARE_BIAS, resource=service_id)
        if not limitations:
            raise ConfigurationError("at least one limitation statement is required")
        passport = self._registry.get_passport(service_id)
        merged = tuple(dict.fromkeys(passport.declared_limitations + tuple(limitations)))
        updated = self._registry.update_limitations(service_id, merged)
        self._audit.append(
            AuditAction.BIAS_LIMITATIONS_DECLARED,
            user_id=user.user_id,
            service_id=service_id,
            passport_version=updated.version,
            detail={"limitations": list(limitations)},
        )
        return updated

    def run_bias_test(
        self,
        service_id: str,
        cases: Sequence[LabeledCase],
        *,
        attributes: Sequence[str] = (),
        user_id: str = "system",
    ) -> BiasReport:
        passport = self._registry.get_passport(service_id)
        endpoint = self._registry.endpoint_for(service_id)
        target = passport.output_schema[0].name
        descriptor = passport.training_descriptor

        requested = list(
            dict.fromkeys(
                list(attributes)
                + sorted(descriptor.demographic_attributes_present)
                + sorted(descriptor.known_absent_attributes)
            )
        )
        if not cases:
            raise ConfigurationError("bias test needs labeled cases")

        scores = []
        labels = []
        for case in cases:
            request = AdapterRequest(inputs=dict(case.inputs), passport_version=passport.version)
            response = self._adapters.predict(endpoint, request, mode="academic")
            scores.append(float(response.outputs[target]))
            labels.append(int(case.label))

        per_attribute: dict[str, AttributeReport] = {}
        missing: list[str] = []
        for attribute in requested:
            values = [case.attributes.get(attribute) for case in cases]
            known = [v for v in values if v is not None]
            if not known:
                missing.append(attribute)
                continue
            idx = [i for i, v in enumerate(values) if v is not None]
            per_attribute[attribute] = attribute_metrics(
                [scores[i] for i in idx],
                [labels[i] for i in idx],
                [values[i] for i in idx],
                threshold=self.threshold,
                min_group_n=self.min_group_n,
            )

        report = BiasReport(
            report_id=uuid.uuid4().hex,
            service_id=service_id,
            mode="tested",
            declared_limitations=passport.declared_limitations
            + tuple(f"attribute not assessable: {name}" for name in missing),
            per_attribute=per_attribute,
            missing_attributes=tuple(missing),
            computed_at=utc_ms(self._clock.now()),
        )
        with self._lock:
            self._reports[report.report_id] = report
            self._per_service.setdefault(service_id, []).append(report.report_id)
        self._audit.append(
            AuditAction.BIAS_TEST_RUN,
            user_id=user_id,
            service_id=service_id,
            passport_version=passport.version,
            detail={
                "report_id": report.report_id,
                "attributes": list(per_attribute),
                "missing_attributes": missing,
                "n": len(cases),
            },
        )
        return report

    def get_report(self, report_id: str) -> BiasReport:
        report = self._reports.get(report_id)
        if report is None:
            raise NotFoundError(f"bias report {report_id!r} not found")
        return report

    def reports_for(self, service_id: str) -> list[BiasReport]:
        return [self._reports[rid] for rid in self._per_service.get(service_id, [])]
