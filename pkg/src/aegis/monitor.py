"""Ground-truth ingestion and continuous post-market performance evaluation.

Snapshots are immutable aggregates of (prediction, ground truth) pairs over
a time window; each one is appended to the service passport's evaluation
history. Drift alerts fire when the latest AUC or accuracy falls more than
a configured delta below the declared baseline or the trailing mean.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Any, Mapping, Sequence

import numpy as np

from .audit import AuditAction, AuditTrail
from .clock import Clock, parse_ts, utc_ms
from .errors import ConflictError, NotFoundError, PermissionDeniedError, StateError
from .gateway import GatewayService, JobState
from .iam import Action, IamService
from .registry import ServiceRegistry

DRIFT_METRICS = ("auc", "accuracy")


# -- metric primitives --------------------------------------------------------


def _validate_pairs(scores: Sequence[float], labels: Sequence[int]) -> None:
    if len(scores) != len(labels) or not scores:
        raise ValueError("scores and labels must be non-empty and aligned")


def confusion_counts(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> tuple[int, int, int, int]:
    tp = fp = tn = fn = 0
    for score, label in zip(scores, labels):
        predicted = score >= threshold
        if predicted and label == 1:
            tp += 1
        elif predicted and label == 0:
            fp += 1
        elif not predicted and label == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    _validate_pairs(scores, labels)
    tp, fp, tn, fn = confusion_counts(scores, labels, threshold)
    return (tp + tn) / len(scores)


def sensitivity(scores, labels, threshold: float = 0.5) -> float | None:
    _validate_pairs(scores, labels)
    tp, _, _, fn = confusion_counts(scores, labels, threshold)
    return tp / (tp + fn) if (tp + fn) else None


def specificity(scores, labels, threshold: float = 0.5) -> float | None:
    _validate_pairs(scores, labels)
    _, fp, tn, _ = confusion_counts(scores, labels, threshold)
    return tn / (tn + fp) if (tn + fp) else None


def brier_score(scores, labels) -> float:
    _validate_pairs(scores, labels)
    return sum((s - y) ** 2 for s, y in zip(scores, labels)) / len(scores)


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; ties share the average of their positions."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def auc_rank(scores, labels) -> float | None:
    """AUC by the rank statistic; ties count one half.

    Equals the fraction of correctly ordered (positive, negative) pairs,
    which the test suite verifies against brute-force pair counting.
    """
    _validate_pairs(scores, labels)
    labels_arr = np.asarray(labels)
    n_pos = int(np.sum(labels_arr == 1))
    n_neg = int(np.sum(labels_arr == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    rank_sum = float(np.sum(ranks[labels_arr == 1]))
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2
    return u_statistic / (n_pos * n_neg)


def classification_metrics(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> dict[str, float | None]:
    return {
        "accuracy": accuracy(scores, labels, threshold),
        "sensitivity": sensitivity(scores, labels, threshold),
        "specificity": specificity(scores, labels, threshold),
        "auc": auc_rank(scores, labels),
        "brier": brier_score(scores, labels),
    }


# -- records -----------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthRecord:
    job_id: str
    outcome: Any
    submitted_by: str
    submitted_at: str

    def to_document(self) -> dict:
        return {
            "job_id": self.job_id,
            "outcome": self.outcome,
            "submitted_by": self.submitted_by,
            "submitted_at": self.submitted_at,
        }


@dataclass(frozen=True)
class PerformanceSnapshot:
    snapshot_id: str
    service_id: str
    target_variable: str
    window: tuple[str, str]
    n: int
    metrics: dict[str, float | None]
    insufficient_data: bool
    computed_at: str
    per_subgroup: dict[str, dict[str, dict[str, float | None]]] | None = None

    def to_document(self) -> dict:
        return {
            "snapshot_id": self.snapshot_id,
            "service_id": self.service_id,
            "target_variable": self.target_variable,
            "window": list(self.window),
            "n": self.n,
            "metrics": self.metrics,
            "insufficient_data": self.insufficient_data,
            "computed_at": self.computed_at,
            "per_subgroup": self.per_subgroup,
        }


@dataclass(frozen=True)
class DriftAlert:
    service_id: str
    metric: str
    latest: float
    reference: float
    delta: float
    snapshot_id: str

    def to_document(self) -> dict:
        return {
            "service_id": self.service_id,
            "metric": self.metric,
            "latest": self.latest,
            "reference": self.reference,
            "delta": self.delta,
            "snapshot_id": self.snapshot_id,
        }


def week_window(clock: Clock) -> tuple[str, str]:
    """Most recent complete Monday-aligned calendar week."""
    today = clock.now().date()
    this_monday = today - timedelta(days=today.weekday())
    start = this_monday - timedelta(days=7)
    return (start.isoformat(), this_monday.isoformat())


class MonitorService:
    def __init__(
        self,
        *,
        gateway: GatewayService,
        registry: ServiceRegistry,
        iam: IamService,
        audit: AuditTrail,
        clock: Clock,
        min_n: int = 10,
        drift_delta: float = 0.05,
        threshold: float = 0.5,
        same_organisation_only: bool = True,
    ):
        self._gateway = gateway
        self._registry = registry
        self._iam = iam
        self._audit = audit
        self._clock = clock
        self.min_n = min_n
        self.drift_delta = drift_delta
        self.threshold = threshold
        self.same_organisation_only = same_organisation_only
        self._truths: dict[str, GroundTruthRecord] = {}
        self._snapshots: dict[str, PerformanceSnapshot] = {}
        self._per_service: dict[str, list[str]] = {}
        self._alerts: dict[str, list[DriftAlert]] = {}
        self._lock = threading.Lock()

    # -- ground truth ------------------------------------------------------

    def submit_ground_truth(self, token: str, job_id: str, outcome: Any) -> GroundTruthRecord:
        user = self._iam.require(token, Action.ENTER_GROUND_TRUTH, resource=job_id)
        job = self._gateway.get_job(job_id)
        if job_id in self._truths:
            raise ConflictError(f"job {job_id} already has ground truth")
        if job.state is not JobState.EXECUTED:
            raise StateError(
                f"ground truth needs an executed job; {job_id} is {job.state.value}"
            )
        if self.same_organisation_only and user.organisation != job.organisation:
            raise PermissionDeniedError(
                "ground truth may only be entered by the predicting organisation"
            )
        with self._lock:
            if job_id in self._truths:
                raise ConflictError(f"job {job_id} already has ground truth")
            record = GroundTruthRecord(
                job_id=job_id,
                outcome=outcome,
                submitted_by=user.user_id,
                submitted_at=utc_ms(self._clock.now()),
            )
            self._truths[job_id] = record
        self._audit.append(
            AuditAction.GROUND_TRUTH_SUBMITTED,
            user_id=user.user_id,
            service_id=job.service_id,
            passport_version=job.passport_version,
            detail={"job_id": job_id},
        )
        self._gateway.close_job(job_id, job_id, user_id=user.user_id)
        return record

    def ground_truth_for(self, job_id: str) -> GroundTruthRecord | None:
        return self._truths.get(job_id)

    # -- snapshots ---------------------------------------------------------

    def _collect_pairs(
        self, service_id: str, window: tuple[str, str], target: str
    ) -> tuple[list[float], list[int], list[dict]]:
        start, end = window
        scores: list[float] = []
        labels: list[int] = []
        cases: list[dict] = []
        for job in self._gateway.executed_jobs(service_id):
            truth = self._truths.get(job.job_id)
            if truth is None or target not in job.outputs:
                continue
            executed_at = job.transitions.get(JobState.EXECUTED.value)
            if executed_at is None:
                continue
            day = executed_at[:10]
            if not (start <= day <= end):
                continue
            scores.append(float(job.outputs[target]))
            labels.append(int(truth.outcome))
            cases.append({name: r.value for name, r in job.case.variables.items()})
        return scores, labels, cases

    def compute_snapshot(
        self,
        service_id: str,
        window: tuple[str, str] | None = None,
        *,
        target: str | None = None,
        subgroup_attributes: Sequence[str] = (),
        user_id: str = "system",
        append_to_passport: bool = True,
    ) -> PerformanceSnapshot:
        passport = self._registry.get_passport(service_id)
        if target is None:
            # The first declared output is the monitored clinical endpoint.
            target = passport.output_schema[0].name
        if window is None:
            window = week_window(self._clock)

        scores, labels, cases = self._collect_pairs(service_id, window, target)
        n = len(scores)
        insufficient = n < self.min_n
        metrics: dict[str, float | None]
        if insufficient:
            metrics = {k: None for k in ("accuracy", "sensitivity", "specificity", "auc", "brier")}
        else:
            metrics = classification_metrics(scores, labels, self.threshold)

        per_subgroup = None
        if subgroup_attributes and not insufficient:
            per_subgroup = {}
            for attribute in subgroup_attributes:
                groups: dict[str, dict[str, float | None]] = {}
                values = sorted({str(c.get(attribute)) for c in cases if attribute in c})
                for value in values:
                    idx = [i for i, c in enumerate(cases) if str(c.get(attribute)) == value]
                    if len(idx) >= self.min_n:
                        groups[value] = classification_metrics(
                            [scores[i] for i in idx], [labels[i] for i in idx], self.threshold
                        )
                    else:
                        groups[value] = {"n_below_minimum": float(len(idx))}
                per_subgroup[attribute] = groups

        snapshot = PerformanceSnapshot(
            snapshot_id=uuid.uuid4().hex,
            service_id=service_id,
            target_variable=target,
            window=window,
            n=n,
            metrics=metrics,
            insufficient_data=insufficient,
            computed_at=utc_ms(self._clock.now()),
            per_subgroup=per_subgroup,
        )
        with self._lock:
            self._snapshots[snapshot.snapshot_id] = snapshot
            self._per_service.setdefault(service_id, []).append(snapshot.snapshot_id)
        self._audit.append(
            AuditAction.SNAPSHOT_COMPUTED,
            user_id=user_id,
            service_id=service_id,
            detail={
                "snapshot_id": snapshot.snapshot_id,
                "target": target,
                "window": list(window),
                "n": n,
                "insufficient_data": insufficient,
            },
        )
        if append_to_passport:
            self._registry.append_evaluation(service_id, snapshot.snapshot_id, user_id=user_id)
        return snapshot

    def has_snapshot(self, snapshot_id: str) -> bool:
        return snapshot_id in self._snapshots

    def get_snapshot(self, snapshot_id: str) -> PerformanceSnapshot:
        snapshot = self._snapshots.get(snapshot_id)
        if snapshot is None:
            raise NotFoundError(f"snapshot {snapshot_id!r} not found")
        return snapshot

    def snapshots_for(self, service_id: str) -> list[PerformanceSnapshot]:
        return [self._snapshots[sid] for sid in self._per_service.get(service_id, [])]

    def alerts_for(self, service_id: str) -> list[DriftAlert]:
        return list(self._alerts.get(service_id, []))

    # -- drift -------------------------------------------------------------

    def detect_drift(self, service_id: str) -> DriftAlert | None:
        """Alert when the latest snapshot deteriorates beyond the delta.

        Reference per metric: the higher of the passport's declared value
        and the trailing mean of prior usable snapshots.
        """
        usable = [s for s in self.snapshots_for(service_id) if not s.insufficient_data]
        if len(usable) < 2:
            return None
        latest = usable[-1]
        history = usable[:-1]
        declared = (
            self._registry.get_passport(service_id).training_descriptor.declared_performance
            or {}
        )
        for metric in DRIFT_METRICS:
            latest_value = latest.metrics.get(metric)
            if latest_value is None:
                continue
            trailing = [
                s.metrics[metric] for s in history if s.metrics.get(metric) is not None
            ]
            references = []
            if trailing:
                references.append(sum(trailing) / len(trailing))
            if metric in declared:
                references.append(declared[metric])
            if not references:
                continue
            reference = max(references)
            if latest_value < reference - self.drift_delta:
                alert = DriftAlert(
                    service_id=service_id,
                    metric=metric,
                    latest=latest_value,
                    reference=reference,
                    delta=self.drift_delta,
                    snapshot_id=latest.snapshot_id,
                )
                with self._lock:
                    self._alerts.setdefault(service_id, []).append(alert)
                self._audit.append(
                    AuditAction.DRIFT_ALERT,
                    service_id=service_id,
                    detail=alert.to_document(),
                )
                return alert
        return None
