"""The prediction workflow: job lifecycle with mandatory double-check.

A job moves draft -> confirmed -> executed -> closed, never skipping a
state. Creation ingests, normalizes, and quality-assesses the case;
confirmation is the clinician's double-check and re-verifies the
regulation or disclaimer gate; execution calls the model adapter, validates
the outputs against the declared schema, computes attribution, and writes
the hash-carrying audit record; closure happens when ground truth arrives.
Blocked drafts are kept, never deleted, so the refusal itself is auditable.
"""

from __future__ import annotations

import hashlib
import threading
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Sequence

from .adapter import AdapterClient, AdapterRequest
from .audit import AuditAction, AuditTrail, canonical_json, content_digest
from .clock import Clock, utc_ms
from .compliance import ComplianceService
from .errors import (
    AdapterError,
    GateRefusal,
    NotFoundError,
    OutputSchemaError,
    PermissionDeniedError,
    StateError,
    UnitConversionError,
)
from .iam import Action, IamService
from .interop import (
    ClinicalCase,
    MappingProfile,
    UnitTable,
    build_model_inputs,
    convert_units,
    ingest_case,
)
from .quality import ConsistencyRule, HardFailure, QualityReport, assess_case, check_value
from .registry import ServiceRegistry
from .vault import PayloadVault
from .xai import Attribution, explain, native_attribution


class JobState(str, Enum):
    DRAFT = "draft"
    CONFIRMED = "confirmed"
    EXECUTED = "executed"
    CLOSED = "closed"


_ORDER = [JobState.DRAFT, JobState.CONFIRMED, JobState.EXECUTED, JobState.CLOSED]


@dataclass
class PredictionJob:
    job_id: str
    user_id: str
    organisation: str
    service_id: str
    passport_version: int
    mode: str  # clinical | academic
    case: ClinicalCase
    quality_report_ref: str
    limitations_shown: tuple[str, ...]
    purpose_shown: str
    intended_context_shown: str
    state: JobState = JobState.DRAFT
    blocked: bool = False
    block_reasons: tuple[str, ...] = ()
    outputs: dict[str, Any] = field(default_factory=dict)
    model_build_id: str | None = None
    attribution: Attribution | None = None
    limitations_hash: str | None = None
    ground_truth_ref: str | None = None
    execution_failure: str | None = None
    transitions: dict[str, str] = field(default_factory=dict)

    def to_document(self, *, include_case: bool = True) -> dict:
        doc = {
            "job_id": self.job_id,
            "user_id": self.user_id,
            "organisation": self.organisation,
            "service_id": self.service_id,
            "passport_version": self.passport_version,
            "mode": self.mode,
            "state": self.state.value,
            "blocked": self.blocked,
            "block_reasons": list(self.block_reasons),
            "quality_report_ref": self.quality_report_ref,
            "limitations_shown": list(self.limitations_shown),
            "purpose_shown": self.purpose_shown,
            "intended_context_shown": self.intended_context_shown,
            "outputs": dict(self.outputs),
            "model_build_id": self.model_build_id,
            "limitations_hash": self.limitations_hash,
            "ground_truth_ref": self.ground_truth_ref,
            "execution_failure": self.execution_failure,
            "transitions": dict(self.transitions),
            "attribution": self.attribution.to_document() if self.attribution else None,
        }
        if include_case:
            doc["case"] = self.case.to_document()
        return doc


def case_input_hash(case: ClinicalCase) -> str:
    """Digest over the normalized variables; recomputable from the stored case."""
    payload = {
        name: {"value": reading.value, "unit": reading.unit}
        for name, reading in sorted(case.variables.items())
    }
    return content_digest(canonical_json(payload).encode("ascii"))


def outputs_hash(outputs: Mapping[str, Any]) -> str:
    return content_digest(canonical_json(dict(sorted(outputs.items()))).encode("ascii"))


def limitations_digest(limitations: Sequence[str], purpose: str) -> str:
    body = canonical_json({"purpose": purpose, "limitations": list(limitations)})
    return hashlib.sha256(body.encode("ascii")).hexdigest()


def validate_outputs(outputs: Mapping[str, Any], output_schema) -> list[str]:
    violations = []
    for spec in output_schema:
        if spec.name not in outputs:
            if spec.required:
                violations.append(f"{spec.name}: missing from adapter response")
            continue
        failure = check_value(spec, outputs[spec.name])
        if failure is not None:
            violations.append(f"{spec.name}: {failure.check} ({failure.detail})")
    for name in outputs:
        if not any(spec.name == name for spec in output_schema):
            violations.append(f"{name}: not in the output schema")
    return violations


class GatewayService:
    def __init__(
        self,
        *,
        registry: ServiceRegistry,
        iam: IamService,
        compliance: ComplianceService,
        adapters: AdapterClient,
        audit: AuditTrail,
        vault: PayloadVault,
        clock: Clock,
        units: UnitTable,
        jurisdiction: str = "ES",
        identifier_fields: Sequence[str] = (),
        exact_shapley_max_dims: int = 12,
        shapley_samples: int = 2000,
    ):
        self._registry = registry
        self._iam = iam
        self._compliance = compliance
        self._adapters = adapters
        self._audit = audit
        self._vault = vault
        self._clock = clock
        self._units = units
        self._jurisdiction = jurisdiction
        self._identifier_fields = tuple(identifier_fields)
        self._exact_dims = exact_shapley_max_dims
        self._samples = shapley_samples
        self._jobs: dict[str, PredictionJob] = {}
        self._job_locks: dict[str, threading.Lock] = {}
        self._quality_reports: dict[str, QualityReport] = {}
        self._profiles: dict[str, MappingProfile] = {}
        self._rules: dict[str, tuple[ConsistencyRule, ...]] = {}
        self._store_lock = threading.Lock()

    # -- configuration ---------------------------------------------------

    def set_profile(self, profile: MappingProfile) -> None:
        self._profiles[profile.service_id] = profile

    def profile_for(self, service_id: str) -> MappingProfile | None:
        return self._profiles.get(service_id)

    def set_rules(self, service_id: str, rules: Sequence[ConsistencyRule]) -> None:
        self._rules[service_id] = tuple(rules)

    # -- lookups -----------------------------------------------------------

    def get_job(self, job_id: str) -> PredictionJob:
        job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"job {job_id!r} not found")
        return job

    def _lock_for(self, job_id: str) -> threading.Lock:
        with self._store_lock:
            return self._job_locks.setdefault(job_id, threading.Lock())

    def list_jobs(
        self, *, user: str | None = None, service: str | None = None
    ) -> list[PredictionJob]:
        jobs = [
            job
            for job in self._jobs.values()
            if (user is None or job.user_id == user)
            and (service is None or job.service_id == service)
        ]
        return sorted(jobs, key=lambda j: j.transitions.get(JobState.DRAFT.value, ""))

    def executed_jobs(self, service_id: str) -> list[PredictionJob]:
        wanted = (JobState.EXECUTED, JobState.CLOSED)
        return [
            job
            for job in self._jobs.values()
            if job.service_id == service_id and job.state in wanted
        ]

    def closed_jobs_with_truth(self, service_id: str) -> list[PredictionJob]:
        return [
            job
            for job in self.executed_jobs(service_id)
            if job.state is JobState.CLOSED and job.ground_truth_ref is not None
        ]

    def quality_report(self, ref: str) -> QualityReport:
        report = self._quality_reports.get(ref)
        if report is None:
            raise NotFoundError(f"quality report {ref!r} not found")
        return report

    # -- lifecycle ---------------------------------------------------------

    def create_job(
        self,
        token: str,
        service_id: str,
        document: Mapping,
        *,
        mode: str = "clinical",
        fmt: str = "flat",
    ) -> PredictionJob:
        user = self._iam.require(token, Action.SUBMIT_PREDICTION, resource=service_id)
        if mode not in ("clinical", "academic"):
            raise GateRefusal("mode", (f"unknown mode {mode!r}",))
        if user.role.value == "researcher" and mode == "clinical":
            raise PermissionDeniedError("researchers may submit academic-mode jobs only")
        passport = self._registry.get_passport(service_id)

        result = ingest_case(
            document,
            fmt,
            clock=self._clock,
            profile=self._profiles.get(service_id),
            identifier_fields=self._identifier_fields,
        )
        case = result.case
        self._audit.append(
            AuditAction.CASE_INGESTED,
            user_id=user.user_id,
            service_id=service_id,
            detail={
                "case_id": case.case_id,
                "format": fmt,
                "recognized": result.recognized_count,
                "unrecognized": list(result.unrecognized),
            },
        )

        unit_failures: list[HardFailure] = []
        try:
            case = convert_units(case, passport.input_schema, self._units)
        except UnitConversionError as exc:
            unit_failures.append(HardFailure(exc.variable, "unit", str(exc)))

        report = assess_case(case, passport.input_schema, self._rules.get(service_id, ()))
        if unit_failures:
            report = replace(report, hard_failures=report.hard_failures + tuple(unit_failures))
        declared = {
            "contextualisation": passport.purpose,
            "predictive_value": "; ".join(passport.declared_limitations) or "not declared",
            "reliability": f"intended context: {passport.intended_context}",
        }
        report = replace(report, declared_dimensions=declared)
        self._quality_reports[report.report_id] = report

        blocked = report.verdict == "block"
        job = PredictionJob(
            job_id=uuid.uuid4().hex,
            user_id=user.user_id,
            organisation=user.organisation,
            service_id=service_id,
            passport_version=passport.version,
            mode=mode,
            case=case,
            quality_report_ref=report.report_id,
            limitations_shown=passport.declared_limitations,
            purpose_shown=passport.purpose,
            intended_context_shown=passport.intended_context,
            blocked=blocked,
            block_reasons=tuple(
                f"{f.variable}: {f.check} ({f.detail})" for f in report.hard_failures
            ),
        )
        job.transitions[JobState.DRAFT.value] = utc_ms(self._clock.now())
        with self._store_lock:
            self._jobs[job.job_id] = job
        payload_ref = self._vault.store(canonical_json(case.to_document()).encode("ascii"))
        self._audit.append(
            AuditAction.JOB_CREATED,
            user_id=user.user_id,
            service_id=service_id,
            passport_version=passport.version,
            input_hash=case_input_hash(case),
            payload_ref=payload_ref,
            detail={
                "job_id": job.job_id,
                "mode": mode,
                "blocked": blocked,
                "quality_report_ref": report.report_id,
            },
        )
        return job

    def confirm_job(self, token: str, job_id: str) -> PredictionJob:
        user = self._iam.require(token, Action.SUBMIT_PREDICTION, resource=job_id)
        job = self.get_job(job_id)
        with self._lock_for(job_id):
            if job.user_id != user.user_id:
                raise PermissionDeniedError("only the job creator may confirm it")
            if job.state is not JobState.DRAFT:
                raise StateError(f"cannot confirm a job in state {job.state.value}")

            def refuse(gate: str, reasons: Sequence[str]):
                self._audit.append(
                    AuditAction.JOB_CONFIRM_REFUSED,
                    user_id=user.user_id,
                    service_id=job.service_id,
                    passport_version=job.passport_version,
                    detail={"job_id": job_id, "gate": gate, "reasons": list(reasons)},
                )
                raise GateRefusal(gate, reasons)

            if job.blocked:
                refuse(
                    "data_quality",
                    ("predictive process stopped by quality gate",) + job.block_reasons,
                )
            if job.mode == "clinical":
                decision = self._compliance.check_regulation(
                    job.service_id,
                    self._jurisdiction,
                    "clinical",
                    user_id=user.user_id,
                )
                if not decision.clinical_allowed:
                    refuse("regulation", decision.reasons)
            else:
                if not self._compliance.has_acknowledgement(user.user_id, job.service_id):
                    refuse(
                        "disclaimer",
                        (
                            "academic use requires a stored acknowledgement of the "
                            "conditions of use before confirmation",
                        ),
                    )

            job.limitations_hash = limitations_digest(job.limitations_shown, job.purpose_shown)
            job.state = JobState.CONFIRMED
            job.transitions[JobState.CONFIRMED.value] = utc_ms(self._clock.now())
            self._audit.append(
                AuditAction.JOB_CONFIRMED,
                user_id=user.user_id,
                service_id=job.service_id,
                passport_version=job.passport_version,
                detail={
                    "job_id": job_id,
                    "mode": job.mode,
                    "limitations_hash": job.limitations_hash,
                },
            )
        return job

    def execute_job(self, token: str, job_id: str) -> PredictionJob:
        user = self._iam.require(token, Action.SUBMIT_PREDICTION, resource=job_id)
        job = self.get_job(job_id)
        with self._lock_for(job_id):
            if job.user_id != user.user_id:
                raise PermissionDeniedError("only the job creator may execute it")
            if job.state is not JobState.CONFIRMED:
                raise StateError(
                    f"execution requires a confirmed job, not {job.state.value}"
                )
            passport = self._registry.get_passport(job.service_id, job.passport_version)
            endpoint = self._registry.endpoint_for(job.service_id)
            inputs = build_model_inputs(job.case, passport.input_schema)
            request = AdapterRequest(inputs=inputs, passport_version=job.passport_version)

            try:
                response = self._adapters.predict(endpoint, request, mode=job.mode)
            except AdapterError as exc:
                job.execution_failure = str(exc)
                self._audit.append(
                    AuditAction.JOB_EXECUTION_FAILED,
                    user_id=user.user_id,
                    service_id=job.service_id,
                    passport_version=job.passport_version,
                    detail={"job_id": job_id, "reason": str(exc), "stage": "adapter"},
                )
                raise

            violations = validate_outputs(response.outputs, passport.output_schema)
            if violations:
                job.execution_failure = "output schema violation"
                self._audit.append(
                    AuditAction.JOB_EXECUTION_FAILED,
                    user_id=user.user_id,
                    service_id=job.service_id,
                    passport_version=job.passport_version,
                    detail={
                        "job_id": job_id,
                        "stage": "output_validation",
                        "violations": violations,
                        "flagged_for_auditor": True,
                    },
                )
                raise OutputSchemaError(violations)

            target = passport.output_schema[0].name
            if response.native_attributions is not None:
                attribution = native_attribution(
                    response.native_attributions,
                    prediction=float(response.outputs[target]),
                    job_id=job_id,
                )
            else:
                baseline = self._baseline_for(passport, inputs)
                model_fn = self._adapters.model_fn(
                    endpoint, job.passport_version, target, mode=job.mode
                )
                seed = int(case_input_hash(job.case)[:8], 16)
                attribution = explain(
                    model_fn,
                    inputs,
                    baseline,
                    n_samples=self._samples,
                    seed=seed,
                    exact_if_dims_le=self._exact_dims,
                    job_id=job_id,
                )

            job.outputs = dict(response.outputs)
            job.model_build_id = response.model_build_id
            job.attribution = attribution
            job.execution_failure = None
            job.state = JobState.EXECUTED
            job.transitions[JobState.EXECUTED.value] = utc_ms(self._clock.now())
            payload_ref = self._vault.store(
                canonical_json({"inputs": inputs, "outputs": job.outputs}).encode("ascii")
            )
            self._audit.append(
                AuditAction.JOB_EXECUTED,
                user_id=user.user_id,
                service_id=job.service_id,
                passport_version=job.passport_version,
                input_hash=case_input_hash(job.case),
                output_hash=outputs_hash(job.outputs),
                payload_ref=payload_ref,
                detail={
                    "job_id": job_id,
                    "model_build_id": job.model_build_id,
                    "attribution_method": attribution.method,
                },
            )
        return job

    def close_job(self, job_id: str, ground_truth_ref: str, *, user_id: str) -> PredictionJob:
        job = self.get_job(job_id)
        with self._lock_for(job_id):
            if job.state is not JobState.EXECUTED:
                raise StateError(f"cannot close a job in state {job.state.value}")
            job.ground_truth_ref = ground_truth_ref
            job.state = JobState.CLOSED
            job.transitions[JobState.CLOSED.value] = utc_ms(self._clock.now())
            self._audit.append(
                AuditAction.JOB_CLOSED,
                user_id=user_id,
                service_id=job.service_id,
                passport_version=job.passport_version,
                detail={"job_id": job_id, "ground_truth_ref": ground_truth_ref},
            )
        return job

    # -- helpers -----------------------------------------------------------

    def _baseline_for(self, passport, inputs: Mapping[str, Any]) -> dict[str, Any]:
        """Attribution baseline: declared training medians, else range midpoints."""
        medians = passport.training_descriptor.feature_medians or {}
        baseline: dict[str, Any] = {}
        for spec in passport.input_schema:
            if spec.name not in inputs:
                continue
            if spec.name in medians:
                baseline[spec.name] = medians[spec.name]
            elif spec.value_type == "numeric" and spec.valid_range is not None:
                low, high = spec.valid_range
                baseline[spec.name] = (low + high) / 2
            else:
                # Categorical or boolean without a declared median: hold the
                # observed value, contributing zero by construction.
                baseline[spec.name] = inputs[spec.name]
        return baseline
