"""Regulation gating, academic disclaimer flow, and the risk-coverage matrix.

The matrix maps the seven catalogued risks of clinical AI deployments to the
fourteen mitigation requirements this platform implements. Coverage reports
surface evidence, never a verdict: a risk counts "covered" when at least one
mitigating requirement is enabled, and the full gap set is always listed.
"""

from __future__ import annotations

import hashlib
import threading
import uuid
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Callable, Mapping

from .audit import AuditAction, AuditTrail
from .clock import Clock, utc_ms
from .errors import ConfigurationError, NotFoundError


class Requirement(str, Enum):
    """The fourteen risk-mitigation functional requirements."""

    AI_PASSPORT = "ai_passport"
    USER_MANAGEMENT = "user_management"
    REGULATION_CHECK = "regulation_check"
    ACADEMIC_USE_DISCLAIMER = "academic_use_disclaimer"
    DATA_QUALITY_ASSESSMENT = "data_quality_assessment"
    CLINICIANS_DOUBLE_CHECK = "clinicians_double_check"
    CONTINUOUS_PERFORMANCE_EVALUATION = "continuous_performance_evaluation"
    AUDIT_TRAIL = "audit_trail"
    CONTINUOUS_USABILITY_TEST = "continuous_usability_test"
    REVIEW_OF_CASES = "review_of_cases"
    BIAS_CHECK = "bias_check"
    EXPLAINABLE_AI = "explainable_ai"
    ENCRYPTION_FIELD_TESTED_LIBRARIES = "encryption_field_tested_libraries"
    SEMANTIC_INTEROPERABILITY = "semantic_interoperability"


class Risk(int, Enum):
    """The seven risks of harm, numbered as catalogued."""

    PATIENT_HARM_FROM_AI_ERRORS = 1
    MISUSE_OF_MEDICAL_AI = 2
    BIAS_AND_INEQUITIES = 3
    LACK_OF_TRANSPARENCY = 4
    PRIVACY_AND_SECURITY = 5
    GAPS_IN_ACCOUNTABILITY = 6
    IMPLEMENTATION_OBSTACLES = 7


RISK_LABELS: dict[Risk, str] = {
    Risk.PATIENT_HARM_FROM_AI_ERRORS: "patient harm due to AI errors",
    Risk.MISUSE_OF_MEDICAL_AI: "misuse of medical AI tools",
    Risk.BIAS_AND_INEQUITIES: "bias in AI and the perpetuation of existing inequities",
    Risk.LACK_OF_TRANSPARENCY: "lack of transparency",
    Risk.PRIVACY_AND_SECURITY: "privacy and security issues",
    Risk.GAPS_IN_ACCOUNTABILITY: "gaps in accountability",
    Risk.IMPLEMENTATION_OBSTACLES: "obstacles in implementation",
}

_R = Requirement

# Which requirements mitigate which risk. A golden test pins this table
# against a checked-in transcription; any drift fails CI.
RISK_MITIGATION_MATRIX: dict[Risk, frozenset[Requirement]] = {
    Risk.PATIENT_HARM_FROM_AI_ERRORS: frozenset(
        {
            _R.DATA_QUALITY_ASSESSMENT,
            _R.CONTINUOUS_PERFORMANCE_EVALUATION,
            _R.AI_PASSPORT,
            _R.CLINICIANS_DOUBLE_CHECK,
        }
    ),
    Risk.MISUSE_OF_MEDICAL_AI: frozenset(
        {
            _R.AI_PASSPORT,
            _R.USER_MANAGEMENT,
            _R.CONTINUOUS_USABILITY_TEST,
        }
    ),
    Risk.BIAS_AND_INEQUITIES: frozenset(
        {
            _R.AI_PASSPORT,
            _R.BIAS_CHECK,
            _R.CLINICIANS_DOUBLE_CHECK,
        }
    ),
    Risk.LACK_OF_TRANSPARENCY: frozenset(
        {
            _R.AI_PASSPORT,
            _R.USER_MANAGEMENT,
            _R.ACADEMIC_USE_DISCLAIMER,
            _R.CLINICIANS_DOUBLE_CHECK,
            _R.AUDIT_TRAIL,
            _R.REVIEW_OF_CASES,
            _R.BIAS_CHECK,
            _R.EXPLAINABLE_AI,
        }
    ),
    Risk.PRIVACY_AND_SECURITY: frozenset(
        {
            _R.USER_MANAGEMENT,
            _R.ENCRYPTION_FIELD_TESTED_LIBRARIES,
        }
    ),
    Risk.GAPS_IN_ACCOUNTABILITY: frozenset(
        {
            _R.AI_PASSPORT,
            _R.USER_MANAGEMENT,
            _R.REGULATION_CHECK,
            _R.ACADEMIC_USE_DISCLAIMER,
            _R.CLINICIANS_DOUBLE_CHECK,
            _R.AUDIT_TRAIL,
            _R.BIAS_CHECK,
            _R.EXPLAINABLE_AI,
            _R.ENCRYPTION_FIELD_TESTED_LIBRARIES,
        }
    ),
    Risk.IMPLEMENTATION_OBSTACLES: frozenset(
        {
            _R.DATA_QUALITY_ASSESSMENT,
            _R.CLINICIANS_DOUBLE_CHECK,
            _R.CONTINUOUS_PERFORMANCE_EVALUATION,
            _R.CONTINUOUS_USABILITY_TEST,
            _R.BIAS_CHECK,
            _R.SEMANTIC_INTEROPERABILITY,
            _R.EXPLAINABLE_AI,
        }
    ),
}

assert set(RISK_MITIGATION_MATRIX) == set(Risk)


class CertificationScheme(str, Enum):
    CE_MDR_2017_745 = "CE_MDR_2017_745"
    FDA = "FDA"
    OTHER = "other"


@dataclass(frozen=True)
class CertificationRecord:
    record_id: str
    service_id: str
    scheme: CertificationScheme
    certificate_number: str
    jurisdictions: frozenset[str]
    valid_from: str  # ISO dates
    valid_to: str
    scheme_detail: str = ""  # free text when scheme is "other"

    def __post_init__(self):
        if not self.jurisdictions:
            raise ConfigurationError("certification needs at least one jurisdiction")
        if self.valid_from > self.valid_to:
            raise ConfigurationError("certification valid_from after valid_to")

    def covers(self, jurisdiction: str, at: str) -> bool:
        return jurisdiction in self.jurisdictions and self.valid_from <= at <= self.valid_to

    def to_document(self) -> dict:
        return {
            "record_id": self.record_id,
            "service_id": self.service_id,
            "scheme": self.scheme.value,
            "scheme_detail": self.scheme_detail,
            "certificate_number": self.certificate_number,
            "jurisdictions": sorted(self.jurisdictions),
            "valid_from": self.valid_from,
            "valid_to": self.valid_to,
        }


@dataclass(frozen=True)
class DisclaimerAcknowledgement:
    user_id: str
    service_id: str
    disclaimer_text_hash: str
    acknowledged_at: str

    def to_document(self) -> dict:
        return {
            "user_id": self.user_id,
            "service_id": self.service_id,
            "disclaimer_text_hash": self.disclaimer_text_hash,
            "acknowledged_at": self.acknowledged_at,
        }


@dataclass(frozen=True)
class RegulationDecision:
    clinical_allowed: bool
    disclaimer_required: bool
    reasons: tuple[str, ...]

    def to_document(self) -> dict:
        return {
            "clinical_allowed": self.clinical_allowed,
            "disclaimer_required": self.disclaimer_required,
            "reasons": list(self.reasons),
        }


def disclaimer_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class ComplianceService:
    def __init__(
        self,
        audit: AuditTrail,
        clock: Clock,
        *,
        service_exists: Callable[[str], bool],
        disclaimer_text: str = "Only for academic purposes",
    ):
        self._audit = audit
        self._clock = clock
        self._service_exists = service_exists
        self.disclaimer_text = disclaimer_text
        self._certifications: dict[str, list[CertificationRecord]] = {}
        self._acknowledgements: list[DisclaimerAcknowledgement] = []
        self._lock = threading.Lock()
        # Evidence probes for coverage reports; the platform wires these to
        # the modules that actually hold the evidence.
        self.evidence_probes: dict[Requirement, Callable[[str], bool]] = {}

    # -- certifications ------------------------------------------------

    def add_certification(
        self,
        service_id: str,
        *,
        scheme: CertificationScheme | str,
        certificate_number: str,
        jurisdictions,
        valid_from: str,
        valid_to: str,
        scheme_detail: str = "",
        user_id: str = "system",
    ) -> CertificationRecord:
        if not self._service_exists(service_id):
            raise NotFoundError(f"service {service_id!r} not registered")
        record = CertificationRecord(
            record_id=uuid.uuid4().hex,
            service_id=service_id,
            scheme=CertificationScheme(scheme),
            certificate_number=certificate_number,
            jurisdictions=frozenset(jurisdictions),
            valid_from=valid_from,
            valid_to=valid_to,
            scheme_detail=scheme_detail,
        )
        with self._lock:
            self._certifications.setdefault(service_id, []).append(record)
        self._audit.append(
            AuditAction.CERTIFICATION_ADDED,
            user_id=user_id,
            service_id=service_id,
            detail={"scheme": record.scheme.value, "record_id": record.record_id},
        )
        return record

    def certifications_for(self, service_id: str) -> list[CertificationRecord]:
        return list(self._certifications.get(service_id, []))

    # -- regulation check ------------------------------------------------

    def check_regulation(
        self,
        service_id: str,
        jurisdiction: str,
        mode: str,
        at: str | date | None = None,
        *,
        user_id: str = "system",
        record: bool = True,
    ) -> RegulationDecision:
        """Decide whether clinical use is allowed here and now.

        Pure given the certification store and the date; pass ``at`` to
        evaluate expiry at any point in time.
        """
        if mode not in ("clinical", "academic"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        if not self._service_exists(service_id):
            raise NotFoundError(f"service {service_id!r} not registered")
        if at is None:
            at = self._clock.now().date().isoformat()
        elif isinstance(at, date):
            at = at.isoformat()

        records = self._certifications.get(service_id, [])
        reasons: list[str] = []
        clinical_allowed = False
        for cert in records:
            if jurisdiction not in cert.jurisdictions:
                reasons.append(
                    f"{cert.scheme.value} {cert.certificate_number} does not cover {jurisdiction}"
                )
                continue
            if at < cert.valid_from:
                reasons.append(f"certificate {cert.certificate_number} not yet valid")
            elif at > cert.valid_to:
                reasons.append(f"certificate {cert.certificate_number} expired")
            else:
                clinical_allowed = True
                reasons = [
                    f"covered by {cert.scheme.value} {cert.certificate_number} until {cert.valid_to}"
                ]
                break
        if not records:
            reasons.append("no certification records on file")

        decision = RegulationDecision(
            clinical_allowed=clinical_allowed,
            # Academic use is always possible but rides on the disclaimer.
            disclaimer_required=(mode == "academic") or not clinical_allowed,
            reasons=tuple(reasons),
        )
        if record:
            self._audit.append(
                AuditAction.REGULATION_CHECKED,
                user_id=user_id,
                service_id=service_id,
                detail={
                    "jurisdiction": jurisdiction,
                    "mode": mode,
                    "at": at,
                    **decision.to_document(),
                },
            )
        return decision

    # -- disclaimers -------------------------------------------------------

    def acknowledge_disclaimer(
        self, user_id: str, service_id: str, disclaimer_text: str | None = None
    ) -> DisclaimerAcknowledgement:
        if not self._service_exists(service_id):
            raise NotFoundError(f"service {service_id!r} not registered")
        text = disclaimer_text if disclaimer_text is not None else self.disclaimer_text
        ack = DisclaimerAcknowledgement(
            user_id=user_id,
            service_id=service_id,
            disclaimer_text_hash=disclaimer_hash(text),
            acknowledged_at=utc_ms(self._clock.now()),
        )
        with self._lock:
            self._acknowledgements.append(ack)
        self._audit.append(
            AuditAction.DISCLAIMER_ACKNOWLEDGED,
            user_id=user_id,
            service_id=service_id,
            detail={"disclaimer_text_hash": ack.disclaimer_text_hash},
        )
        return ack

    def has_acknowledgement(
        self, user_id: str, service_id: str, disclaimer_text: str | None = None
    ) -> bool:
        text = disclaimer_text if disclaimer_text is not None else self.disclaimer_text
        wanted = disclaimer_hash(text)
        return any(
            ack.user_id == user_id
            and ack.service_id == service_id
            and ack.disclaimer_text_hash == wanted
            for ack in self._acknowledgements
        )

    def acknowledgements_for(self, service_id: str) -> list[DisclaimerAcknowledgement]:
        return [a for a in self._acknowledgements if a.service_id == service_id]

    # -- coverage ------------------------------------------------------

    def enabled_requirements(self, service_id: str) -> frozenset[Requirement]:
        """Evidence-derived view of which requirements are live for a service."""
        enabled = set()
        for requirement in Requirement:
            probe = self.evidence_probes.get(requirement)
            if probe is not None and probe(service_id):
                enabled.add(requirement)
        return frozenset(enabled)

    def coverage_report(
        self, service_id: str, enabled: frozenset[Requirement] | None = None
    ) -> dict:
        if not self._service_exists(service_id):
            raise NotFoundError(f"service {service_id!r} not registered")
        if enabled is None:
            enabled = self.enabled_requirements(service_id)
        else:
            enabled = frozenset(Requirement(r) for r in enabled)
        rows = []
        for risk in Risk:
            mitigating = RISK_MITIGATION_MATRIX[risk]
            active = mitigating & enabled
            rows.append(
                {
                    "risk": risk.value,
                    "label": RISK_LABELS[risk],
                    "mitigating_requirements": sorted(r.value for r in mitigating),
                    "enabled": sorted(r.value for r in active),
                    "gaps": sorted(r.value for r in mitigating - enabled),
                    "covered": bool(active),
                }
            )
        return {
            "service_id": service_id,
            "enabled_requirements": sorted(r.value for r in enabled),
            "risks": rows,
        }
