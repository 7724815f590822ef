"""Wires every module into one governed platform instance."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .adapter import AdapterClient
from .audit import AuditTrail, FileSegmentStore, MemorySegmentStore
from .bias import BiasService
from .clock import Clock, SystemClock
from .compliance import ComplianceService, Requirement
from .config import PlatformConfig
from .errors import NotFoundError
from .gateway import GatewayService
from .iam import IamService, Role
from .interop import MappingProfile, ProfileEntry, UnitTable
from .monitor import MonitorService
from .quality import ConsistencyRule
from .registry import ServiceRegistry
from .review import ReviewService
from .stub_model import StubPalliativeModel
from .usability import UsabilityService
from .vault import PayloadVault


def load_stub_passport() -> dict:
    data = resources.files("aegis.fixtures").joinpath("stub_passport.json").read_text()
    return json.loads(data)


# Population constraint of the bundled stub service; violations are soft
# findings, not hard blocks.
STUB_RULES = (
    ConsistencyRule(name="intended population is 65 and over", left="age", op=">=", right=65),
)


class GovernancePlatform:
    def __init__(self, config: PlatformConfig | None = None, clock: Clock | None = None):
        self.config = config or PlatformConfig()
        self.clock = clock or SystemClock()
        data_dir = self.config.resolved_data_dir()

        if data_dir is None:
            store = MemorySegmentStore()
            self.vault = PayloadVault()
        else:
            store = FileSegmentStore(
                data_dir / "audit", max_segment_bytes=self.config.audit_segment_bytes
            )
            self.vault = PayloadVault(data_dir / "payloads")

        self.audit = AuditTrail(
            store, clock=self.clock, digest_algorithm=self.config.digest_algorithm
        )
        self.units = UnitTable.default()
        self.registry = ServiceRegistry(self.audit, unit_known=self.units.knows)
        self.iam = IamService(
            self.audit,
            self.clock,
            session_lifetime_hours=self.config.session_lifetime_hours,
            scrypt_cost=self.config.scrypt_cost,
        )
        self.compliance = ComplianceService(
            self.audit,
            self.clock,
            service_exists=lambda sid: sid in self.registry.list_services(),
            disclaimer_text=self.config.disclaimer_text,
        )
        self.adapters = AdapterClient(
            timeout_seconds=self.config.adapter_timeout_seconds,
            max_concurrency=self.config.adapter_max_concurrency,
            academic_retry_limit=self.config.academic_retry_limit,
        )
        self.gateway = GatewayService(
            registry=self.registry,
            iam=self.iam,
            compliance=self.compliance,
            adapters=self.adapters,
            audit=self.audit,
            vault=self.vault,
            clock=self.clock,
            units=self.units,
            jurisdiction=self.config.jurisdiction,
            identifier_fields=self.config.direct_identifier_fields,
            exact_shapley_max_dims=self.config.exact_shapley_max_dims,
            shapley_samples=self.config.shapley_samples,
        )
        self.monitor = MonitorService(
            gateway=self.gateway,
            registry=self.registry,
            iam=self.iam,
            audit=self.audit,
            clock=self.clock,
            min_n=self.config.snapshot_min_n,
            drift_delta=self.config.drift_delta,
            threshold=self.config.decision_threshold,
            same_organisation_only=self.config.ground_truth_same_organisation,
        )
        self.usability = UsabilityService(
            registry=self.registry,
            iam=self.iam,
            audit=self.audit,
            clock=self.clock,
            cadence_days=self.config.usability_cadence_days,
        )
        self.bias = BiasService(
            registry=self.registry,
            iam=self.iam,
            adapters=self.adapters,
            audit=self.audit,
            clock=self.clock,
            threshold=self.config.decision_threshold,
            min_group_n=self.config.min_bias_group_n,
        )
        self.review = ReviewService(
            gateway=self.gateway,
            registry=self.registry,
            iam=self.iam,
            adapters=self.adapters,
            audit=self.audit,
            clock=self.clock,
            ground_truth_for=self.monitor.ground_truth_for,
            threshold=self.config.decision_threshold,
        )

        # Snapshot references live in monitor or usability.
        self.registry.snapshot_exists = lambda ref: (
            self.monitor.has_snapshot(ref) or self.usability.has_score(ref)
        )
        self.compliance.evidence_probes = self._build_evidence_probes()

    def _build_evidence_probes(self):
        always = lambda service_id: True
        return {
            Requirement.AI_PASSPORT: always,
            Requirement.USER_MANAGEMENT: always,
            Requirement.REGULATION_CHECK: lambda sid: bool(
                self.compliance.certifications_for(sid)
            ),
            Requirement.ACADEMIC_USE_DISCLAIMER: always,
            Requirement.DATA_QUALITY_ASSESSMENT: always,
            Requirement.CLINICIANS_DOUBLE_CHECK: always,
            Requirement.CONTINUOUS_PERFORMANCE_EVALUATION: lambda sid: bool(
                self.monitor.snapshots_for(sid)
            ),
            Requirement.AUDIT_TRAIL: always,
            Requirement.CONTINUOUS_USABILITY_TEST: lambda sid: bool(
                self.usability.scores_for(sid)
            ),
            Requirement.REVIEW_OF_CASES: self.review.service_has_sessions,
            Requirement.BIAS_CHECK: lambda sid: bool(
                self.registry.get_passport(sid).declared_limitations
                or self.bias.reports_for(sid)
            ),
            Requirement.EXPLAINABLE_AI: always,
            Requirement.ENCRYPTION_FIELD_TESTED_LIBRARIES: always,
            Requirement.SEMANTIC_INTEROPERABILITY: lambda sid: (
                self.gateway.profile_for(sid) is not None
            ),
        }

    # -- demo / test seeding -------------------------------------------------

    def seed_demo(self) -> dict:
        """Users, the certified stub service, and an uncertified prototype.

        Returns the secrets so demos and end-to-end tests can log in.
        """
        users = {
            "admin": ("ada.admin", "admin-secret", Role.ADMIN),
            "clinician": ("clara.clinician", "clinician-secret", Role.CLINICIAN),
            "researcher": ("rene.researcher", "researcher-secret", Role.RESEARCHER),
            "auditor": ("austin.auditor", "auditor-secret", Role.AUDITOR),
        }
        admin_id, admin_secret, _ = users["admin"]
        self.iam.bootstrap_admin(admin_id, admin_secret, organisation="demo-hospital")
        admin_session = self.iam.authenticate(admin_id, admin_secret)
        for key, (user_id, secret, role) in users.items():
            if key == "admin":
                continue
            self.iam.create_user(
                admin_session.token,
                user_id=user_id,
                display_name=user_id.replace(".", " ").title(),
                organisation="demo-hospital",
                role=role,
                secret=secret,
            )

        endpoint = self.adapters.register_local("stub-palliative", StubPalliativeModel())

        passport = load_stub_passport()
        service_id = self.registry.register_service(passport, endpoint, user_id=admin_id)
        self.gateway.set_rules(service_id, STUB_RULES)
        self.gateway.set_profile(
            MappingProfile(
                service_id=service_id,
                entries={
                    "admission.age": ProfileEntry("age", unit="a"),
                    "functional.barthel": ProfileEntry("barthel_index", unit="{score}"),
                    "comorbidity.charlson": ProfileEntry("charlson_index", unit="{score}"),
                    "laboratory.creatinine": ProfileEntry("creatinine"),
                    "laboratory.albumin": ProfileEntry("albumin"),
                },
            )
        )
        self.compliance.add_certification(
            service_id,
            scheme="CE_MDR_2017_745",
            certificate_number="CE-0123-456789",
            jurisdictions=["ES", "FR", "DE", "IT", "PT"],
            valid_from="2023-01-01",
            valid_to="2028-01-01",
            user_id=admin_id,
        )

        proto_passport = dict(load_stub_passport())
        proto_passport["service_id"] = "stub-palliative-proto"
        proto_passport["purpose"] = (
            "Prototype rebuild of the palliative predictions; not certified for clinical use."
        )
        proto_id = self.registry.register_service(proto_passport, endpoint, user_id=admin_id)
        self.gateway.set_rules(proto_id, STUB_RULES)

        self.iam.logout(admin_session.token)
        return {
            "services": {"certified": service_id, "uncertified": proto_id},
            "users": {
                key: {"user_id": user_id, "secret": secret, "role": role.value}
                for key, (user_id, secret, role) in users.items()
            },
        }
