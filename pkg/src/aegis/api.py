"""HTTP surface of the platform.

Every governance decision lives in the service modules; these handlers only
translate between HTTP and those calls. Session tokens ride in the bearer
credential header. Outside development configuration every request must
arrive over TLS (directly or via a terminating proxy setting
``x-forwarded-proto``).
"""

from __future__ import annotations

from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bias import LabeledCase
from .clock import SystemClock
from .compliance import Requirement
from .errors import (
    AdapterError,
    AegisError,
    ConfigurationError,
    ConflictError,
    DirectIdentifierError,
    FormatError,
    GateRefusal,
    MappingError,
    NotFoundError,
    OutputSchemaError,
    PassportInvalidError,
    PermissionDeniedError,
    StateError,
    UnitConversionError,
)
from .iam import Action
from .interop import ingest_case, convert_units
from .platform import GovernancePlatform
from .quality import ConsistencyRule, assess_case, assess_dataset
from .registry import parse_variable_specs
from .usability import instrument_items

_BAD_REQUEST = (
    FormatError,
    ConfigurationError,
    MappingError,
    UnitConversionError,
    DirectIdentifierError,
)


class LoginBody(BaseModel):
    user_id: str
    secret: str


class CreateUserBody(BaseModel):
    user_id: str
    display_name: str
    organisation: str
    role: str
    secret: str


class RegisterServiceBody(BaseModel):
    passport: dict
    endpoint: str


class CertificationBody(BaseModel):
    scheme: str
    certificate_number: str
    jurisdictions: list[str]
    valid_from: str
    valid_to: str
    scheme_detail: str = ""


class DisclaimerAckBody(BaseModel):
    disclaimer_text: str | None = None


class CreateJobBody(BaseModel):
    service_id: str
    document: dict
    mode: str = "clinical"
    format: str = "flat"


class GroundTruthBody(BaseModel):
    outcome: Any


class UsabilityResponseBody(BaseModel):
    service_id: str
    instrument: str
    answers: list[int]
    prompt_token: str | None = None


class BiasTestBody(BaseModel):
    cases: list[dict]
    attributes: list[str] = Field(default_factory=list)


class QualityCaseBody(BaseModel):
    schema_: list[dict] = Field(alias="schema")
    case: dict
    rules: list[dict] = Field(default_factory=list)

    model_config = {"populate_by_name": True}


class QualityDatasetBody(BaseModel):
    schema_: list[dict] = Field(alias="schema")
    cases: list[dict]

    model_config = {"populate_by_name": True}


class IngestBody(BaseModel):
    service_id: str
    document: dict
    format: str = "flat"


class ReviewCreateBody(BaseModel):
    service_id: str
    n: int
    source: str = "retrospective"


class EstimateBody(BaseModel):
    estimate: int


class ComputeSnapshotBody(BaseModel):
    window_start: str | None = None
    window_end: str | None = None
    target: str | None = None


def _parse_rules(raw_rules: list[dict]) -> tuple[ConsistencyRule, ...]:
    rules = []
    for raw in raw_rules:
        rules.append(
            ConsistencyRule(
                name=raw.get("name", f"rule-{len(rules)}"),
                left=raw["left"],
                op=raw["op"],
                right=raw["right"],
                right_is_variable=bool(raw.get("right_is_variable", False)),
            )
        )
    return tuple(rules)


def create_app(platform: GovernancePlatform) -> FastAPI:
    app = FastAPI(title="aegis", version="0.1.0")
    iam = platform.iam

    # The console is served from its own origin.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.middleware("http")
    async def require_tls(request: Request, call_next):
        if not platform.config.development:
            forwarded = request.headers.get("x-forwarded-proto", "")
            if request.url.scheme != "https" and forwarded != "https":
                return JSONResponse(
                    {"error": "transport encryption required outside development"},
                    status_code=403,
                )
        return await call_next(request)

    @app.exception_handler(AegisError)
    async def aegis_error_handler(request: Request, exc: AegisError):
        if isinstance(exc, PermissionDeniedError):
            status = 401 if exc.reason == "invalid_session" else 403
            body: dict = {"error": str(exc)}
        elif isinstance(exc, NotFoundError):
            status, body = 404, {"error": str(exc)}
        elif isinstance(exc, (ConflictError, StateError)):
            status, body = 409, {"error": str(exc)}
        elif isinstance(exc, GateRefusal):
            status = 422
            body = {"error": str(exc), "gate": exc.gate, "reasons": list(exc.reasons)}
        elif isinstance(exc, PassportInvalidError):
            status = 400
            body = {"error": str(exc), "report": exc.report.to_document()}
        elif isinstance(exc, (OutputSchemaError, AdapterError)):
            status, body = 502, {"error": str(exc)}
        elif isinstance(exc, _BAD_REQUEST):
            status, body = 400, {"error": str(exc)}
        else:
            status, body = 500, {"error": str(exc)}
        return JSONResponse(body, status_code=status)

    def bearer_token(authorization: str = Header(default="")) -> str:
        if authorization.lower().startswith("bearer "):
            return authorization[7:]
        return authorization

    def require_reader(token: str = Depends(bearer_token)) -> str:
        iam.require(token, Action.READ_CATALOG)
        return token

    # -- auth ---------------------------------------------------------------

    @app.post("/auth/login")
    def login(body: LoginBody):
        session = iam.authenticate(body.user_id, body.secret)
        account = iam.get_account(body.user_id)
        return {
            "token": session.token,
            "expires_at": session.expires_at,
            "account": account.to_public_document(),
        }

    @app.post("/auth/logout")
    def logout(token: str = Depends(bearer_token)):
        iam.logout(token)
        return {"ok": True}

    @app.get("/me")
    def me(token: str = Depends(bearer_token)):
        account = iam.session_user(token)
        if account is None:
            raise PermissionDeniedError("invalid_session")
        return account.to_public_document()

    @app.post("/users", status_code=201)
    def create_user(body: CreateUserBody, token: str = Depends(bearer_token)):
        account = iam.create_user(
            token,
            user_id=body.user_id,
            display_name=body.display_name,
            organisation=body.organisation,
            role=body.role,
            secret=body.secret,
        )
        return account.to_public_document()

    # -- configuration for the console ---------------------------------------

    @app.get("/config")
    def config():
        return {
            "disclaimer_text": platform.compliance.disclaimer_text,
            "jurisdiction": platform.config.jurisdiction,
            "decision_threshold": platform.config.decision_threshold,
        }

    # -- registry ------------------------------------------------------------

    @app.get("/services")
    def list_services(token: str = Depends(require_reader)):
        today = platform.clock.now().date().isoformat()
        entries = []
        for service_id in platform.registry.list_services():
            passport = platform.registry.get_passport(service_id)
            certifications = platform.compliance.certifications_for(service_id)
            certified = any(
                cert.covers(platform.config.jurisdiction, today) for cert in certifications
            )
            entries.append(
                {
                    "service_id": service_id,
                    "version": passport.version,
                    "purpose": passport.purpose,
                    "intended_context": passport.intended_context,
                    "manufacturer": passport.manufacturer,
                    "declared_limitations": list(passport.declared_limitations),
                    "certified_for_clinical_use": certified,
                    "certifications": [cert.to_document() for cert in certifications],
                }
            )
        return {"services": entries}

    @app.post("/services", status_code=201)
    def register_service(body: RegisterServiceBody, token: str = Depends(bearer_token)):
        user = iam.require(token, Action.REGISTER_SERVICE)
        service_id = platform.registry.register_service(
            body.passport, body.endpoint, user_id=user.user_id
        )
        return {"service_id": service_id, "version": 1}

    @app.get("/services/{service_id}/passport")
    def get_passport(
        service_id: str,
        version: int | None = Query(default=None),
        token: str = Depends(require_reader),
    ):
        passport = platform.registry.get_passport(service_id, version)
        return passport.to_document()

    # -- compliance ------------------------------------------------------

    @app.get("/services/{service_id}/regulation")
    def regulation(
        service_id: str,
        jurisdiction: str | None = Query(default=None),
        mode: str = Query(default="clinical"),
        at: str | None = Query(default=None),
        token: str = Depends(bearer_token),
    ):
        user = iam.require(token, Action.READ_CATALOG)
        decision = platform.compliance.check_regulation(
            service_id,
            jurisdiction or platform.config.jurisdiction,
            mode,
            at,
            user_id=user.user_id,
        )
        return decision.to_document()

    @app.post("/services/{service_id}/certifications", status_code=201)
    def add_certification(
        service_id: str, body: CertificationBody, token: str = Depends(bearer_token)
    ):
        user = iam.require(token, Action.MANAGE_CERTIFICATIONS)
        record = platform.compliance.add_certification(
            service_id,
            scheme=body.scheme,
            certificate_number=body.certificate_number,
            jurisdictions=body.jurisdictions,
            valid_from=body.valid_from,
            valid_to=body.valid_to,
            scheme_detail=body.scheme_detail,
            user_id=user.user_id,
        )
        return record.to_document()

    @app.post("/services/{service_id}/disclaimer-ack", status_code=201)
    def acknowledge(service_id: str, body: DisclaimerAckBody, token: str = Depends(bearer_token)):
        user = iam.require(token, Action.ACKNOWLEDGE_DISCLAIMER, resource=service_id)
        ack = platform.compliance.acknowledge_disclaimer(
            user.user_id, service_id, body.disclaimer_text
        )
        return ack.to_document()

    @app.get("/services/{service_id}/coverage")
    def coverage(service_id: str, token: str = Depends(require_reader)):
        return platform.compliance.coverage_report(service_id)

    # -- quality (standalone assessment) --------------------------------------

    @app.post("/quality/case")
    def quality_case(body: QualityCaseBody, token: str = Depends(bearer_token)):
        iam.require(token, Action.INGEST_CASE)
        schema = parse_variable_specs(body.schema_, platform.units.knows)
        result = ingest_case(
            body.case,
            "flat",
            clock=platform.clock,
            identifier_fields=platform.config.direct_identifier_fields,
        )
        case = convert_units(result.case, schema, platform.units)
        report = assess_case(case, schema, _parse_rules(body.rules))
        return report.to_document()

    @app.post("/quality/dataset")
    def quality_dataset(body: QualityDatasetBody, token: str = Depends(bearer_token)):
        iam.require(token, Action.INGEST_CASE)
        schema = parse_variable_specs(body.schema_, platform.units.knows)
        cases = []
        for raw in body.cases:
            result = ingest_case(
                raw,
                "flat",
                clock=platform.clock,
                identifier_fields=platform.config.direct_identifier_fields,
            )
            cases.append(convert_units(result.case, schema, platform.units))
        report = assess_dataset(
            cases,
            schema,
            bins=platform.config.psi_bins,
            epsilon=platform.config.psi_epsilon,
        )
        return report.to_document()

    # -- ingestion dry-run -----------------------------------------------

    @app.post("/ingest")
    def ingest(body: IngestBody, token: str = Depends(bearer_token)):
        iam.require(token, Action.INGEST_CASE)
        passport = platform.registry.get_passport(body.service_id)
        result = ingest_case(
            body.document,
            body.format,
            clock=platform.clock,
            profile=platform.gateway.profile_for(body.service_id),
            identifier_fields=platform.config.direct_identifier_fields,
        )
        case = convert_units(result.case, passport.input_schema, platform.units)
        report = assess_case(case, passport.input_schema)
        return {
            "case": case.to_document(),
            "unrecognized": list(result.unrecognized),
            "quality_report": report.to_document(),
        }

    # -- jobs ----------------------------------------------------------------

    def _job_document(job) -> dict:
        doc = job.to_document()
        doc["quality_report"] = platform.gateway.quality_report(
            job.quality_report_ref
        ).to_document()
        return doc

    @app.post("/jobs", status_code=201)
    def create_job(body: CreateJobBody, token: str = Depends(bearer_token)):
        job = platform.gateway.create_job(
            token, body.service_id, body.document, mode=body.mode, fmt=body.format
        )
        return _job_document(job)

    @app.get("/jobs")
    def list_jobs(
        user: str | None = Query(default=None),
        service: str | None = Query(default=None),
        token: str = Depends(bearer_token),
    ):
        account = iam.require(token, Action.READ_CATALOG)
        if account.role.value not in ("admin", "auditor"):
            user = account.user_id  # others see their own jobs only
        jobs = platform.gateway.list_jobs(user=user, service=service)
        return {"jobs": [_job_document(job) for job in jobs]}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str, token: str = Depends(bearer_token)):
        account = iam.require(token, Action.READ_CATALOG)
        job = platform.gateway.get_job(job_id)
        if account.role.value not in ("admin", "auditor") and job.user_id != account.user_id:
            raise PermissionDeniedError("not your job")
        return _job_document(job)

    @app.post("/jobs/{job_id}/confirm")
    def confirm_job(job_id: str, token: str = Depends(bearer_token)):
        return _job_document(platform.gateway.confirm_job(token, job_id))

    @app.post("/jobs/{job_id}/execute")
    def execute_job(job_id: str, token: str = Depends(bearer_token)):
        return _job_document(platform.gateway.execute_job(token, job_id))

    @app.get("/jobs/{job_id}/attribution")
    def attribution(job_id: str, token: str = Depends(bearer_token)):
        account = iam.require(token, Action.READ_CATALOG)
        job = platform.gateway.get_job(job_id)
        if account.role.value not in ("admin", "auditor") and job.user_id != account.user_id:
            raise PermissionDeniedError("not your job")
        if job.attribution is None:
            raise NotFoundError(f"job {job_id} has no attribution yet")
        return job.attribution.to_document()

    # -- monitoring ------------------------------------------------------

    @app.post("/jobs/{job_id}/ground-truth", status_code=201)
    def ground_truth(job_id: str, body: GroundTruthBody, token: str = Depends(bearer_token)):
        record = platform.monitor.submit_ground_truth(token, job_id, body.outcome)
        return record.to_document()

    @app.get("/services/{service_id}/performance")
    def performance(service_id: str, token: str = Depends(bearer_token)):
        iam.require(token, Action.READ_PERFORMANCE, resource=service_id)
        platform.registry.get_passport(service_id)
        return {
            "snapshots": [s.to_document() for s in platform.monitor.snapshots_for(service_id)],
            "alerts": [a.to_document() for a in platform.monitor.alerts_for(service_id)],
        }

    @app.post("/services/{service_id}/performance/compute", status_code=201)
    def compute_performance(
        service_id: str, body: ComputeSnapshotBody, token: str = Depends(bearer_token)
    ):
        user = iam.require(token, Action.COMPUTE_SNAPSHOT, resource=service_id)
        window = None
        if body.window_start and body.window_end:
            window = (body.window_start, body.window_end)
        snapshot = platform.monitor.compute_snapshot(
            service_id, window, target=body.target, user_id=user.user_id
        )
        alert = platform.monitor.detect_drift(service_id)
        return {
            "snapshot": snapshot.to_document(),
            "drift_alert": alert.to_document() if alert else None,
        }

    # -- bias -----------------------------------------------------------------

    @app.post("/services/{service_id}/bias-test", status_code=201)
    def bias_test(service_id: str, body: BiasTestBody, token: str = Depends(bearer_token)):
        user = iam.require(token, Action.RUN_BIAS_TEST, resource=service_id)
        cases = [
            LabeledCase(
                inputs=dict(raw["inputs"]),
                label=int(raw["label"]),
                attributes=dict(raw.get("attributes", {})),
            )
            for raw in body.cases
        ]
        report = platform.bias.run_bias_test(
            service_id, cases, attributes=body.attributes, user_id=user.user_id
        )
        return report.to_document()

    @app.get("/services/{service_id}/bias")
    def bias_reports(service_id: str, token: str = Depends(require_reader)):
        passport = platform.registry.get_passport(service_id)
        return {
            "declared_limitations": list(passport.declared_limitations),
            "reports": [r.to_document() for r in platform.bias.reports_for(service_id)],
        }

    # -- usability -------------------------------------------------------

    @app.get("/usability/prompt")
    def usability_prompt(service: str = Query(...), token: str = Depends(bearer_token)):
        prompt = platform.usability.schedule_prompt(token, service)
        if prompt is None:
            return {"prompt": None}
        return {
            "prompt": {
                "token": prompt.token,
                "service_id": prompt.service_id,
                "issued_at": prompt.issued_at,
            }
        }

    @app.get("/usability/items")
    def usability_items(instrument: str = Query(...)):
        return instrument_items(instrument)

    @app.post("/usability/responses", status_code=201)
    def usability_response(body: UsabilityResponseBody, token: str = Depends(bearer_token)):
        response = platform.usability.submit_response(
            token,
            body.service_id,
            body.instrument,
            body.answers,
            prompt_token=body.prompt_token,
        )
        return response.to_document()

    @app.get("/services/{service_id}/usability")
    def usability_scores(service_id: str, token: str = Depends(bearer_token)):
        iam.require(token, Action.READ_PERFORMANCE, resource=service_id)
        platform.registry.get_passport(service_id)
        return {
            "scores": [s.to_document() for s in platform.usability.scores_for(service_id)]
        }

    @app.post("/services/{service_id}/usability/aggregate", status_code=201)
    def usability_aggregate(service_id: str, token: str = Depends(bearer_token)):
        user = iam.require(token, Action.COMPUTE_SNAPSHOT, resource=service_id)
        scores = platform.usability.aggregate(service_id, user_id=user.user_id)
        return {"scores": [s.to_document() for s in scores]}

    # -- review ---------------------------------------------------------------

    @app.post("/review/sessions", status_code=201)
    def create_review(body: ReviewCreateBody, token: str = Depends(bearer_token)):
        session = platform.review.create_session(
            token, body.service_id, n=body.n, source=body.source
        )
        return session.to_document()

    @app.get("/review/sessions/{session_id}")
    def get_review(session_id: str, token: str = Depends(bearer_token)):
        account = iam.require(token, Action.READ_CATALOG)
        session = platform.review.get_session(session_id)
        if session.user_id != account.user_id:
            raise PermissionDeniedError("not your review session")
        return session.to_document()

    @app.post("/review/sessions/{session_id}/items/{item_index}/estimate")
    def record_estimate(
        session_id: str, item_index: int, body: EstimateBody, token: str = Depends(bearer_token)
    ):
        return platform.review.record_estimate(token, session_id, item_index, body.estimate)

    @app.post("/review/sessions/{session_id}/complete")
    def complete_review(session_id: str, token: str = Depends(bearer_token)):
        report = platform.review.complete_session(token, session_id)
        return report.to_document()

    # -- audit ----------------------------------------------------------------

    @app.get("/audit")
    def audit_query(
        user: str | None = Query(default=None),
        service: str | None = Query(default=None),
        action: str | None = Query(default=None),
        ts_from: str | None = Query(default=None, alias="from"),
        ts_to: str | None = Query(default=None, alias="to"),
        offset: int = Query(default=0, ge=0),
        limit: int = Query(default=100, ge=1, le=1000),
        token: str = Depends(bearer_token),
    ):
        iam.require(token, Action.READ_AUDIT)
        records = platform.audit.query(
            user=user,
            service=service,
            action=action,
            ts_from=ts_from,
            ts_to=ts_to,
            offset=offset,
            limit=limit,
        )
        fields = [record.chained_fields() for record in records]
        for field_doc, record in zip(fields, records):
            field_doc["record_hash"] = record.record_hash
        return {"records": fields, "total": len(platform.audit)}

    @app.get("/audit/verify")
    def audit_verify(token: str = Depends(bearer_token)):
        iam.require(token, Action.READ_AUDIT)
        status = platform.audit.verify_chain()
        return {"ok": status.ok, "first_bad_seq": status.first_bad_seq, "checked": status.checked}

    return app


def create_adapter_app(model) -> FastAPI:
    """Minimal wire-level model service implementing the adapter contract."""
    app = FastAPI(title="model-adapter")

    @app.post("/predict")
    def predict(body: dict):
        inputs = body.get("inputs")
        if not isinstance(inputs, dict):
            raise HTTPException(status_code=400, detail="body needs 'inputs'")
        try:
            outputs = model.predict(inputs)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return {
            "outputs": outputs,
            "model_build_id": getattr(model, "build_id", "unknown"),
            "native_attributions": None,
        }

    return app
