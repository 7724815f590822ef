"""Retrospective and simulated case review sessions for continual learning.

The user estimates the outcome for each case before the model's prediction
and the known outcome are revealed; completing a session yields agreement
fractions between user, model, and ground truth at the decision threshold.
Retrospective items are anonymized: pseudo-ids are stripped and timestamps
shifted by a random per-session offset.
"""

from __future__ import annotations

import json
import random
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import timedelta
from importlib import resources
from typing import Callable, Sequence

from .adapter import AdapterClient, AdapterRequest
from .audit import AuditAction, AuditTrail
from .clock import Clock, parse_ts, utc_ms
from .errors import ConflictError, ConfigurationError, NotFoundError, PermissionDeniedError, StateError
from .gateway import GatewayService
from .iam import Action, IamService
from .registry import ServiceRegistry


def load_simulated_cases() -> list[dict]:
    data = resources.files("aegis.fixtures").joinpath("simulated_cases.json").read_text()
    return json.loads(data)["cases"]


@dataclass
class ReviewItem:
    variables: dict
    known_outcome: int
    model_prediction: float
    user_estimate: int | None = None

    def to_document(self, *, reveal: bool) -> dict:
        doc: dict = {"variables": self.variables, "answered": self.user_estimate is not None}
        if reveal:
            doc["known_outcome"] = self.known_outcome
            doc["model_prediction"] = self.model_prediction
            doc["user_estimate"] = self.user_estimate
        return doc


@dataclass(frozen=True)
class ConcordanceReport:
    user_vs_truth: float
    model_vs_truth: float
    user_vs_model: float

    def to_document(self) -> dict:
        return {
            "user_vs_truth": self.user_vs_truth,
            "model_vs_truth": self.model_vs_truth,
            "user_vs_model": self.user_vs_model,
        }


@dataclass
class ReviewSession:
    session_id: str
    user_id: str
    service_id: str
    source: str  # retrospective | simulated
    items: list[ReviewItem]
    state: str = "open"
    summary: ConcordanceReport | None = None

    def to_document(self) -> dict:
        revealed = self.state == "completed"
        return {
            "session_id": self.session_id,
            "user_id": self.user_id,
            "service_id": self.service_id,
            "source": self.source,
            "state": self.state,
            "items": [
                # Unanswered items in an open session never expose the
                # outcome or the model prediction.
                item.to_document(reveal=revealed or item.user_estimate is not None)
                for item in self.items
            ],
            "summary": self.summary.to_document() if self.summary else None,
        }


def _shift_timestamp(value: str | None, offset: timedelta) -> str | None:
    if value is None:
        return None
    try:
        return utc_ms(parse_ts(value) + offset)
    except ValueError:
        return None


class ReviewService:
    def __init__(
        self,
        *,
        gateway: GatewayService,
        registry: ServiceRegistry,
        iam: IamService,
        adapters: AdapterClient,
        audit: AuditTrail,
        clock: Clock,
        ground_truth_for: Callable[[str], object],
        threshold: float = 0.5,
    ):
        self._gateway = gateway
        self._registry = registry
        self._iam = iam
        self._adapters = adapters
        self._audit = audit
        self._clock = clock
        self._ground_truth_for = ground_truth_for
        self.threshold = threshold
        self._sessions: dict[str, ReviewSession] = {}
        self._lock = threading.Lock()

    # -- pools ---------------------------------------------------------

    def _retrospective_pool(self, service_id: str, target: str, rng: random.Random):
        offset = timedelta(days=rng.randint(30, 3650), minutes=rng.randint(0, 1439))
        pool = []
        for job in self._gateway.closed_jobs_with_truth(service_id):
            truth = self._ground_truth_for(job.job_id)
            if truth is None or target not in job.outputs:
                continue
            variables = {
                name: {
                    "value": reading.value,
                    "unit": reading.unit,
                    "observed_at": _shift_timestamp(reading.observed_at, offset),
                }
                for name, reading in job.case.variables.items()
            }
            pool.append(
                ReviewItem(
                    variables=variables,
                    known_outcome=int(truth.outcome),
                    model_prediction=float(job.outputs[target]),
                )
            )
        return pool

    def _simulated_pool(self, service_id: str, target: str, passport_version: int):
        endpoint = self._registry.endpoint_for(service_id)
        pool = []
        for fixture in load_simulated_cases():
            request = AdapterRequest(
                inputs=dict(fixture["variables"]), passport_version=passport_version
            )
            response = self._adapters.predict(endpoint, request, mode="academic")
            pool.append(
                ReviewItem(
                    variables={
                        name: {"value": value, "unit": None, "observed_at": None}
                        for name, value in fixture["variables"].items()
                    },
                    known_outcome=int(fixture["known_outcome"]),
                    model_prediction=float(response.outputs[target]),
                )
            )
        return pool

    # -- lifecycle ---------------------------------------------------------

    def create_session(
        self,
        token: str,
        service_id: str,
        *,
        n: int,
        source: str = "retrospective",
        seed: int | None = None,
    ) -> ReviewSession:
        user = self._iam.require(token, Action.CREATE_REVIEW_SESSION, resource=service_id)
        passport = self._registry.get_passport(service_id)
        target = passport.output_schema[0].name
        rng = random.Random(seed)
        if source == "retrospective":
            pool = self._retrospective_pool(service_id, target, rng)
        elif source == "simulated":
            pool = self._simulated_pool(service_id, target, passport.version)
        else:
            raise ConfigurationError(f"unknown review source {source!r}")
        if len(pool) < n:
            raise ConfigurationError(
                f"insufficient pool: requested {n}, only {len(pool)} eligible case(s)"
            )
        items = rng.sample(pool, n)
        session = ReviewSession(
            session_id=uuid.uuid4().hex,
            user_id=user.user_id,
            service_id=service_id,
            source=source,
            items=items,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        self._audit.append(
            AuditAction.REVIEW_SESSION_CREATED,
            user_id=user.user_id,
            service_id=service_id,
            detail={"session_id": session.session_id, "source": source, "n": n},
        )
        return session

    def get_session(self, session_id: str) -> ReviewSession:
        session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"review session {session_id!r} not found")
        return session

    def record_estimate(
        self, token: str, session_id: str, item_index: int, estimate: int
    ) -> dict:
        """Store the estimate, then reveal the item. Ordering is enforced:
        the reveal happens only through this call, after the write."""
        user = self._iam.require(token, Action.CREATE_REVIEW_SESSION, resource=session_id)
        session = self.get_session(session_id)
        if session.user_id != user.user_id:
            raise PermissionDeniedError("not your review session")
        if session.state != "open":
            raise StateError("session already completed")
        if not 0 <= item_index < len(session.items):
            raise NotFoundError(f"item {item_index} out of range")
        item = session.items[item_index]
        if item.user_estimate is not None:
            raise ConflictError(f"item {item_index} already answered")
        if estimate not in (0, 1):
            raise ConfigurationError("estimate must be 0 or 1")
        item.user_estimate = estimate
        return item.to_document(reveal=True)

    def complete_session(self, token: str, session_id: str) -> ConcordanceReport:
        user = self._iam.require(token, Action.CREATE_REVIEW_SESSION, resource=session_id)
        session = self.get_session(session_id)
        if session.user_id != user.user_id:
            raise PermissionDeniedError("not your review session")
        if session.state != "open":
            raise StateError("session already completed")
        unanswered = [i for i, item in enumerate(session.items) if item.user_estimate is None]
        if unanswered:
            raise StateError(f"items not yet answered: {unanswered}")
        n = len(session.items)
        model_calls = [int(item.model_prediction >= self.threshold) for item in session.items]
        truth = [item.known_outcome for item in session.items]
        estimates = [item.user_estimate for item in session.items]
        summary = ConcordanceReport(
            user_vs_truth=sum(e == t for e, t in zip(estimates, truth)) / n,
            model_vs_truth=sum(m == t for m, t in zip(model_calls, truth)) / n,
            user_vs_model=sum(e == m for e, m in zip(estimates, model_calls)) / n,
        )
        session.summary = summary
        session.state = "completed"
        # Audited as an event; per-item answers stay out of the trail.
        self._audit.append(
            AuditAction.REVIEW_SESSION_COMPLETED,
            user_id=user.user_id,
            service_id=session.service_id,
            detail={"session_id": session_id, "n": n},
        )
        return summary

    def sessions_for(self, user_id: str) -> list[ReviewSession]:
        return [s for s in self._sessions.values() if s.user_id == user_id]

    def service_has_sessions(self, service_id: str) -> bool:
        return any(s.service_id == service_id for s in self._sessions.values())
