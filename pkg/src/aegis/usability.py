"""Continuous usability measurement through SUS and UEQ-S instruments.

The console's chat widget redeems prompt tokens issued here, walks the user
through the questionnaire, and posts the answers back. Scores aggregate
over complete responses only and are appended to the service passport.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from datetime import timedelta
from importlib import resources
from typing import Sequence

from .audit import AuditAction, AuditTrail
from .clock import Clock, parse_ts, utc_ms
from .errors import ConfigurationError, NotFoundError
from .iam import Action, IamService
from .registry import ServiceRegistry

SUS_ITEM_COUNT = 10
UEQS_ITEM_COUNT = 8


def instrument_items(instrument: str) -> dict:
    name = {"SUS": "sus_items.json", "UEQ_S": "ueqs_items.json"}.get(instrument)
    if name is None:
        raise ConfigurationError(f"unknown instrument {instrument!r}")
    return json.loads(resources.files("aegis.fixtures").joinpath(name).read_text())


def score_sus(answers: Sequence[int]) -> float:
    """Standard SUS rule: odd items contribute (answer - 1), even items
    (5 - answer); the sum is scaled by 2.5 onto 0..100."""
    if len(answers) != SUS_ITEM_COUNT:
        raise ConfigurationError(f"SUS needs exactly {SUS_ITEM_COUNT} answers")
    if any(not isinstance(a, int) or isinstance(a, bool) or not 1 <= a <= 5 for a in answers):
        raise ConfigurationError("SUS answers must be integers in 1..5")
    total = 0
    for position, answer in enumerate(answers, start=1):
        total += (answer - 1) if position % 2 == 1 else (5 - answer)
    return total * 2.5


def score_ueqs(answers: Sequence[int]) -> dict[str, float]:
    """UEQ-S: answers shift to -3..+3; items 1-4 are the pragmatic
    subscale, items 5-8 the hedonic one, overall is the mean of all."""
    if len(answers) != UEQS_ITEM_COUNT:
        raise ConfigurationError(f"UEQ-S needs exactly {UEQS_ITEM_COUNT} answers")
    if any(not isinstance(a, int) or isinstance(a, bool) or not 1 <= a <= 7 for a in answers):
        raise ConfigurationError("UEQ-S answers must be integers in 1..7")
    shifted = [a - 4 for a in answers]
    pragmatic = sum(shifted[:4]) / 4
    hedonic = sum(shifted[4:]) / 4
    return {
        "pragmatic": pragmatic,
        "hedonic": hedonic,
        "overall": sum(shifted) / 8,
    }


@dataclass(frozen=True)
class UsabilityResponse:
    response_id: str
    user_id: str
    service_id: str
    instrument: str
    item_answers: tuple[int, ...]
    answered_at: str
    complete: bool

    def to_document(self) -> dict:
        return {
            "response_id": self.response_id,
            "user_id": self.user_id,
            "service_id": self.service_id,
            "instrument": self.instrument,
            "item_answers": list(self.item_answers),
            "answered_at": self.answered_at,
            "complete": self.complete,
        }


@dataclass(frozen=True)
class UsabilityScore:
    score_id: str
    service_id: str
    instrument: str
    value: float | dict[str, float]
    n: int
    window: tuple[str, str]
    computed_at: str

    def to_document(self) -> dict:
        return {
            "score_id": self.score_id,
            "service_id": self.service_id,
            "instrument": self.instrument,
            "value": self.value,
            "n": self.n,
            "window": list(self.window),
            "computed_at": self.computed_at,
        }


@dataclass
class PromptToken:
    token: str
    user_id: str
    service_id: str
    issued_at: str
    open: bool = True


class UsabilityService:
    def __init__(
        self,
        *,
        registry: ServiceRegistry,
        iam: IamService,
        audit: AuditTrail,
        clock: Clock,
        cadence_days: int = 14,
    ):
        self._registry = registry
        self._iam = iam
        self._audit = audit
        self._clock = clock
        self.cadence = timedelta(days=cadence_days)
        self._responses: list[UsabilityResponse] = []
        self._prompts: dict[tuple[str, str], PromptToken] = {}
        self._scores: dict[str, UsabilityScore] = {}
        self._per_service_scores: dict[str, list[str]] = {}
        self._lock = threading.Lock()

    # -- prompt scheduling -------------------------------------------------

    def schedule_prompt(self, token: str, service_id: str) -> PromptToken | None:
        """At most one open prompt per (user, service); at most one issued
        per cadence window. Returns the open prompt when one exists."""
        user = self._iam.require(token, Action.SUBMIT_USABILITY_RESPONSE, resource=service_id)
        key = (user.user_id, service_id)
        now = self._clock.now()
        with self._lock:
            existing = self._prompts.get(key)
            if existing is not None:
                if existing.open:
                    return existing
                if now - parse_ts(existing.issued_at) < self.cadence:
                    return None
            prompt = PromptToken(
                token=uuid.uuid4().hex,
                user_id=user.user_id,
                service_id=service_id,
                issued_at=utc_ms(now),
            )
            self._prompts[key] = prompt
        self._audit.append(
            AuditAction.USABILITY_PROMPT_ISSUED,
            user_id=user.user_id,
            service_id=service_id,
            detail={"prompt_token": prompt.token},
        )
        return prompt

    # -- responses -----------------------------------------------------

    def submit_response(
        self,
        token: str,
        service_id: str,
        instrument: str,
        answers: Sequence[int],
        *,
        prompt_token: str | None = None,
    ) -> UsabilityResponse:
        user = self._iam.require(token, Action.SUBMIT_USABILITY_RESPONSE, resource=service_id)
        if instrument not in ("SUS", "UEQ_S"):
            raise ConfigurationError(f"unknown instrument {instrument!r}")
        expected = SUS_ITEM_COUNT if instrument == "SUS" else UEQS_ITEM_COUNT
        top = 5 if instrument == "SUS" else 7
        if any(not isinstance(a, int) or isinstance(a, bool) or not 1 <= a <= top for a in answers):
            raise ConfigurationError(f"answers must be integers in 1..{top}")
        if len(answers) > expected:
            raise ConfigurationError(f"{instrument} has only {expected} items")
        response = UsabilityResponse(
            response_id=uuid.uuid4().hex,
            user_id=user.user_id,
            service_id=service_id,
            instrument=instrument,
            item_answers=tuple(answers),
            answered_at=utc_ms(self._clock.now()),
            complete=len(answers) == expected,
        )
        with self._lock:
            self._responses.append(response)
            prompt = self._prompts.get((user.user_id, service_id))
            if prompt is not None and (prompt_token is None or prompt.token == prompt_token):
                prompt.open = False
        self._audit.append(
            AuditAction.USABILITY_RESPONSE_RECORDED,
            user_id=user.user_id,
            service_id=service_id,
            detail={
                "response_id": response.response_id,
                "instrument": instrument,
                "complete": response.complete,
            },
        )
        return response

    def responses_for(self, service_id: str) -> list[UsabilityResponse]:
        return [r for r in self._responses if r.service_id == service_id]

    # -- aggregation ---------------------------------------------------

    def aggregate(
        self,
        service_id: str,
        window: tuple[str, str] | None = None,
        *,
        user_id: str = "system",
        append_to_passport: bool = True,
    ) -> list[UsabilityScore]:
        """Mean scores over complete responses in the window, per instrument."""
        self._registry.get_passport(service_id)
        if window is None:
            window = ("0000-01-01", "9999-12-31")
        start, end = window
        scores: list[UsabilityScore] = []
        for instrument in ("SUS", "UEQ_S"):
            rows = [
                r
                for r in self._responses
                if r.service_id == service_id
                and r.instrument == instrument
                and r.complete
                and start <= r.answered_at[:10] <= end
            ]
            if not rows:
                continue
            if instrument == "SUS":
                values = [score_sus(r.item_answers) for r in rows]
                value: float | dict[str, float] = sum(values) / len(values)
            else:
                triples = [score_ueqs(r.item_answers) for r in rows]
                value = {
                    key: sum(t[key] for t in triples) / len(triples)
                    for key in ("pragmatic", "hedonic", "overall")
                }
            score = UsabilityScore(
                score_id=uuid.uuid4().hex,
                service_id=service_id,
                instrument=instrument,
                value=value,
                n=len(rows),
                window=window,
                computed_at=utc_ms(self._clock.now()),
            )
            with self._lock:
                self._scores[score.score_id] = score
                self._per_service_scores.setdefault(service_id, []).append(score.score_id)
            self._audit.append(
                AuditAction.USABILITY_AGGREGATED,
                user_id=user_id,
                service_id=service_id,
                detail={"score_id": score.score_id, "instrument": instrument, "n": len(rows)},
            )
            if append_to_passport:
                self._registry.append_evaluation(service_id, score.score_id, user_id=user_id)
            scores.append(score)
        return scores

    def has_score(self, score_id: str) -> bool:
        return score_id in self._scores

    def get_score(self, score_id: str) -> UsabilityScore:
        score = self._scores.get(score_id)
        if score is None:
            raise NotFoundError(f"usability score {score_id!r} not found")
        return score

    def scores_for(self, service_id: str) -> list[UsabilityScore]:
        return [self._scores[sid] for sid in self._per_service_scores.get(service_id, [])]
