"""Adapter protocol between the gateway and external model services.

On the wire the contract is one endpoint, ``POST {endpoint}/predict``, with
a structured body:

  request:  {"inputs": {name: value, ...}, "passport_version": n}
  response: {"outputs": {name: value, ...}, "model_build_id": "...",
             "native_attributions": {name: number, ...} | null}

Endpoints starting with ``local:`` resolve to in-process models, which keeps
the full pipeline testable without sockets. Clinical calls are never
retried; a silent retry could double-log a clinical act.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Protocol

import httpx

from .errors import AdapterError, ConfigurationError


@dataclass(frozen=True)
class AdapterRequest:
    inputs: dict[str, Any]
    passport_version: int

    def to_document(self) -> dict:
        return {"inputs": self.inputs, "passport_version": self.passport_version}


@dataclass(frozen=True)
class AdapterResponse:
    outputs: dict[str, Any]
    model_build_id: str
    native_attributions: dict[str, float] | None = None

    @staticmethod
    def from_document(raw: Any) -> "AdapterResponse":
        if not isinstance(raw, Mapping) or "outputs" not in raw:
            raise AdapterError("adapter response missing 'outputs'")
        outputs = raw["outputs"]
        if not isinstance(outputs, Mapping):
            raise AdapterError("adapter 'outputs' must be an object")
        return AdapterResponse(
            outputs=dict(outputs),
            model_build_id=str(raw.get("model_build_id", "unknown")),
            native_attributions=(
                dict(raw["native_attributions"])
                if raw.get("native_attributions")
                else None
            ),
        )


class LocalModel(Protocol):
    build_id: str

    def predict(self, inputs: Mapping[str, Any]) -> dict[str, Any]: ...


class AdapterClient:
    """Routes predictions to local models or HTTP services.

    Outbound concurrency is bounded so slow adapters cannot starve the
    gateway; per-call timeout and the academic-only retry budget come from
    platform configuration.
    """

    def __init__(
        self,
        *,
        timeout_seconds: float = 30.0,
        max_concurrency: int = 8,
        academic_retry_limit: int = 1,
    ):
        self.timeout_seconds = timeout_seconds
        self.academic_retry_limit = academic_retry_limit
        self._gate = threading.BoundedSemaphore(max_concurrency)
        self._local: dict[str, LocalModel] = {}

    def register_local(self, name: str, model: LocalModel) -> str:
        self._local[name] = model
        return f"local:{name}"

    def predict(
        self, endpoint: str, request: AdapterRequest, *, mode: str = "clinical"
    ) -> AdapterResponse:
        retries = 0 if mode == "clinical" else self.academic_retry_limit
        attempts = retries + 1
        last_error: Exception | None = None
        for _ in range(attempts):
            try:
                with self._gate:
                    return self._predict_once(endpoint, request)
            except AdapterError as exc:
                last_error = exc
        raise AdapterError(f"adapter failed after {attempts} attempt(s): {last_error}")

    def _predict_once(self, endpoint: str, request: AdapterRequest) -> AdapterResponse:
        if endpoint.startswith("local:"):
            name = endpoint.split(":", 1)[1]
            model = self._local.get(name)
            if model is None:
                raise AdapterError(f"no local model registered as {name!r}")
            try:
                outputs = model.predict(request.inputs)
            except Exception as exc:
                raise AdapterError(f"local model failed: {exc}") from exc
            return AdapterResponse(outputs=dict(outputs), model_build_id=model.build_id)
        if endpoint.startswith("http://") or endpoint.startswith("https://"):
            url = endpoint.rstrip("/") + "/predict"
            try:
                response = httpx.post(
                    url, json=request.to_document(), timeout=self.timeout_seconds
                )
                response.raise_for_status()
                return AdapterResponse.from_document(response.json())
            except httpx.HTTPError as exc:
                raise AdapterError(f"adapter call failed: {exc}") from exc
        raise ConfigurationError(f"unsupported endpoint {endpoint!r}")

    def model_fn(
        self, endpoint: str, passport_version: int, target: str, *, mode: str = "clinical"
    ) -> Callable[[Mapping[str, Any]], float]:
        """Evaluable function over mixed inputs, for attribution."""

        def evaluate(inputs: Mapping[str, Any]) -> float:
            request = AdapterRequest(inputs=dict(inputs), passport_version=passport_version)
            response = self.predict(endpoint, request, mode=mode)
            value = response.outputs.get(target)
            if value is None:
                raise AdapterError(f"adapter response lacks target output {target!r}")
            return float(value)

        return evaluate
