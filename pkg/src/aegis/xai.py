"""Model-agnostic per-case feature attribution via Shapley values.

The model is treated as a black box evaluable on arbitrary mixtures of case
and baseline values. Up to a dimensionality cutoff the attribution is exact
(all 2^d coalitions enumerated); beyond it a seeded permutation-sampling
estimator reports per-feature standard errors. Exact attributions satisfy
the efficiency axiom: contributions sum to f(case) - f(baseline).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import AttributionError

ModelFn = Callable[[Mapping[str, Any]], float]


@dataclass(frozen=True)
class Attribution:
    method: str  # exact_shapley | sampled_shapley | native
    contributions: dict[str, float]
    prediction: float
    baseline_prediction: float
    baseline: dict[str, Any]
    n_samples: int | None = None
    seed: int | None = None
    std_error: dict[str, float] | None = None
    job_id: str | None = None

    def to_document(self) -> dict:
        return {
            "job_id": self.job_id,
            "method": self.method,
            "contributions": self.contributions,
            "prediction": self.prediction,
            "baseline_prediction": self.baseline_prediction,
            "baseline": self.baseline,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "std_error": self.std_error,
        }


def native_attribution(
    contributions: Mapping[str, float],
    *,
    prediction: float,
    baseline: Mapping[str, Any] | None = None,
    job_id: str | None = None,
) -> Attribution:
    """Wrap attributions the adapter computed itself; stored verbatim."""
    return Attribution(
        method="native",
        contributions=dict(contributions),
        prediction=prediction,
        baseline_prediction=float("nan"),
        baseline=dict(baseline or {}),
        job_id=job_id,
    )


class _CoalitionCache:
    """Memoizes model evaluations keyed by the coalition bitmask."""

    def __init__(self, model: ModelFn, features: list[str], case: Mapping, baseline: Mapping):
        self._model = model
        self._features = features
        self._case = case
        self._baseline = baseline
        self._values: dict[int, float] = {}

    def value(self, mask: int) -> float:
        cached = self._values.get(mask)
        if cached is not None:
            return cached
        point = {
            name: (self._case[name] if mask >> i & 1 else self._baseline[name])
            for i, name in enumerate(self._features)
        }
        try:
            result = float(self._model(point))
        except Exception as exc:
            raise AttributionError(f"model evaluation failed: {exc}") from exc
        if math.isnan(result):
            raise AttributionError("model returned NaN")
        self._values[mask] = result
        return result


def _exact_shapley(cache: _CoalitionCache, d: int) -> dict[int, float]:
    # Weight of a coalition of size s when adding one more feature.
    fact = [math.factorial(k) for k in range(d + 1)]
    weights = [fact[s] * fact[d - s - 1] / fact[d] for s in range(d)]
    phi = [0.0] * d
    for mask in range(1 << d):
        size = bin(mask).count("1")
        base_value = cache.value(mask)
        for i in range(d):
            if mask >> i & 1:
                continue
            phi[i] += weights[size] * (cache.value(mask | 1 << i) - base_value)
    return dict(enumerate(phi))


def _sampled_shapley(
    cache: _CoalitionCache, d: int, n_samples: int, seed: int
) -> tuple[dict[int, float], dict[int, float]]:
    rng = random.Random(seed)
    order = list(range(d))
    sums = [0.0] * d
    sums_sq = [0.0] * d
    for _ in range(n_samples):
        rng.shuffle(order)
        mask = 0
        previous = cache.value(0)
        for i in order:
            mask |= 1 << i
            current = cache.value(mask)
            marginal = current - previous
            sums[i] += marginal
            sums_sq[i] += marginal * marginal
            previous = current
    phi = {i: sums[i] / n_samples for i in range(d)}
    errors = {}
    for i in range(d):
        mean = phi[i]
        variance = max(0.0, sums_sq[i] / n_samples - mean * mean)
        errors[i] = math.sqrt(variance / n_samples)
    return phi, errors


def explain(
    model: ModelFn,
    case: Mapping[str, Any],
    baseline: Mapping[str, Any],
    *,
    n_samples: int = 2000,
    seed: int = 0,
    exact_if_dims_le: int = 12,
    job_id: str | None = None,
) -> Attribution:
    """Attribute f(case) - f(baseline) across the input features.

    Exact enumeration when the dimensionality allows it, otherwise the
    permutation estimator; either way every input feature gets a
    contribution, and identical (case, baseline, seed, n_samples) inputs
    produce bit-identical results. Evaluation order never matters because
    contributions are pure sums.
    """
    features = list(case.keys())
    missing = [name for name in features if name not in baseline]
    if missing:
        raise AttributionError(f"baseline missing features: {sorted(missing)}")
    d = len(features)
    if d == 0:
        raise AttributionError("no features to attribute")

    cache = _CoalitionCache(model, features, case, baseline)
    baseline_prediction = cache.value(0)
    prediction = cache.value((1 << d) - 1)

    if d <= exact_if_dims_le:
        phi = _exact_shapley(cache, d)
        return Attribution(
            method="exact_shapley",
            contributions={features[i]: phi[i] for i in range(d)},
            prediction=prediction,
            baseline_prediction=baseline_prediction,
            baseline=dict(baseline),
            job_id=job_id,
        )
    phi, errors = _sampled_shapley(cache, d, n_samples, seed)
    return Attribution(
        method="sampled_shapley",
        contributions={features[i]: phi[i] for i in range(d)},
        prediction=prediction,
        baseline_prediction=baseline_prediction,
        baseline=dict(baseline),
        n_samples=n_samples,
        seed=seed,
        std_error={features[i]: errors[i] for i in range(d)},
        job_id=job_id,
    )


def sampled_explain(
    model: ModelFn,
    case: Mapping[str, Any],
    baseline: Mapping[str, Any],
    *,
    n_samples: int,
    seed: int,
    job_id: str | None = None,
) -> Attribution:
    """Force the permutation estimator regardless of dimensionality."""
    return explain(
        model,
        case,
        baseline,
        n_samples=n_samples,
        seed=seed,
        exact_if_dims_le=0,
        job_id=job_id,
    )
