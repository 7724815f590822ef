"""Bundled stub prediction service for tests and demos.

A logistic regression over five admission variables (age, Barthel index,
Charlson index, creatinine, albumin) emitting one-year survival and
quality-of-life probabilities. The weights are fixture data chosen to give
plausible monotonic behaviour; they are not clinical claims.
"""

from __future__ import annotations

import math
from typing import Any, Mapping

BUILD_ID = "stub-palliative-1.0.0"

FEATURES = ("age", "barthel_index", "charlson_index", "creatinine", "albumin")

# (mean, scale) used to standardize raw inputs before the linear term.
STANDARDIZATION: dict[str, tuple[float, float]] = {
    "age": (78.0, 7.0),
    "barthel_index": (55.0, 25.0),
    "charlson_index": (2.5, 1.5),
    "creatinine": (1.2, 0.6),
    "albumin": (3.4, 0.5),
}

SURVIVAL_WEIGHTS: dict[str, float] = {
    "age": -0.55,
    "barthel_index": 0.85,
    "charlson_index": -0.70,
    "creatinine": -0.35,
    "albumin": 0.50,
}
SURVIVAL_INTERCEPT = 0.30

QOL_WEIGHTS: dict[str, float] = {
    "age": -0.25,
    "barthel_index": 1.05,
    "charlson_index": -0.45,
    "creatinine": -0.15,
    "albumin": 0.35,
}
QOL_INTERCEPT = 0.10

OUTPUTS = ("one_year_survival_probability", "one_year_qol_probability")


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    expz = math.exp(z)
    return expz / (1.0 + expz)


def logistic_score(
    inputs: Mapping[str, Any], weights: Mapping[str, float], intercept: float
) -> float:
    z = intercept
    for name, weight in weights.items():
        mean, scale = STANDARDIZATION[name]
        z += weight * (float(inputs[name]) - mean) / scale
    return sigmoid(z)


class StubPalliativeModel:
    """Deterministic; same case in, same probabilities out."""

    build_id = BUILD_ID

    def predict(self, inputs: Mapping[str, Any]) -> dict[str, float]:
        return {
            "one_year_survival_probability": logistic_score(
                inputs, SURVIVAL_WEIGHTS, SURVIVAL_INTERCEPT
            ),
            "one_year_qol_probability": logistic_score(
                inputs, QOL_WEIGHTS, QOL_INTERCEPT
            ),
        }
