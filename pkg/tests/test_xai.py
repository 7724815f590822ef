import math
import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aegis.errors import AttributionError
from aegis.xai import explain, sampled_explain


def oracle_shapley(model, case, baseline):
    """Independent oracle: direct subset-sum over itertools combinations,
    evaluating the model afresh for every coalition."""
    features = list(case.keys())
    d = len(features)

    def value(subset):
        point = {f: (case[f] if f in subset else baseline[f]) for f in features}
        return model(point)

    phi = {}
    for feature in features:
        others = [f for f in features if f != feature]
        total = 0.0
        for size in range(d):
            weight = (
                math.factorial(size) * math.factorial(d - size - 1) / math.factorial(d)
            )
            for subset in combinations(others, size):
                total += weight * (value(set(subset) | {feature}) - value(set(subset)))
        phi[feature] = total
    return phi


def linear_model(weights, intercept=0.0):
    def f(x):
        return intercept + sum(w * x[name] for name, w in weights.items())

    return f


def test_linear_model_contributions_are_weight_times_delta():
    model = linear_model({"x1": 2.0, "x2": -1.0})
    case = {"x1": 1.0, "x2": 1.0}
    baseline = {"x1": 0.0, "x2": 0.0}
    attribution = explain(model, case, baseline)
    assert attribution.method == "exact_shapley"
    assert attribution.contributions["x1"] == pytest.approx(2.0, abs=1e-12)
    assert attribution.contributions["x2"] == pytest.approx(-1.0, abs=1e-12)
    # Closed form agrees with the exhaustive oracle.
    oracle = oracle_shapley(model, case, baseline)
    for name in case:
        assert attribution.contributions[name] == pytest.approx(oracle[name], abs=1e-12)


def test_ignored_feature_gets_exactly_zero():
    model = linear_model({"x1": 2.0, "x2": -1.0})  # x3 ignored
    case = {"x1": 1.0, "x2": 1.0, "x3": 9.0}
    baseline = {"x1": 0.0, "x2": 0.0, "x3": 0.0}
    attribution = explain(model, case, baseline)
    assert attribution.contributions["x3"] == 0.0


def test_symmetric_features_get_equal_contributions():
    def model(x):
        return x["a"] * x["b"] + x["a"] + x["b"]

    attribution = explain(model, {"a": 1.0, "b": 1.0}, {"a": 0.0, "b": 0.0})
    assert attribution.contributions["a"] == pytest.approx(
        attribution.contributions["b"], abs=1e-12
    )


def random_interaction_model(rng, features):
    weights = {f: rng.uniform(-2, 2) for f in features}
    pairs = list(combinations(features, 2))
    pair_weights = {p: rng.uniform(-1, 1) for p in pairs}

    def f(x):
        total = sum(w * x[name] for name, w in weights.items())
        total += sum(w * x[a] * x[b] for (a, b), w in pair_weights.items())
        return total + math.sin(sum(x.values()) / 3.0)

    return f


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=10_000))
def test_efficiency_axiom_holds_at_1e_9_relative(d, seed):
    rng = random.Random(seed)
    features = [f"f{i}" for i in range(d)]
    model = random_interaction_model(rng, features)
    case = {f: rng.uniform(-3, 3) for f in features}
    baseline = {f: rng.uniform(-3, 3) for f in features}
    attribution = explain(model, case, baseline)
    total = sum(attribution.contributions.values())
    gap = attribution.prediction - attribution.baseline_prediction
    assert abs(total - gap) <= 1e-9 * max(1.0, abs(attribution.prediction))


def test_exact_matches_oracle_on_nonlinear_models():
    rng = random.Random(20250601)
    for _ in range(10):
        d = rng.randint(1, 5)
        features = [f"f{i}" for i in range(d)]
        model = random_interaction_model(rng, features)
        case = {f: rng.uniform(-3, 3) for f in features}
        baseline = {f: rng.uniform(-3, 3) for f in features}
        attribution = explain(model, case, baseline)
        oracle = oracle_shapley(model, case, baseline)
        for name in features:
            assert attribution.contributions[name] == pytest.approx(oracle[name], abs=1e-9)


def test_sampled_estimator_within_three_std_errors_of_exact():
    rng = random.Random(99)
    features = ["a", "b", "c"]
    model = random_interaction_model(rng, features)
    case = {f: rng.uniform(-2, 2) for f in features}
    baseline = {f: rng.uniform(-2, 2) for f in features}
    exact = explain(model, case, baseline)
    sampled = sampled_explain(model, case, baseline, n_samples=2000, seed=0)
    assert sampled.method == "sampled_shapley"
    for name in features:
        margin = 3 * sampled.std_error[name] + 1e-12
        assert abs(sampled.contributions[name] - exact.contributions[name]) <= margin


def test_seed_determinism_is_bit_identical():
    rng = random.Random(5)
    features = [f"f{i}" for i in range(6)]
    model = random_interaction_model(rng, features)
    case = {f: rng.uniform(-2, 2) for f in features}
    baseline = {f: 0.0 for f in features}
    first = sampled_explain(model, case, baseline, n_samples=500, seed=42)
    second = sampled_explain(model, case, baseline, n_samples=500, seed=42)
    assert first.contributions == second.contributions
    assert first.std_error == second.std_error
    different = sampled_explain(model, case, baseline, n_samples=500, seed=43)
    assert different.contributions != first.contributions


def test_dimension_cutoff_switches_methods():
    features = [f"f{i}" for i in range(4)]
    model = linear_model({f: 1.0 for f in features})
    case = {f: 1.0 for f in features}
    baseline = {f: 0.0 for f in features}
    assert explain(model, case, baseline, exact_if_dims_le=4).method == "exact_shapley"
    assert (
        explain(model, case, baseline, exact_if_dims_le=3, n_samples=50).method
        == "sampled_shapley"
    )


def test_model_failure_aborts_attribution():
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] > 3:
            raise RuntimeError("backend gone")
        return sum(x.values())

    with pytest.raises(AttributionError):
        explain(flaky, {"a": 1.0, "b": 2.0, "c": 3.0}, {"a": 0.0, "b": 0.0, "c": 0.0})


def test_baseline_missing_feature_rejected():
    model = linear_model({"a": 1.0})
    with pytest.raises(AttributionError):
        explain(model, {"a": 1.0}, {})
