import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aegis.clock import ManualClock
from aegis.errors import ConfigurationError
from aegis.interop import ClinicalCase, VariableReading, ingest_case
from aegis.quality import (
    ConsistencyRule,
    assess_case,
    assess_dataset,
    population_stability_index,
    psi_from_samples,
)
from aegis.registry import VariableSpec

SCHEMA = (
    VariableSpec("age", "numeric", unit="a", valid_range=(65, 110)),
    VariableSpec("barthel_index", "numeric", unit="{score}", valid_range=(0, 100)),
    VariableSpec("charlson_index", "numeric", unit="{score}", valid_range=(0, 20)),
    VariableSpec("creatinine", "numeric", unit="mg/dL", valid_range=(0.2, 15)),
    VariableSpec("albumin", "numeric", unit="g/dL", valid_range=(1.0, 6.0)),
)

TEN_REQUIRED = tuple(
    VariableSpec(f"v{i}", "numeric", unit="1", valid_range=(0, 1)) for i in range(10)
)

CLOCK = ManualClock()


def case_of(variables, pseudo_id="p1", source="src-a", ingested_at="2025-01-01T00:00:00+00:00"):
    return ClinicalCase(
        case_id="c-" + pseudo_id,
        patient_pseudo_id=pseudo_id,
        variables={k: VariableReading(value=v) for k, v in variables.items()},
        source_system=source,
        ingested_at=ingested_at,
    )


GOOD = {"age": 74, "barthel_index": 80, "charlson_index": 2, "creatinine": 1.0, "albumin": 3.8}


def test_clean_case_scores_one_and_passes():
    report = assess_case(case_of(GOOD), SCHEMA)
    assert report.dimension_scores["completeness"] == 1.0
    assert report.dimension_scores["correctness"] == 1.0
    assert report.dimension_scores["consistency"] == 1.0
    assert report.verdict == "pass"
    assert report.overall == 1.0


def test_nine_of_ten_required_blocks_with_completeness_point_nine():
    variables = {f"v{i}": 0.5 for i in range(9)}  # v9 missing
    report = assess_case(case_of(variables), TEN_REQUIRED)
    assert report.dimension_scores["completeness"] == pytest.approx(0.9)
    assert any(f.variable == "v9" and f.check == "missing" for f in report.hard_failures)
    assert report.verdict == "block"


def test_out_of_range_creatinine_is_hard_failure():
    # A micromoles/L reading mistakenly carried as mg/dL lands far outside range.
    variables = dict(GOOD, creatinine=88.4)
    report = assess_case(case_of(variables), SCHEMA)
    failure = next(f for f in report.hard_failures if f.variable == "creatinine")
    assert failure.check == "range"
    assert report.verdict == "block"


def test_category_and_type_failures():
    schema = SCHEMA + (
        VariableSpec("sex", "categorical", categories=("female", "male"), required=False),
    )
    report = assess_case(case_of(dict(GOOD, sex="unknown")), schema)
    assert any(f.variable == "sex" and f.check == "category" for f in report.hard_failures)
    report = assess_case(case_of(dict(GOOD, age="old")), SCHEMA)
    assert any(f.variable == "age" and f.check == "type" for f in report.hard_failures)


def test_consistency_rule_violation_lowers_score_without_blocking():
    rules = (ConsistencyRule("population 65 plus", left="age", op=">=", right=65),)
    ok = assess_case(case_of(GOOD), SCHEMA, rules)
    assert ok.dimension_scores["consistency"] == 1.0
    young = assess_case(case_of(dict(GOOD, age=70 - 10)), SCHEMA, rules)
    # age 60 violates the rule (soft) and the valid range (hard).
    assert young.dimension_scores["consistency"] == 0.0
    assert any("population 65 plus" in finding for finding in young.findings)


def test_unknown_variables_reported_not_dropped():
    report = assess_case(case_of(dict(GOOD, shoe_size=42)), SCHEMA)
    assert any("shoe_size" in finding for finding in report.findings)
    assert report.verdict == "pass"


def test_assess_case_is_pure():
    case = case_of(GOOD)
    a = assess_case(case, SCHEMA)
    b = assess_case(case, SCHEMA)
    assert a.dimension_scores == b.dimension_scores
    assert a.hard_failures == b.hard_failures


def test_empty_schema_is_configuration_error():
    with pytest.raises(ConfigurationError):
        assess_case(case_of(GOOD), ())


# -- PSI -----------------------------------------------------------------------


def test_psi_matches_hand_formula_to_1e_12():
    computed = population_stability_index([0.5, 0.5], [0.8, 0.2])
    oracle = (0.8 - 0.5) * math.log(0.8 / 0.5) + (0.2 - 0.5) * math.log(0.2 / 0.5)
    assert abs(computed - oracle) <= 1e-12
    assert computed == pytest.approx(0.416, abs=5e-4)


def test_psi_zero_for_identical_histograms():
    assert population_stability_index([0.3, 0.5, 0.2], [0.3, 0.5, 0.2]) == 0.0


def test_psi_from_identical_samples_is_zero():
    window = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    assert psi_from_samples(window, list(window)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=10),
    st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=10),
)
def test_psi_nonnegative_and_zero_iff_identical(counts_a, counts_b):
    size = min(len(counts_a), len(counts_b))
    counts_a, counts_b = counts_a[:size], counts_b[:size]
    total_a, total_b = sum(counts_a) or 1, sum(counts_b) or 1
    props_a = [c / total_a for c in counts_a]
    props_b = [c / total_b for c in counts_b]
    psi = population_stability_index(props_a, props_b)
    assert psi >= 0.0
    if props_a == props_b:
        assert psi == 0.0
    elif any(abs(a - b) > 1e-3 for a, b in zip(props_a, props_b)):
        assert psi > 0.0


# -- datasets --------------------------------------------------------------


def dataset(n=10, duplicate_pairs=0, source="src-a"):
    cases = []
    for i in range(n - duplicate_pairs):
        variables = dict(GOOD, age=66 + i % 30)
        cases.append(
            case_of(variables, pseudo_id=f"p{i}", source=source,
                    ingested_at=f"2025-01-{i + 1:02d}T00:00:00+00:00")
        )
    for i in range(duplicate_pairs):
        clone = cases[i]
        cases.append(
            ClinicalCase(
                case_id=f"dup-{i}",
                patient_pseudo_id=clone.patient_pseudo_id,
                variables=dict(clone.variables),
                source_system=clone.source_system,
                ingested_at="2025-02-01T00:00:00+00:00",
            )
        )
    return cases


def test_one_duplicate_pair_in_ten_gives_uniqueness_point_nine():
    report = assess_dataset(dataset(10, duplicate_pairs=1), SCHEMA)
    assert report.dimension_scores["uniqueness"] == pytest.approx(0.9)


def test_identical_windows_give_temporal_stability_one():
    # Same values in both halves of the time ordering.
    cases = []
    for half in range(2):
        for i in range(10):
            cases.append(
                case_of(dict(GOOD, age=66 + i), pseudo_id=f"p{half}-{i}",
                        ingested_at=f"2025-0{half + 1}-{i + 1:02d}T00:00:00+00:00")
            )
    report = assess_dataset(cases, SCHEMA)
    assert report.dimension_scores["temporal_stability"] == pytest.approx(1.0)


def test_single_source_and_tiny_dataset_mark_not_applicable():
    report = assess_dataset(dataset(3), SCHEMA)
    assert report.dimension_scores["multi_source_stability"] is None
    assert report.dimension_scores["temporal_stability"] is None


def test_two_sources_computes_multi_source_stability():
    cases = dataset(8, source="src-a") + dataset(8, source="src-b")
    report = assess_dataset(cases, SCHEMA)
    assert report.dimension_scores["multi_source_stability"] is not None
    assert 0.0 <= report.dimension_scores["multi_source_stability"] <= 1.0


def test_permuting_dataset_order_changes_no_score():
    cases = dataset(12, duplicate_pairs=2)
    forward = assess_dataset(cases, SCHEMA)
    backward = assess_dataset(list(reversed(cases)), SCHEMA)
    assert forward.dimension_scores == backward.dimension_scores


def test_empty_dataset_is_error():
    with pytest.raises(ConfigurationError):
        assess_dataset([], SCHEMA)


def test_overall_is_min_of_computed_scores():
    report = assess_dataset(dataset(10, duplicate_pairs=3), SCHEMA)
    computed = [v for v in report.dimension_scores.values() if v is not None]
    assert report.overall == min(computed)
