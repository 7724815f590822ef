import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aegis.errors import ConfigurationError
from aegis.usability import instrument_items, score_sus, score_ueqs


# -- SUS -----------------------------------------------------------------------


def test_sus_all_threes_scores_fifty():
    assert score_sus([3] * 10) == 50.0


def test_sus_maximal_vector_scores_hundred():
    answers = [5 if i % 2 == 0 else 1 for i in range(10)]  # odd items 5, even 1
    assert score_sus(answers) == 100.0


def test_sus_minimal_vector_scores_zero():
    answers = [1 if i % 2 == 0 else 5 for i in range(10)]
    assert score_sus(answers) == 0.0


def test_sus_rejects_bad_vectors():
    with pytest.raises(ConfigurationError):
        score_sus([3] * 9)
    with pytest.raises(ConfigurationError):
        score_sus([3] * 11)
    with pytest.raises(ConfigurationError):
        score_sus([3] * 9 + [6])
    with pytest.raises(ConfigurationError):
        score_sus([3] * 9 + [0])


@given(st.lists(st.integers(min_value=1, max_value=5), min_size=10, max_size=10))
def test_sus_bounds_for_all_valid_vectors(answers):
    value = score_sus(answers)
    assert 0.0 <= value <= 100.0
    assert value == score_sus(list(answers))  # pure


# -- UEQ-S ---------------------------------------------------------------------


def test_ueqs_neutral_midpoint_is_zero():
    assert score_ueqs([4] * 8) == {"pragmatic": 0.0, "hedonic": 0.0, "overall": 0.0}


def test_ueqs_maximum_is_three_everywhere():
    assert score_ueqs([7] * 8) == {"pragmatic": 3.0, "hedonic": 3.0, "overall": 3.0}


def test_ueqs_split_subscales():
    result = score_ueqs([7, 7, 7, 7, 1, 1, 1, 1])
    assert result == {"pragmatic": 3.0, "hedonic": -3.0, "overall": 0.0}


@given(st.lists(st.integers(min_value=1, max_value=7), min_size=8, max_size=8))
def test_ueqs_bounds_for_all_valid_vectors(answers):
    result = score_ueqs(answers)
    for key in ("pragmatic", "hedonic", "overall"):
        assert -3.0 <= result[key] <= 3.0


def test_instrument_fixtures_ship_item_texts():
    sus = instrument_items("SUS")
    assert len(sus["items"]) == 10
    ueqs = instrument_items("UEQ_S")
    assert len(ueqs["items"]) == 8
    assert {item["subscale"] for item in ueqs["items"]} == {"pragmatic", "hedonic"}


# -- prompts and responses -----------------------------------------------------


def test_prompt_issued_once_per_cadence(sessions):
    platform, info, tokens = sessions
    token = tokens["clinician"]
    first = platform.usability.schedule_prompt(token, "stub-palliative")
    assert first is not None
    # Still open: the same prompt comes back, never a second one.
    again = platform.usability.schedule_prompt(token, "stub-palliative")
    assert again.token == first.token
    platform.usability.submit_response(
        token, "stub-palliative", "SUS", [4] * 10, prompt_token=first.token
    )
    # Within the cadence window after answering: no new prompt.
    assert platform.usability.schedule_prompt(token, "stub-palliative") is None
    platform.clock.advance(days=15)
    # The old session expired with the clock jump; start a fresh shift.
    user = info["users"]["clinician"]
    token = platform.iam.authenticate(user["user_id"], user["secret"]).token
    renewed = platform.usability.schedule_prompt(token, "stub-palliative")
    assert renewed is not None and renewed.token != first.token


def test_prompts_are_per_user_and_service(sessions):
    platform, info, tokens = sessions
    a = platform.usability.schedule_prompt(tokens["clinician"], "stub-palliative")
    b = platform.usability.schedule_prompt(tokens["researcher"], "stub-palliative")
    c = platform.usability.schedule_prompt(tokens["clinician"], "stub-palliative-proto")
    assert len({a.token, b.token, c.token}) == 3


def test_partial_responses_stored_but_excluded_from_scoring(sessions):
    platform, info, tokens = sessions
    token = tokens["clinician"]
    partial = platform.usability.submit_response(token, "stub-palliative", "SUS", [4] * 6)
    assert not partial.complete
    complete = platform.usability.submit_response(token, "stub-palliative", "SUS", [3] * 10)
    assert complete.complete
    scores = platform.usability.aggregate("stub-palliative")
    sus = next(s for s in scores if s.instrument == "SUS")
    assert sus.n == 1  # only the complete vector
    assert sus.value == 50.0


def test_aggregate_appends_to_passport(sessions):
    platform, info, tokens = sessions
    token = tokens["clinician"]
    platform.usability.submit_response(token, "stub-palliative", "SUS", [4] * 10)
    platform.usability.submit_response(token, "stub-palliative", "UEQ_S", [6] * 8)
    before = platform.registry.get_passport("stub-palliative").version
    scores = platform.usability.aggregate("stub-palliative")
    assert {s.instrument for s in scores} == {"SUS", "UEQ_S"}
    passport = platform.registry.get_passport("stub-palliative")
    assert passport.version == before + 2  # one bump per instrument score
    for score in scores:
        assert score.score_id in passport.evaluation_history


def test_out_of_range_answers_rejected(sessions):
    platform, info, tokens = sessions
    with pytest.raises(ConfigurationError):
        platform.usability.submit_response(
            tokens["clinician"], "stub-palliative", "SUS", [4] * 9 + [9]
        )
    with pytest.raises(ConfigurationError):
        platform.usability.submit_response(
            tokens["clinician"], "stub-palliative", "UEQ_S", [8] * 8
        )
