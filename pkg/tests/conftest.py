import pytest

from aegis.clock import ManualClock
from aegis.config import PlatformConfig
from aegis.platform import GovernancePlatform

CLEAN_CASE_VARIABLES = {
    "age": {"value": 74, "unit": "a"},
    "barthel_index": 80,
    "charlson_index": 2,
    "creatinine": {"value": 1.0, "unit": "mg/dL"},
    "albumin": {"value": 3.8, "unit": "g/dL"},
}


def flat_case(pseudo_id="px-001", variables=None, **overrides):
    doc = {
        "patient_pseudo_id": pseudo_id,
        "source_system": overrides.pop("source_system", "ehr-main"),
        "variables": dict(variables if variables is not None else CLEAN_CASE_VARIABLES),
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def clock():
    return ManualClock()


@pytest.fixture
def platform(clock):
    return GovernancePlatform(PlatformConfig(), clock)


@pytest.fixture
def seeded(platform):
    info = platform.seed_demo()
    return platform, info


@pytest.fixture
def sessions(seeded):
    """Login sessions for every demo role."""
    platform, info = seeded
    tokens = {}
    for key, user in info["users"].items():
        tokens[key] = platform.iam.authenticate(user["user_id"], user["secret"]).token
    return platform, info, tokens
