#!/usr/bin/env python3
"""Scripted walkthrough of the full governed prediction workflow.

Builds an in-memory platform, seeds the demo users and the stub services,
then narrates one complete clinical episode: ingestion with unit
conversion, quality gating, the double-check, execution with attribution,
ground truth, a performance snapshot, a usability round, a review session,
and finally audit-chain verification. Run it directly:

    python scripts/governance_walkthrough.py
"""

import json

from aegis.clock import ManualClock
from aegis.config import PlatformConfig
from aegis.platform import GovernancePlatform


def show(title, payload):
    print(f"\n== {title}")
    print(json.dumps(payload, indent=2, default=str)[:2000])


def main():
    platform = GovernancePlatform(PlatformConfig(), ManualClock())
    info = platform.seed_demo()
    show("seeded demo", info)

    clinician = info["users"]["clinician"]
    session = platform.iam.authenticate(clinician["user_id"], clinician["secret"])

    document = {
        "patient_pseudo_id": "px-walkthrough",
        "source_system": "ehr-main",
        "variables": {
            "age": {"value": 81, "unit": "a"},
            "barthel_index": 45,
            "charlson_index": 4,
            "creatinine": {"value": 130.0, "unit": "umol/L"},
            "albumin": {"value": 29.0, "unit": "g/L"},
        },
    }
    job = platform.gateway.create_job(session.token, "stub-palliative", document)
    show("draft after ingestion + unit conversion", job.case.to_document())
    show("quality report", platform.gateway.quality_report(job.quality_report_ref).to_document())

    platform.gateway.confirm_job(session.token, job.job_id)
    platform.gateway.execute_job(session.token, job.job_id)
    show("outputs", job.outputs)
    show("attribution", job.attribution.to_document())

    platform.monitor.submit_ground_truth(session.token, job.job_id, 0)
    today = platform.clock.now().date().isoformat()
    snapshot = platform.monitor.compute_snapshot("stub-palliative", (today, today))
    show("performance snapshot (insufficient n expected)", snapshot.to_document())

    prompt = platform.usability.schedule_prompt(session.token, "stub-palliative")
    platform.usability.submit_response(
        session.token, "stub-palliative", "SUS", [4, 2, 4, 2, 4, 2, 4, 2, 4, 2],
        prompt_token=prompt.token,
    )
    show("usability scores", [s.to_document() for s in platform.usability.aggregate("stub-palliative")])

    review = platform.review.create_session(
        session.token, "stub-palliative", n=3, source="simulated", seed=7
    )
    for index in range(3):
        platform.review.record_estimate(session.token, review.session_id, index, 1)
    show("review concordance", platform.review.complete_session(session.token, review.session_id).to_document())

    show("coverage report", platform.compliance.coverage_report("stub-palliative"))

    status = platform.audit.verify_chain()
    print(f"\n== audit chain: ok={status.ok}, records={len(platform.audit)}")


if __name__ == "__main__":
    main()
