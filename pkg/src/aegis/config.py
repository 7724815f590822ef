"""Platform configuration. One dataclass, all knobs, sane defaults."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class PlatformConfig:
    # None keeps every store in memory; a directory enables persistence of
    # the audit log segments and the encrypted payload vault.
    data_dir: Path | None = None
    # Development mode waives the TLS transport requirement on the HTTP API.
    development: bool = True

    jurisdiction: str = "ES"
    disclaimer_text: str = "Only for academic purposes"

    session_lifetime_hours: float = 8.0
    scrypt_cost: int = 2**14

    # Single place the chain digest is named.
    digest_algorithm: str = "sha256"
    audit_segment_bytes: int = 1_000_000

    adapter_timeout_seconds: float = 30.0
    adapter_max_concurrency: int = 8
    # Clinical calls are never retried; a silent retry could double-log a
    # clinical act. Academic calls get this many retries.
    academic_retry_limit: int = 1

    snapshot_min_n: int = 10
    drift_delta: float = 0.05
    usability_cadence_days: int = 14

    psi_bins: int = 10
    psi_epsilon: float = 1e-4

    exact_shapley_max_dims: int = 12
    shapley_samples: int = 2000

    min_bias_group_n: int = 5
    decision_threshold: float = 0.5
    ground_truth_same_organisation: bool = True

    direct_identifier_fields: tuple[str, ...] = (
        "name",
        "full_name",
        "first_name",
        "last_name",
        "national_id",
        "ssn",
        "nhs_number",
        "passport_number",
    )

    def resolved_data_dir(self) -> Path | None:
        if self.data_dir is None:
            return None
        path = Path(self.data_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path
