"""Append-only, hash-chained chronological record of all platform actions.

Every record is serialized canonically (sorted keys, no insignificant
whitespace, ASCII only) and chained: record n stores the digest of record
n-1 and its own digest over all fields including that link. Verification
recomputes the chain from the persisted bytes, so any byte-level change to
a stored record is reported at its sequence number.

Clinical inputs and outputs never appear in the log in plaintext; records
carry digests plus an optional reference into the encrypted payload vault.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterator, Protocol

from .clock import Clock, utc_ms
from .errors import ConfigurationError, FormatError

GENESIS_HASH = "0" * 64

_DIGESTS: dict[str, Callable[[bytes], "hashlib._Hash"]] = {
    "sha256": hashlib.sha256,
}

SYSTEM_USER = "system"


class AuditAction(str, Enum):
    """Every auditable platform event. The integration sweep test checks
    that each member is reachable through a user-visible operation."""

    USER_CREATED = "user_created"
    LOGIN_SUCCEEDED = "login_succeeded"
    LOGIN_FAILED = "login_failed"
    LOGOUT = "logout"
    ACCESS_DENIED = "access_denied"

    SERVICE_REGISTERED = "service_registered"
    EVALUATION_APPENDED = "evaluation_appended"

    CERTIFICATION_ADDED = "certification_added"
    REGULATION_CHECKED = "regulation_checked"
    DISCLAIMER_ACKNOWLEDGED = "disclaimer_acknowledged"

    CASE_INGESTED = "case_ingested"
    JOB_CREATED = "job_created"
    JOB_CONFIRMED = "job_confirmed"
    JOB_CONFIRM_REFUSED = "job_confirm_refused"
    JOB_EXECUTED = "job_executed"
    JOB_EXECUTION_FAILED = "job_execution_failed"
    JOB_CLOSED = "job_closed"

    GROUND_TRUTH_SUBMITTED = "ground_truth_submitted"
    SNAPSHOT_COMPUTED = "snapshot_computed"
    DRIFT_ALERT = "drift_alert"

    BIAS_LIMITATIONS_DECLARED = "bias_limitations_declared"
    BIAS_TEST_RUN = "bias_test_run"

    USABILITY_PROMPT_ISSUED = "usability_prompt_issued"
    USABILITY_RESPONSE_RECORDED = "usability_response_recorded"
    USABILITY_AGGREGATED = "usability_aggregated"

    REVIEW_SESSION_CREATED = "review_session_created"
    REVIEW_SESSION_COMPLETED = "review_session_completed"


def canonical_json(payload: Any) -> str:
    """Deterministic serialization used for hashing and export."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def content_digest(data: bytes, algorithm: str = "sha256") -> str:
    try:
        factory = _DIGESTS[algorithm]
    except KeyError:
        raise ConfigurationError(f"unknown digest algorithm: {algorithm}") from None
    return factory(data).hexdigest()


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: str
    user_id: str
    action: str
    service_id: str | None
    passport_version: int | None
    input_hash: str | None
    output_hash: str | None
    detail: dict
    payload_ref: str | None
    prev_hash: str
    record_hash: str

    def chained_fields(self) -> dict:
        """Every field covered by the record hash, i.e. all but the hash."""
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "user_id": self.user_id,
            "action": self.action,
            "service_id": self.service_id,
            "passport_version": self.passport_version,
            "input_hash": self.input_hash,
            "output_hash": self.output_hash,
            "detail": self.detail,
            "payload_ref": self.payload_ref,
            "prev_hash": self.prev_hash,
        }

    def to_line(self) -> str:
        fields = self.chained_fields()
        fields["record_hash"] = self.record_hash
        return canonical_json(fields)

    @staticmethod
    def from_line(line: str) -> "AuditRecord":
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"unparseable audit line: {exc}") from exc
        if not isinstance(raw, dict):
            raise FormatError("audit line is not an object")
        try:
            return AuditRecord(
                seq=raw["seq"],
                timestamp=raw["timestamp"],
                user_id=raw["user_id"],
                action=raw["action"],
                service_id=raw.get("service_id"),
                passport_version=raw.get("passport_version"),
                input_hash=raw.get("input_hash"),
                output_hash=raw.get("output_hash"),
                detail=raw.get("detail", {}),
                payload_ref=raw.get("payload_ref"),
                prev_hash=raw["prev_hash"],
                record_hash=raw["record_hash"],
            )
        except KeyError as exc:
            raise FormatError(f"audit line missing field {exc}") from exc


@dataclass(frozen=True)
class ChainStatus:
    ok: bool
    first_bad_seq: int | None = None
    checked: int = 0


class SegmentStore(Protocol):
    """Append-only line storage. No update, no delete."""

    def append_line(self, seq: int, line: str) -> None: ...

    def iter_lines(self) -> Iterator[str]: ...


class MemorySegmentStore:
    """In-memory store for tests and ephemeral platforms."""

    def __init__(self):
        self.lines: list[str] = []

    def append_line(self, seq: int, line: str) -> None:
        self.lines.append(line)

    def iter_lines(self) -> Iterator[str]:
        return iter(list(self.lines))


class FileSegmentStore:
    """Append-only segmented log files plus a segment index.

    Segments rotate at a byte threshold; the hash chain continues across
    segment boundaries. The index maps each segment to its first sequence
    number so ranged exports avoid a full scan.
    """

    SEGMENT_PREFIX = "audit-"
    SEGMENT_SUFFIX = ".jsonl"

    def __init__(self, directory: Path, max_segment_bytes: int = 1_000_000):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.max_segment_bytes = max_segment_bytes
        self.index_path = self.directory / "index.json"
        self._index: list[dict] = []
        if self.index_path.exists():
            self._index = json.loads(self.index_path.read_text())["segments"]

    def _segment_path(self, name: str) -> Path:
        return self.directory / name

    def _open_segment(self, first_seq: int) -> str:
        name = f"{self.SEGMENT_PREFIX}{len(self._index) + 1:06d}{self.SEGMENT_SUFFIX}"
        self._index.append({"name": name, "first_seq": first_seq})
        self.index_path.write_text(json.dumps({"segments": self._index}, indent=1))
        return name

    def append_line(self, seq: int, line: str) -> None:
        data = line + "\n"
        if not self._index:
            name = self._open_segment(seq)
        else:
            name = self._index[-1]["name"]
            if self._segment_path(name).stat().st_size + len(data) > self.max_segment_bytes:
                name = self._open_segment(seq)
        with open(self._segment_path(name), "a", encoding="ascii") as handle:
            handle.write(data)
            handle.flush()

    def iter_lines(self) -> Iterator[str]:
        for entry in self._index:
            path = self._segment_path(entry["name"])
            if not path.exists():
                continue
            with open(path, "r", encoding="ascii") as handle:
                for line in handle:
                    line = line.rstrip("\n")
                    if line:
                        yield line

    def segment_names(self) -> list[str]:
        return [entry["name"] for entry in self._index]


class AuditTrail:
    """Single-writer hash chain over a segment store.

    Appends are globally serialized to keep sequence numbers gapless; the
    write-ahead contract means the triggering operation must not report
    success before ``append`` returns.
    """

    def __init__(
        self,
        store: SegmentStore | None = None,
        *,
        clock: Clock | None = None,
        digest_algorithm: str = "sha256",
    ):
        if digest_algorithm not in _DIGESTS:
            raise ConfigurationError(f"unknown digest algorithm: {digest_algorithm}")
        from .clock import SystemClock

        self.store = store if store is not None else MemorySegmentStore()
        self.clock = clock or SystemClock()
        self.digest_algorithm = digest_algorithm
        self._lock = threading.Lock()
        self._records: list[AuditRecord] = []
        self._load_existing()

    def _load_existing(self) -> None:
        for line in self.store.iter_lines():
            self._records.append(AuditRecord.from_line(line))

    def _hash_fields(self, fields: dict) -> str:
        return content_digest(
            canonical_json(fields).encode("ascii"), self.digest_algorithm
        )

    # -- writing ---------------------------------------------------------

    def append(
        self,
        action: AuditAction | str,
        *,
        user_id: str = SYSTEM_USER,
        service_id: str | None = None,
        passport_version: int | None = None,
        input_hash: str | None = None,
        output_hash: str | None = None,
        detail: dict | None = None,
        payload_ref: str | None = None,
    ) -> AuditRecord:
        action_value = AuditAction(action).value
        with self._lock:
            prev_hash = self._records[-1].record_hash if self._records else GENESIS_HASH
            fields = {
                "seq": len(self._records) + 1,
                "timestamp": utc_ms(self.clock.now()),
                "user_id": user_id,
                "action": action_value,
                "service_id": service_id,
                "passport_version": passport_version,
                "input_hash": input_hash,
                "output_hash": output_hash,
                "detail": detail or {},
                "payload_ref": payload_ref,
                "prev_hash": prev_hash,
            }
            record = AuditRecord(record_hash=self._hash_fields(fields), **fields)
            # Persist before acknowledging; a failed write fails the caller.
            self.store.append_line(record.seq, record.to_line())
            self._records.append(record)
            return record

    # -- reading ---------------------------------------------------------

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def verify_chain(
        self, start: int | None = None, end: int | None = None
    ) -> ChainStatus:
        """Recompute every hash link from the persisted bytes.

        Reports the first inconsistency: an unparseable line, a sequence
        gap, a broken predecessor link, or a record whose stored digest
        does not match its recomputed digest.
        """
        lo = 1 if start is None else start
        prev_hash = GENESIS_HASH
        expected_seq = 1
        checked = 0
        for position, line in enumerate(self.store.iter_lines(), start=1):
            try:
                record = AuditRecord.from_line(line)
            except FormatError:
                # An unreadable record poisons everything after it; report
                # it at its position regardless of the requested range.
                return ChainStatus(ok=False, first_bad_seq=position, checked=checked)
            bad = (
                record.seq != expected_seq
                or record.prev_hash != prev_hash
                or self._hash_fields(record.chained_fields()) != record.record_hash
                # Byte-level check: the stored line must be exactly the
                # canonical form, or extra/renamed keys could hide edits.
                or record.to_line() != line
            )
            if bad:
                return ChainStatus(ok=False, first_bad_seq=expected_seq, checked=checked)
            if position >= lo and (end is None or position <= end):
                checked += 1
            prev_hash = record.record_hash
            expected_seq += 1
            if end is not None and position >= end:
                break
        return ChainStatus(ok=True, checked=checked)

    def query(
        self,
        *,
        user: str | None = None,
        service: str | None = None,
        action: AuditAction | str | None = None,
        ts_from: str | None = None,
        ts_to: str | None = None,
        offset: int = 0,
        limit: int = 100,
    ) -> list[AuditRecord]:
        action_value = AuditAction(action).value if action is not None else None
        matched = []
        for record in self._records:
            if user is not None and record.user_id != user:
                continue
            if service is not None and record.service_id != service:
                continue
            if action_value is not None and record.action != action_value:
                continue
            if ts_from is not None and record.timestamp < ts_from:
                continue
            if ts_to is not None and record.timestamp > ts_to:
                continue
            matched.append(record)
        return matched[offset : offset + limit]

    def export_lines(
        self, start: int | None = None, end: int | None = None
    ) -> Iterator[str]:
        """Canonical serialized records, bit-exact for external re-verification."""
        for position, line in enumerate(self.store.iter_lines(), start=1):
            if start is not None and position < start:
                continue
            if end is not None and position > end:
                break
            yield line
