"""Injectable clock so expiry, windows, and audit timestamps are testable."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Protocol


class Clock(Protocol):
    def now(self) -> datetime: ...


class SystemClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class ManualClock:
    """Deterministic clock for tests; advances only when told to."""

    def __init__(self, start: datetime | None = None):
        self._now = start or datetime(2025, 6, 1, 9, 0, 0, tzinfo=timezone.utc)

    def now(self) -> datetime:
        return self._now

    def advance(self, **kwargs) -> datetime:
        self._now += timedelta(**kwargs)
        return self._now

    def set(self, moment: datetime) -> None:
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=timezone.utc)
        self._now = moment


def utc_ms(moment: datetime) -> str:
    """Canonical timestamp format: UTC ISO-8601 with millisecond precision."""
    return moment.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def parse_ts(text: str) -> datetime:
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt
