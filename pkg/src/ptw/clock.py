"""Clock abstraction so tests and the expiry sweep can control time."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Protocol


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def as_utc(dt: datetime) -> datetime:
    """Coerce to an aware UTC datetime; naive input is taken as UTC."""
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def rfc3339(dt: datetime) -> str:
    return as_utc(dt).isoformat().replace("+00:00", "Z")


def parse_rfc3339(text: str) -> datetime:
    return as_utc(datetime.fromisoformat(text.replace("Z", "+00:00")))


class Clock(Protocol):
    def now(self) -> datetime: ...


class SystemClock:
    def now(self) -> datetime:
        return utcnow()


class ManualClock:
    """Steppable clock for tests; starts at ``start`` and only moves forward."""

    def __init__(self, start: datetime | None = None):
        self._now = as_utc(start) if start else utcnow()

    def now(self) -> datetime:
        return self._now

    def advance(self, seconds: float = 0.0, **kwargs) -> datetime:
        self._now += timedelta(seconds=seconds, **kwargs)
        return self._now

    def set(self, dt: datetime) -> None:
        dt = as_utc(dt)
        if dt < self._now:
            raise ValueError("manual clock cannot move backwards")
        self._now = dt
