"""Notification outbox, pluggable delivery sinks and the sweep scheduler.

Deduplication — at most one delivery per (permit_id, trigger, recipient,
revision) — is enforced by the storage layer on insert, not by worker
discipline, so concurrent dispatchers stay safe.  The default sink appends
one JSON object per line to a file; Email/SMS would be further sink
implementations and are out of scope.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from .clock import rfc3339
from .errors import ConfigError

MAX_DELIVERY_ATTEMPTS = 3


class Trigger(str, Enum):
    APPROVED = "approved"
    PRE_EXPIRY_WARNING = "pre_expiry_warning"
    EXPIRED = "expired"
    RENEWED = "renewed"
    SUSPENDED = "suspended"
    CLOSED = "closed"


class DeliveryStatus(str, Enum):
    PENDING = "pending"
    DELIVERED = "delivered"
    FAILED = "failed"


@dataclass(frozen=True)
class Notification:
    id: int
    created_at: datetime
    recipient: str
    trigger: Trigger
    permit_id: int
    permit_revision: int
    delivery_status: DeliveryStatus = DeliveryStatus.PENDING
    channel: str = "file"

    @property
    def dedup_key(self) -> tuple[int, str, str, int]:
        return (self.permit_id, self.trigger.value, self.recipient, self.permit_revision)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "created_at": rfc3339(self.created_at),
            "recipient": self.recipient,
            "trigger": self.trigger.value,
            "permit_id": self.permit_id,
            "permit_revision": self.permit_revision,
            "delivery_status": self.delivery_status.value,
            "channel": self.channel,
        }


@dataclass(frozen=True)
class SweepConfig:
    sweep_interval: timedelta = timedelta(seconds=30)
    pre_expiry_lead: timedelta = timedelta(minutes=30)

    def __post_init__(self):
        if self.pre_expiry_lead <= self.sweep_interval:
            raise ConfigError(
                "pre_expiry_lead_minutes",
                "pre-expiry lead must exceed the sweep interval",
            )


class NotificationSink:
    """Delivery target; implementations raise on failure."""

    name = "null"

    def deliver(self, notification: Notification) -> None:  # pragma: no cover - interface
        raise NotImplementedError


class FileSink(NotificationSink):
    """Appends one JSON object per line: created_at, recipient, trigger, permit_id."""

    name = "file"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def deliver(self, notification: Notification) -> None:
        line = json.dumps(
            {
                "created_at": rfc3339(notification.created_at),
                "recipient": notification.recipient,
                "trigger": notification.trigger.value,
                "permit_id": notification.permit_id,
            },
            sort_keys=True,
        )
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


class MemorySink(NotificationSink):
    name = "memory"

    def __init__(self):
        self.delivered: list[Notification] = []
        self._lock = threading.Lock()

    def deliver(self, notification: Notification) -> None:
        with self._lock:
            self.delivered.append(notification)


class FailingSink(NotificationSink):
    """Always raises; used to exercise the retry bound."""

    name = "failing"

    def __init__(self):
        self.attempts = 0

    def deliver(self, notification: Notification) -> None:
        self.attempts += 1
        raise IOError("sink configured to fail")


class Dispatcher:
    """Hands pending notifications to the sink with bounded retries.

    Retries use exponential backoff (base * 2^attempt); tests set base=0.
    """

    def __init__(self, storage, sink: NotificationSink, *, backoff_base: float = 0.05):
        self._storage = storage
        self._sink = sink
        self._backoff_base = backoff_base

    def dispatch(self, notification: Notification) -> DeliveryStatus:
        for attempt in range(MAX_DELIVERY_ATTEMPTS):
            try:
                self._sink.deliver(notification)
                self._storage.set_notification_status(notification.id, DeliveryStatus.DELIVERED)
                return DeliveryStatus.DELIVERED
            except Exception:
                if attempt < MAX_DELIVERY_ATTEMPTS - 1 and self._backoff_base > 0:
                    time.sleep(self._backoff_base * (2**attempt))
        self._storage.set_notification_status(notification.id, DeliveryStatus.FAILED)
        return DeliveryStatus.FAILED

    def dispatch_all(self, notifications: list[Notification]) -> None:
        for n in notifications:
            self.dispatch(n)


class SweepScheduler:
    """Runs the expiry sweep on a fixed interval in a daemon thread.

    At most one sweep runs at a time; ``run_once`` shares the same mutex so
    manual and scheduled sweeps never interleave.
    """

    def __init__(self, sweep_fn: Callable[[], list[int]], interval: timedelta):
        self._sweep_fn = sweep_fn
        self._interval = interval.total_seconds()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._loop, name="ptw-sweeper", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def _loop(self) -> None:
        while not self._stop.wait(self._interval):
            try:
                self._sweep_fn()
            except Exception:  # noqa: BLE001 - sweeps must never kill the thread
                pass
