"""Service configuration.

Config files are plain ``key = value`` lines (``#`` comments); every key
can be overridden by an environment variable with the ``PTW_`` prefix in
upper case (e.g. ``PTW_LISTEN_PORT``).  Invalid values abort startup with
a ConfigError naming the offending key.  A documented sample ships as
``config.sample.env``.
"""

from __future__ import annotations

import os
import secrets
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Mapping

from .errors import ConfigError, UnknownCategoryError
from .model import GasThresholds, PermitCategory
from .notifications import SweepConfig
from .validation import ConflictMatrix

ENV_PREFIX = "PTW_"


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8017
    storage: str = "memory"  # "memory" or "sqlite:<path>"
    gas: GasThresholds = field(default_factory=GasThresholds)
    gas_validity: timedelta = timedelta(minutes=60)
    max_permit_duration: timedelta = timedelta(hours=8)
    conflict_matrix: ConflictMatrix = field(default_factory=ConflictMatrix.default)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    run_background_sweep: bool = True
    session_lifetime: timedelta = timedelta(hours=8)
    notification_sink: str = "memory"  # "memory" or "file:<path>"
    notification_backoff_base: float = 0.05
    token_secret: str = ""
    bootstrap_admin_id: str = "admin"
    bootstrap_admin_password: str = "admin"

    def secret_bytes(self) -> bytes:
        return self.token_secret.encode("utf-8")


_DEFAULTS = ServiceConfig()


def _read_kv_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _get_float(values: Mapping[str, str], key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(key, f"not a number: {values[key]!r}") from None


def _get_int(values: Mapping[str, str], key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(values[key])
    except ValueError:
        raise ConfigError(key, f"not an integer: {values[key]!r}") from None


def _get_bool(values: Mapping[str, str], key: str, default: bool) -> bool:
    if key not in values:
        return default
    text = values[key].lower()
    if text in ("true", "1", "yes", "on"):
        return True
    if text in ("false", "0", "no", "off"):
        return False
    raise ConfigError(key, f"not a boolean: {values[key]!r}")


def _parse_matrix(text: str) -> ConflictMatrix:
    """Directed ``A:B`` entries, comma separated; both directions required."""
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ConfigError("conflict_matrix", f"bad entry {chunk!r}")
        try:
            entries.append(
                (PermitCategory.parse(parts[0].strip()), PermitCategory.parse(parts[1].strip()))
            )
        except UnknownCategoryError:
            raise ConfigError("conflict_matrix", f"unknown category in {chunk!r}") from None
    return ConflictMatrix.from_directed_entries(entries, config_key="conflict_matrix")


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Merge defaults <- file <- environment, validating as we go."""
    env = os.environ if env is None else env
    values: dict[str, str] = {}
    if path is not None:
        values.update(_read_kv_file(path))
    for key, value in env.items():
        if key.startswith(ENV_PREFIX):
            values[key[len(ENV_PREFIX):].lower()] = value

    gas = GasThresholds(
        o2_min=_get_float(values, "gas_o2_min", _DEFAULTS.gas.o2_min),
        o2_max=_get_float(values, "gas_o2_max", _DEFAULTS.gas.o2_max),
        lel_max=_get_float(values, "gas_lel_max", _DEFAULTS.gas.lel_max),
        co_max=_get_float(values, "gas_co_max", _DEFAULTS.gas.co_max),
    )
    if gas.o2_min >= gas.o2_max:
        raise ConfigError("gas_o2_min", "o2_min must be below o2_max")

    sweep_seconds = _get_float(values, "sweep_interval_seconds", 30.0)
    lead_minutes = _get_float(values, "pre_expiry_lead_minutes", 30.0)
    if sweep_seconds <= 0:
        raise ConfigError("sweep_interval_seconds", "must be positive")
    sweep = SweepConfig(
        sweep_interval=timedelta(seconds=sweep_seconds),
        pre_expiry_lead=timedelta(minutes=lead_minutes),
    )

    max_hours = _get_float(values, "max_permit_duration_hours", 8.0)
    if max_hours <= 0:
        raise ConfigError("max_permit_duration_hours", "must be positive")

    session_hours = _get_float(values, "session_lifetime_hours", 8.0)
    if session_hours <= 0:
        raise ConfigError("session_lifetime_hours", "must be positive")

    storage = values.get("storage", _DEFAULTS.storage)
    if storage != "memory" and not storage.startswith("sqlite:"):
        raise ConfigError("storage", f"expected 'memory' or 'sqlite:<path>', got {storage!r}")

    sink = values.get("notification_sink", _DEFAULTS.notification_sink)
    if sink != "memory" and not sink.startswith("file:"):
        raise ConfigError(
            "notification_sink", f"expected 'memory' or 'file:<path>', got {sink!r}"
        )

    matrix = (
        _parse_matrix(values["conflict_matrix"])
        if "conflict_matrix" in values
        else ConflictMatrix.default()
    )

    return ServiceConfig(
        listen_host=values.get("listen_host", _DEFAULTS.listen_host),
        listen_port=_get_int(values, "listen_port", _DEFAULTS.listen_port),
        storage=storage,
        gas=gas,
        gas_validity=timedelta(minutes=_get_float(values, "gas_validity_minutes", 60.0)),
        max_permit_duration=timedelta(hours=max_hours),
        conflict_matrix=matrix,
        sweep=sweep,
        run_background_sweep=_get_bool(values, "run_background_sweep", True),
        session_lifetime=timedelta(hours=session_hours),
        notification_sink=sink,
        notification_backoff_base=_get_float(
            values, "notification_backoff_base", _DEFAULTS.notification_backoff_base
        ),
        token_secret=values.get("token_secret") or secrets.token_hex(32),
        bootstrap_admin_id=values.get("bootstrap_admin_id", _DEFAULTS.bootstrap_admin_id),
        bootstrap_admin_password=values.get(
            "bootstrap_admin_password", _DEFAULTS.bootstrap_admin_password
        ),
    )
