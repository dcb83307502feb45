"""Stage-2 rule engine: expiry, duplicate and overlap checks.

Pure and reentrant: ``validate`` is a function of its inputs only.  Time
intervals are half-open, so back-to-back windows sharing an endpoint do
not overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Any, Iterable, Sequence

from .clock import rfc3339
from .errors import ConfigError, WrongStatusError
from .model import Permit, PermitCategory, PermitStatus, TimeWindow

RULE_EXPIRY = "expiry"
RULE_DUPLICATE = "duplicate"
RULE_OVERLAP = "overlap"
RULE_ZONE_RESTRICTION = "zone_restriction"

DEFAULT_MAX_DURATION = timedelta(hours=8)


@dataclass(frozen=True)
class RuleVerdict:
    rule_name: str
    passed: bool
    detail: str = ""

    def __post_init__(self):
        if not self.passed and not self.detail:
            raise ValueError("failing verdict requires a non-empty detail")

    def to_dict(self) -> dict[str, Any]:
        return {"rule_name": self.rule_name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    permit_id: int
    checked_at: datetime
    verdicts: tuple[RuleVerdict, ...]

    @property
    def overall(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict_for(self, rule_name: str) -> RuleVerdict | None:
        for v in self.verdicts:
            if v.rule_name == rule_name:
                return v
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "permit_id": self.permit_id,
            "checked_at": rfc3339(self.checked_at),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "overall": "pass" if self.overall else "fail",
        }


class ConflictMatrix:
    """Symmetric category-pair conflict configuration.

    Stored as unordered pairs, so symmetry holds by construction; the
    explicit-entry constructor rejects asymmetric input instead of silently
    symmetrizing it.
    """

    def __init__(self, pairs: Iterable[tuple[PermitCategory, PermitCategory]] = ()):
        self._pairs = frozenset(frozenset((a, b)) for a, b in pairs)

    def conflicts(self, a: PermitCategory, b: PermitCategory) -> bool:
        return frozenset((a, b)) in self._pairs

    def pair_list(self) -> list[tuple[str, str]]:
        out = []
        for pair in self._pairs:
            members = sorted(c.value for c in pair)
            if len(members) == 1:
                members = members * 2
            out.append((members[0], members[1]))
        return sorted(out)

    @classmethod
    def default(cls) -> "ConflictMatrix":
        # ignition vs atmosphere and ignition vs live-circuit hazards
        return cls(
            [
                (PermitCategory.HOT_WORK, PermitCategory.CONFINED_SPACE_ENTRY),
                (PermitCategory.HOT_WORK, PermitCategory.ELECTRICAL),
            ]
        )

    @classmethod
    def from_directed_entries(
        cls, entries: Iterable[tuple[PermitCategory, PermitCategory]], *, config_key: str = "conflict_matrix"
    ) -> "ConflictMatrix":
        """Build from explicit directed entries, requiring symmetry.

        Both (a, b) and (b, a) must be listed (diagonal entries stand
        alone); anything one-sided aborts with a ConfigError naming the key.
        """
        directed = set(entries)
        for a, b in directed:
            if a != b and (b, a) not in directed:
                raise ConfigError(
                    config_key,
                    f"asymmetric matrix: {a.value}:{b.value} listed without {b.value}:{a.value}",
                )
        return cls(directed)

    def __eq__(self, other):
        return isinstance(other, ConflictMatrix) and self._pairs == other._pairs

    def __hash__(self):
        return hash(self._pairs)


def windows_overlap(a: TimeWindow, b: TimeWindow) -> bool:
    """Half-open interval intersection test."""
    return a.valid_from < b.valid_to and b.valid_from < a.valid_to


def expiry_check(
    candidate: Permit, now: datetime, max_duration: timedelta = DEFAULT_MAX_DURATION
) -> RuleVerdict:
    """Passes iff the window has time left (strict) and fits the duration cap."""
    if candidate.window.valid_to <= now:
        return RuleVerdict(RULE_EXPIRY, False, "window already expired")
    if candidate.window.duration > max_duration:
        return RuleVerdict(
            RULE_EXPIRY,
            False,
            f"window duration {candidate.window.duration} exceeds maximum {max_duration}",
        )
    return RuleVerdict(RULE_EXPIRY, True)


def duplicate_check(candidate: Permit, active_set: Sequence[Permit]) -> RuleVerdict:
    """A duplicate shares issuer, zone and category with an overlapping
    active permit — the accidental double-submission pattern."""
    dupes = sorted(
        p.id
        for p in active_set
        if p.id != candidate.id
        and p.issuer_id == candidate.issuer_id
        and p.zone_id == candidate.zone_id
        and p.category == candidate.category
        and windows_overlap(p.window, candidate.window)
    )
    if dupes:
        return RuleVerdict(
            RULE_DUPLICATE, False, "duplicate of permit(s): " + ", ".join(map(str, dupes))
        )
    return RuleVerdict(RULE_DUPLICATE, True)


def conflict_check(
    candidate: Permit, active_set: Sequence[Permit], matrix: ConflictMatrix
) -> RuleVerdict:
    """Fails when a same-zone active permit overlaps in time and the
    category pair is marked conflicting; detail lists ids ascending."""
    conflicting = sorted(
        p.id
        for p in active_set
        if p.id != candidate.id
        and p.zone_id == candidate.zone_id
        and windows_overlap(p.window, candidate.window)
        and matrix.conflicts(p.category, candidate.category)
    )
    if conflicting:
        return RuleVerdict(
            RULE_OVERLAP, False, "conflicts with permit(s): " + ", ".join(map(str, conflicting))
        )
    return RuleVerdict(RULE_OVERLAP, True)


def validate(
    candidate: Permit,
    active_set: Sequence[Permit],
    now: datetime,
    matrix: ConflictMatrix,
    *,
    max_duration: timedelta = DEFAULT_MAX_DURATION,
    extra_verdicts: Sequence[RuleVerdict] = (),
) -> ValidationReport:
    """Run the registered rules in order; ``extra_verdicts`` lets callers
    append registry-sourced checks (e.g. zone restriction) after the three
    core rules."""
    if candidate.status != PermitStatus.SUBMITTED:
        raise WrongStatusError(
            f"validation applies to Submitted permits, not {candidate.status.value}"
        )
    verdicts = (
        expiry_check(candidate, now, max_duration),
        duplicate_check(candidate, active_set),
        conflict_check(candidate, active_set, matrix),
        *extra_verdicts,
    )
    return ValidationReport(permit_id=candidate.id, checked_at=now, verdicts=verdicts)
