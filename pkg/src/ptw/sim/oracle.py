"""Stand-alone brute-force verdict oracle for labeled cases.

Deliberately shares no code with ptw.validation: it works on raw
minute-offset case dicts and re-derives every rule from first principles,
so it can act as an independent referee for the engine under test.
"""

from __future__ import annotations

#: category pairs that conflict under the default configuration
_CONFLICT_PAIRS = {
    frozenset(["HotWork", "ConfinedSpaceEntry"]),
    frozenset(["HotWork", "Electrical"]),
}

MAX_DURATION_MIN = 8 * 60


def _overlap_minutes(a_from: int, a_to: int, b_from: int, b_to: int) -> bool:
    """Minute-resolution membership scan over half-open intervals."""
    lo = min(a_from, b_from)
    hi = max(a_to, b_to)
    for minute in range(lo, hi):
        if a_from <= minute < a_to and b_from <= minute < b_to:
            return True
    return False


def expiry_passes(case: dict) -> bool:
    cand = case["candidate"]
    if cand["to_off"] <= 0:
        return False
    if cand["to_off"] - cand["from_off"] > MAX_DURATION_MIN:
        return False
    return True


def duplicate_passes(case: dict) -> bool:
    cand = case["candidate"]
    for other in case["population"]:
        if (
            other["issuer_id"] == cand["issuer_id"]
            and other["category"] == cand["category"]
            and _overlap_minutes(
                cand["from_off"], cand["to_off"], other["from_off"], other["to_off"]
            )
        ):
            return False
    return True


def overlap_passes(case: dict) -> bool:
    cand = case["candidate"]
    for other in case["population"]:
        pair = frozenset([other["category"], cand["category"]])
        if pair in _CONFLICT_PAIRS and _overlap_minutes(
            cand["from_off"], cand["to_off"], other["from_off"], other["to_off"]
        ):
            return False
    return True


def expected_verdicts(case: dict) -> dict[str, bool]:
    """Per-rule expectations; population and candidate share the case zone."""
    return {
        "expiry": expiry_passes(case),
        "duplicate": duplicate_passes(case),
        "overlap": overlap_passes(case),
    }


def form_accepts(case: dict) -> bool:
    """What a client-side form (no server state) can decide: window ordering,
    duration cap and not-already-expired.  Duplicates/overlaps need the
    server, so the form predicts acceptance for those."""
    cand = case["candidate"]
    if cand["from_off"] >= cand["to_off"]:
        return False
    return expiry_passes(case)
