"""Score the service's Stage-2 reports against the generator's oracle.

Each labeled case gets a fresh zone: its population permits are created
and submitted, then the candidate is created, submitted and validated.
A case counts as correct only if the service's verdicts equal the oracle
verdicts on every rule.  The scored service must run with the background
sweep disabled so the staged population cannot be expired mid-case.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .replay import Client, ReplayError, TimingLog

RULES = ("expiry", "duplicate", "overlap")


@dataclass
class ScoreResult:
    total: int
    correct: int
    mismatches: list[dict] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "mismatches": self.mismatches[:50],
        }


def load_cases(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in open(path)]


def score_validation(
    target: str,
    cases: list[dict],
    *,
    issuer_credentials: dict[str, str],
    inject_mislabels: int = 0,
    workers: int = 8,
    out_path: str | Path | None = None,
    run_tag: str | None = None,
) -> ScoreResult:
    """Drive every case through the HTTP API and compare rule verdicts.

    Case zones are suffixed with a per-run tag so repeated runs against one
    long-lived service never see each other's staged populations.

    ``inject_mislabels`` deliberately flips the expected expiry verdict of
    the first N cases — a mutation check that the harness actually compares
    something (accuracy must drop by exactly N/total).
    """
    if not cases:
        raise ReplayError("need at least one labeled case")
    tag = run_tag or uuid.uuid4().hex[:8]
    cases = [{**c, "zone_id": f"{c['zone_id']}--{tag}"} for c in cases]
    for case in cases[:inject_mislabels]:
        case["expected"] = {**case["expected"], "expiry": not case["expected"]["expiry"]}

    log = TimingLog()
    anchor = datetime.now(timezone.utc).replace(microsecond=0)
    work: queue.Queue = queue.Queue()
    for case in cases:
        work.put(case)
    results: list[tuple[int, bool, dict | None]] = []
    lock = threading.Lock()

    def worker(wid: int) -> None:
        client = Client(target, log, workers, wid)
        try:
            for user_id, password in issuer_credentials.items():
                client.login(user_id, password)
            while True:
                try:
                    case = work.get_nowait()
                except queue.Empty:
                    return
                ok, mismatch = _score_case(client, case, anchor)
                with lock:
                    results.append((case["case_id"], ok, mismatch))
        finally:
            client.close()

    threads = [threading.Thread(target=worker, args=(w,), daemon=True) for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    correct = sum(1 for _, ok, _ in results if ok)
    mismatches = [m for _, ok, m in results if not ok and m]
    result = ScoreResult(total=len(cases), correct=correct, mismatches=mismatches)
    if out_path is not None:
        Path(out_path).write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    return result


def _window_body(anchor: datetime, from_off: int, to_off: int) -> dict:
    return {
        "valid_from": (anchor + timedelta(minutes=from_off)).isoformat(),
        "valid_to": (anchor + timedelta(minutes=to_off)).isoformat(),
    }


def _score_case(client: Client, case: dict, anchor: datetime) -> tuple[bool, dict | None]:
    zone = case["zone_id"]
    try:
        for member in case["population"]:
            resp = client.call(
                "POST",
                "/permits",
                as_user=member["issuer_id"],
                json_body={
                    "category": member["category"],
                    "zone_id": zone,
                    "window": _window_body(anchor, member["from_off"], member["to_off"]),
                    "description": f"population for case {case['case_id']}",
                },
            )
            if resp.status_code != 201:
                raise ReplayError(f"population initiate failed: {resp.text}")
            member_id = resp.json()["id"]
            resp = client.call(
                "POST", f"/permits/{member_id}/submit", as_user=member["issuer_id"]
            )
            if resp.status_code != 200:
                raise ReplayError(f"population submit failed: {resp.text}")

        cand = case["candidate"]
        resp = client.call(
            "POST",
            "/permits",
            as_user=cand["issuer_id"],
            json_body={
                "category": cand["category"],
                "zone_id": zone,
                "window": _window_body(anchor, cand["from_off"], cand["to_off"]),
                "description": f"candidate for case {case['case_id']}",
            },
        )
        if resp.status_code != 201:
            raise ReplayError(f"candidate initiate failed: {resp.text}")
        cand_id = resp.json()["id"]
        resp = client.call("POST", f"/permits/{cand_id}/submit", as_user=cand["issuer_id"])
        if resp.status_code != 200:
            raise ReplayError(f"candidate submit failed: {resp.text}")
        resp = client.call("POST", f"/permits/{cand_id}/validate", as_user=cand["issuer_id"])
        if resp.status_code != 200:
            raise ReplayError(f"validate failed: {resp.text}")
        verdicts = {
            v["rule_name"]: v["passed"] for v in resp.json()["report"]["verdicts"]
        }
        got = {rule: verdicts[rule] for rule in RULES}
        expected = {rule: case["expected"][rule] for rule in RULES}
        if got == expected:
            return True, None
        return False, {"case_id": case["case_id"], "expected": expected, "got": got}
    except ReplayError as exc:
        return False, {"case_id": case["case_id"], "error": str(exc)[:300]}
