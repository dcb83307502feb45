"""Workload replayer: drives full permit lifecycles over HTTP.

Wall-clock latency is measured per request.  The *approval time* metric is
simulated-clock: it sums the pre-drawn think-times from the request file
(human steps dominate approval latency, not the API), so results are
deterministic for a given seed and independent of concurrency.
"""

from __future__ import annotations

import csv
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import httpx

from .spec import WorkloadSpec

SETUP_CONCURRENCY = 16


class ReplayError(RuntimeError):
    pass


@dataclass
class TimingLog:
    """Thread-safe collector; entries carry their origin virtual user."""

    entries: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, entry: dict) -> None:
        with self._lock:
            self.entries.append(entry)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return path


class Client:
    """One HTTP session; records wall latency for every call."""

    def __init__(self, base_url: str, log: TimingLog, concurrency: int, vu: int = 0):
        self._http = httpx.Client(base_url=base_url, timeout=60.0)
        self._log = log
        self._concurrency = concurrency
        self._vu = vu
        self.tokens: dict[str, str] = {}

    def close(self):
        self._http.close()

    def call(self, method: str, route: str, *, as_user: str | None = None, json_body=None,
             params=None) -> httpx.Response:
        headers = {}
        if as_user is not None:
            headers["Authorization"] = f"Bearer {self.tokens[as_user]}"
        t0 = time.perf_counter()
        dropped = False
        status = 0
        try:
            resp = self._http.request(method, route, headers=headers, json=json_body, params=params)
            status = resp.status_code
        except httpx.HTTPError as exc:
            dropped = True
            resp = None
            err = str(exc)
        ms = (time.perf_counter() - t0) * 1000
        self._log.add(
            {
                "kind": "request",
                "method": method,
                "route": _route_shape(route),
                "status": status,
                "ok": (not dropped) and status < 500,
                "dropped": dropped,
                "ms": round(ms, 3),
                "vu": self._vu,
                "concurrency": self._concurrency,
            }
        )
        if dropped:
            raise ReplayError(f"transport failure on {method} {route}: {err}")
        return resp

    def login(self, user_id: str, password: str) -> None:
        resp = self.call("POST", "/auth/login", json_body={"user_id": user_id, "password": password})
        if resp.status_code != 200:
            raise ReplayError(f"login failed for {user_id}: {resp.status_code} {resp.text}")
        self.tokens[user_id] = resp.json()["token"]


def load_dataset(dataset_dir: str | Path) -> dict[str, Any]:
    root = Path(dataset_dir)
    users = list(csv.DictReader(open(root / "users.csv", newline="")))
    requests = [json.loads(line) for line in open(root / "permit_requests.jsonl")]
    return {
        "root": root,
        "users": users,
        "requests": requests,
        "spec": WorkloadSpec.load(root / "spec.json"),
    }


def setup_target(client: Client, dataset: dict, admin_user: str, admin_password: str) -> None:
    """Create roster users and load the registries through the API."""
    client.login(admin_user, admin_password)
    existing = {
        u["user_id"]
        for u in client.call("GET", "/users", as_user=admin_user).json()["items"]
    }
    for row in dataset["users"]:
        if row["user_id"] in existing:
            continue
        resp = client.call(
            "POST",
            "/users",
            as_user=admin_user,
            json_body={
                "user_id": row["user_id"],
                "display_name": row["display_name"],
                "roles": row["roles"].split(";"),
                "password": row["password"],
            },
        )
        if resp.status_code not in (200, 201):
            raise ReplayError(f"user setup failed: {resp.text}")

    issuer = next(u for u in dataset["users"] if "PermitIssuer" in u["roles"])
    client.login(issuer["user_id"], issuer["password"])
    root = dataset["root"]
    for row in csv.DictReader(open(root / "contractors.csv", newline="")):
        client.call("POST", "/contractors", as_user=issuer["user_id"], json_body=row)
    for row in csv.DictReader(open(root / "machines.csv", newline="")):
        row = dict(row)
        row["inspection_interval_days"] = int(row["inspection_interval_days"])
        client.call("POST", "/machines", as_user=issuer["user_id"], json_body=row)


def _route_shape(route: str) -> str:
    """Collapse ids so latency groups by endpoint."""
    parts = []
    for piece in route.split("/"):
        parts.append("{id}" if piece and (piece.isdigit() or piece.startswith("PTW-")) else piece)
    return "/".join(parts)


@dataclass
class ReplaySummary:
    concurrency: int
    permits_total: int
    permits_closed: int
    permits_failed: int
    requests: int
    dropped: int
    illegal_transitions: int
    wall_seconds: float
    simulated_minutes: list[float]
    log_path: str | None = None

    def to_dict(self) -> dict:
        d = {
            "concurrency": self.concurrency,
            "permits_total": self.permits_total,
            "permits_closed": self.permits_closed,
            "permits_failed": self.permits_failed,
            "requests": self.requests,
            "dropped": self.dropped,
            "illegal_transitions": self.illegal_transitions,
            "wall_seconds": self.wall_seconds,
            "mean_simulated_minutes": (
                sum(self.simulated_minutes) / len(self.simulated_minutes)
                if self.simulated_minutes
                else 0.0
            ),
        }
        if self.log_path:
            d["log_path"] = self.log_path
        return d


def run_replay(
    target: str,
    dataset: dict,
    concurrency: int,
    *,
    admin_user: str = "admin",
    admin_password: str = "admin",
    out_dir: str | Path | None = None,
    skip_setup: bool = False,
) -> ReplaySummary:
    log = TimingLog()
    probe = httpx.Client(base_url=target, timeout=5.0)
    try:
        if probe.get("/health").status_code != 200:
            raise ReplayError(f"service at {target} is not healthy")
    except httpx.HTTPError as exc:
        raise ReplayError(f"service unreachable at {target}: {exc}") from exc
    finally:
        probe.close()

    setup_client = Client(target, log, concurrency)
    try:
        if not skip_setup:
            setup_target(setup_client, dataset, admin_user, admin_password)
        # shared token pool for every roster user
        tokens: dict[str, str] = {}
        passwords = {u["user_id"]: u["password"] for u in dataset["users"]}
        for row in dataset["users"]:
            setup_client.login(row["user_id"], row["password"])
        tokens.update(setup_client.tokens)
    finally:
        setup_client.close()

    officers = [u["user_id"] for u in dataset["users"] if "SafetyOfficer" in u["roles"]]
    aics = [u["user_id"] for u in dataset["users"] if "AreaInCharge" in u["roles"]]
    testers = [u["user_id"] for u in dataset["users"] if "GasTester" in u["roles"]]

    work: queue.Queue = queue.Queue()
    for request in dataset["requests"]:
        work.put(request)

    results: list[dict] = []
    results_lock = threading.Lock()
    illegal = [0]

    def lifecycle(vu: int) -> None:
        client = Client(target, log, concurrency, vu)
        client.tokens = tokens
        try:
            while True:
                try:
                    request = work.get_nowait()
                except queue.Empty:
                    return
                outcome = _drive_permit(client, request, officers, aics, testers, illegal)
                with results_lock:
                    results.append(outcome)
        finally:
            client.close()

    t0 = time.perf_counter()
    threads = [
        threading.Thread(target=lifecycle, args=(vu,), name=f"vu-{vu}", daemon=True)
        for vu in range(concurrency)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.perf_counter() - t0

    closed = [r for r in results if r["final_status"] == "Closed"]
    simulated = [r["simulated_minutes"] for r in closed]
    for r in results:
        log.add({"kind": "permit", **r, "concurrency": concurrency})

    request_entries = [e for e in log.entries if e["kind"] == "request"]
    summary = ReplaySummary(
        concurrency=concurrency,
        permits_total=len(dataset["requests"]),
        permits_closed=len(closed),
        permits_failed=len(results) - len(closed),
        requests=len(request_entries),
        dropped=sum(1 for e in request_entries if e["dropped"]),
        illegal_transitions=illegal[0],
        wall_seconds=round(wall, 3),
        simulated_minutes=simulated,
    )
    log.add({"kind": "summary", **summary.to_dict()})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = log.write(out / f"timing_c{concurrency}.jsonl")
        summary.log_path = str(path)
    return summary


def _drive_permit(
    client: Client, request: dict, officers: list[str], aics: list[str], testers: list[str],
    illegal: list[int],
) -> dict:
    """One full lifecycle; returns the permit outcome record."""
    from datetime import datetime, timedelta, timezone

    issuer = request["issuer_id"]
    acceptor = request["acceptor_id"]
    officer = officers[request["request_id"] % len(officers)]
    aic = aics[request["request_id"] % len(aics)]
    tester = testers[request["request_id"] % len(testers)]
    now = datetime.now(timezone.utc).replace(microsecond=0)
    body = {
        "category": request["category"],
        "zone_id": request["zone_id"],
        "window": {
            "valid_from": (now + timedelta(minutes=request["from_off"])).isoformat(),
            "valid_to": (now + timedelta(minutes=request["to_off"])).isoformat(),
        },
        "description": request["description"],
        "hazards": request["hazards"],
        "control_measures": request["control_measures"],
        "ppe_checklist": request["ppe"],
        "acceptor_id": acceptor,
    }
    t_start = time.perf_counter()
    simulated = (
        request["think_initiate_min"] + request["think_sign1_min"] + request["think_sign2_min"]
    )
    outcome = {
        "kind_detail": request["category"],
        "request_id": request["request_id"],
        "permit_id": None,
        "final_status": "failed",
        "simulated_minutes": round(simulated, 4),
        "wall_ms": 0.0,
    }

    def check(resp, step):
        if resp.status_code == 409:
            illegal[0] += 1
        if resp.status_code >= 400:
            raise ReplayError(f"{step} failed: {resp.status_code} {resp.text[:200]}")
        return resp

    try:
        resp = check(client.call("POST", "/permits", as_user=issuer, json_body=body), "initiate")
        pid = resp.json()["id"]
        outcome["permit_id"] = pid
        check(client.call("POST", f"/permits/{pid}/submit", as_user=issuer), "submit")
        check(client.call("POST", f"/permits/{pid}/validate", as_user=issuer), "validate")
        check(client.call("POST", f"/permits/{pid}/sign", as_user=officer), "sign-so")
        check(client.call("POST", f"/permits/{pid}/sign", as_user=aic), "sign-aic")
        if request["gas_gated"]:
            check(
                client.call(
                    "POST",
                    f"/permits/{pid}/gas-readings",
                    as_user=tester,
                    json_body={"oxygen_pct": 20.9, "lel_pct": 0.0, "co_ppm": 1.0},
                ),
                "gas",
            )
        check(client.call("POST", f"/permits/{pid}/accept", as_user=acceptor), "accept")
        check(
            client.call(
                "POST",
                f"/permits/{pid}/monitor",
                as_user=acceptor,
                json_body={"kind": "supervision_note", "payload": "work progressing"},
            ),
            "monitor",
        )
        check(
            client.call(
                "POST",
                f"/permits/{pid}/close-request",
                as_user=acceptor,
                json_body={"summary": "job complete", "feedback": "ok"},
            ),
            "close-request",
        )
        resp = check(
            client.call("POST", f"/permits/{pid}/close-confirm", as_user=officer), "close-confirm"
        )
        outcome["final_status"] = resp.json()["status"]
    except ReplayError as exc:
        outcome["error"] = str(exc)[:300]
    outcome["wall_ms"] = round((time.perf_counter() - t_start) * 1000, 3)
    return outcome
