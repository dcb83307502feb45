"""Seeded dataset generator.

Emits, under an output directory:

    spec.json             resolved workload spec
    users.csv             role roster (user_id, display_name, roles, title, password)
    machines.csv          machine registry rows
    contractors.csv       contractor registry rows
    incidents.csv         incident registry rows (zones disjoint from permit zones)
    permit_requests.jsonl one lifecycle request per line, windows as minute offsets
    labeled_cases.jsonl   validation cases with oracle verdicts baked in

Everything derives from random.Random(spec.seed), so identical (seed, spec)
yields byte-identical files.
"""

from __future__ import annotations

import csv
import json
import random
from datetime import date, timedelta
from pathlib import Path

from ..registries import CONTRACTOR_COLUMNS, INCIDENT_COLUMNS, MACHINE_COLUMNS
from .oracle import expected_verdicts, form_accepts
from .spec import WorkloadSpec

PERMIT_CATEGORIES = [
    "HeightWork", "Electrical", "HotWork", "ColdWork", "Excavation", "ConfinedSpaceEntry",
]
GAS_GATED = {"HotWork", "ConfinedSpaceEntry"}

FIRST_NAMES = [
    "Asha", "Ravi", "Meera", "Vikram", "Sunita", "Arjun", "Priya", "Rahul", "Kavita", "Sanjay",
]
LAST_NAMES = [
    "Sharma", "Patil", "Iyer", "Singh", "Deshmukh", "Nair", "Kulkarni", "Rao", "Joshi", "Gupta",
]

#: labeled-case mix (counts scale with spec.cases; fixed for the default 500)
CASE_MIX = {
    "pass": 419,
    "expiry_fail": 75,
    "overlap_fail": 3,
    "duplicate_fail": 2,
    "expiry_overlap_fail": 1,
}


def _name(rng: random.Random) -> str:
    return f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"


def roster_rows(rng: random.Random, contractor_ids: list[str]) -> list[dict]:
    rows = [
        {"user_id": "ops-admin", "display_name": _name(rng), "roles": "Admin", "title": "Admin"},
        {"user_id": "so-1", "display_name": _name(rng), "roles": "SafetyOfficer", "title": "SafetyOfficer"},
        {"user_id": "so-2", "display_name": _name(rng), "roles": "SafetyOfficer", "title": "SafetyOfficer"},
        {"user_id": "aic-1", "display_name": _name(rng), "roles": "AreaInCharge", "title": "AreaInCharge"},
        {"user_id": "aic-2", "display_name": _name(rng), "roles": "AreaInCharge", "title": "AreaInCharge"},
        {"user_id": "sse-mw", "display_name": _name(rng), "roles": "PermitIssuer", "title": "SSE-Maintenance"},
        {"user_id": "sse-shop", "display_name": _name(rng), "roles": "PermitIssuer", "title": "SSE-Shop"},
        {"user_id": "gt-1", "display_name": _name(rng), "roles": "GasTester", "title": "GasTester"},
        {"user_id": "gt-2", "display_name": _name(rng), "roles": "GasTester", "title": "GasTester"},
    ]
    for cid in contractor_ids:
        rows.append(
            {"user_id": cid, "display_name": _name(rng), "roles": "Acceptor", "title": "Contractor"}
        )
    for row in rows:
        row["password"] = "pw-" + format(rng.getrandbits(48), "012x")
    return rows


def generate_dataset(spec: WorkloadSpec, out_dir: str | Path) -> dict[str, Path]:
    rng = random.Random(spec.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = spec.base

    paths: dict[str, Path] = {}

    # --- contractors (30 long-validity, then mid, then expired) ---
    contractor_rows = []
    n_long = min(30, spec.contractors)
    n_expired = max(1, spec.contractors * 15 // 100) if spec.contractors > 5 else 0
    for i in range(1, spec.contractors + 1):
        cid = f"con-{i:03d}"
        if i <= n_long:
            valid_until = base + timedelta(days=rng.randint(2000, 3650))
        elif i <= spec.contractors - n_expired:
            valid_until = base + timedelta(days=rng.randint(30, 365))
        else:
            valid_until = base - timedelta(days=rng.randint(1, 60))
        contractor_rows.append(
            {
                "contractor_id": cid,
                "name": _name(rng) + " & Co",
                "compliance_certificate_id": f"CERT-{rng.randint(10000, 99999)}",
                "certificate_valid_until": valid_until.isoformat(),
            }
        )
    paths["contractors"] = _write_csv(out / "contractors.csv", CONTRACTOR_COLUMNS, contractor_rows)

    # --- users (roster references contractor ids) ---
    roster = roster_rows(rng, [c["contractor_id"] for c in contractor_rows])
    paths["users"] = _write_csv(
        out / "users.csv", ["user_id", "display_name", "roles", "title", "password"], roster
    )

    # --- machines ---
    machine_rows = []
    statuses = ["operational"] * 8 + ["under_maintenance"] * 3 + ["out_of_service"]
    for i in range(1, spec.machines + 1):
        machine_rows.append(
            {
                "machine_id": f"m-{i:04d}",
                "name": f"{rng.choice(['Lathe', 'Press', 'Crane', 'Compressor', 'Welder', 'Hoist'])} {i}",
                "zone_id": f"shop-{rng.randint(1, 12)}",
                "operational_status": rng.choice(statuses),
                "last_inspection": (base - timedelta(days=rng.randint(0, 120))).isoformat(),
                "inspection_interval_days": rng.choice([30, 60, 90]),
            }
        )
    paths["machines"] = _write_csv(out / "machines.csv", MACHINE_COLUMNS, machine_rows)

    # --- incidents (zones disjoint from permit zones; open ones stay benign
    #     so replayed validations are unaffected) ---
    incident_rows = []
    for i in range(1, spec.incidents + 1):
        severity = rng.choice(["minor"] * 5 + ["moderate"] * 4 + ["major"] * 2 + ["critical"])
        status = "open" if severity in ("minor", "moderate") and rng.random() < 0.4 else "closed"
        reported = base - timedelta(days=rng.randint(1, 365))
        incident_rows.append(
            {
                "incident_id": str(i),
                "reported_at": f"{reported.isoformat()}T{rng.randint(6, 18):02d}:{rng.randint(0, 59):02d}:00Z",
                "zone_id": f"yard-{rng.randint(1, 5)}",
                "severity": severity,
                "root_cause": rng.choice(
                    ["slip", "falling object", "electrical fault", "gas leak", "crane misuse"]
                ),
                "linked_permit_id": "",
                "status": status,
            }
        )
    paths["incidents"] = _write_csv(out / "incidents.csv", INCIDENT_COLUMNS, incident_rows)

    # --- permit lifecycle requests (collision-free by construction:
    #     one zone per request, so every replayed lifecycle can close) ---
    issuers = ["sse-mw", "sse-shop"]
    valid_contractors = [c["contractor_id"] for c in contractor_rows[:n_long]]
    request_lines = []
    for i in range(1, spec.permits + 1):
        # height and electrical jobs dominate a workshop's permit mix
        category = rng.choice(PERMIT_CATEGORIES + ["HeightWork", "Electrical"])
        start = spec.window_start_offset_min + rng.randint(0, 60)
        duration = spec.window_duration_min + rng.randint(-60, 60)
        jitter = lambda: rng.uniform(spec.jitter_low, spec.jitter_high)  # noqa: E731
        request_lines.append(
            {
                "request_id": i,
                "issuer_id": issuers[i % 2],
                "acceptor_id": rng.choice(valid_contractors),
                "category": category,
                "zone_id": f"shop-{i:04d}",
                "description": f"job #{i}: {rng.choice(['overhaul', 'repair', 'inspection', 'retrofit'])}",
                "hazards": rng.sample(
                    ["sparks", "height", "voltage", "dust", "confined space", "noise"], k=2
                ),
                "control_measures": ["barricade area", "toolbox talk"],
                "ppe": [
                    {"item": "helmet", "checked": True},
                    {"item": "gloves", "checked": True},
                    {"item": "harness", "checked": category == "HeightWork"},
                ],
                "from_off": start,
                "to_off": start + duration,
                "gas_gated": category in GAS_GATED,
                "think_initiate_min": round(spec.think_initiate_min * jitter(), 4),
                "think_sign1_min": round(spec.think_sign_min * jitter(), 4),
                "think_sign2_min": round(spec.think_sign_min * jitter(), 4),
            }
        )
    paths["permits"] = _write_jsonl(out / "permit_requests.jsonl", request_lines)

    # --- labeled validation cases ---
    case_lines = _labeled_cases(rng, spec)
    paths["cases"] = _write_jsonl(out / "labeled_cases.jsonl", case_lines)

    spec_path = out / "spec.json"
    spec_path.write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["spec"] = spec_path
    return paths


def _labeled_cases(rng: random.Random, spec: WorkloadSpec) -> list[dict]:
    """Fixed kind mix, shuffled positions.  Server-only failures (duplicate/
    overlap) are kept rare: a client-side form cannot see them, and the
    form-level accuracy target tolerates ~1% misses."""
    kinds = []
    total = spec.cases
    if total == 500:
        for kind, count in CASE_MIX.items():
            kinds += [kind] * count
    else:
        weights = {k: v / 500 for k, v in CASE_MIX.items()}
        for kind, fraction in weights.items():
            kinds += [kind] * max(1, round(fraction * total))
        kinds = kinds[:total]
        while len(kinds) < total:
            kinds.append("pass")
    rng.shuffle(kinds)

    cases = []
    for k, kind in enumerate(kinds, start=1):
        issuer = "sse-mw"
        zone = f"case-{k:04d}"
        if kind in ("expiry_fail", "expiry_overlap_fail"):
            to_off = -rng.randint(15, 120)
            from_off = to_off - rng.randint(30, 240)
        else:
            from_off = rng.randint(15, 180)
            to_off = from_off + rng.randint(30, 420)
        category = rng.choice(PERMIT_CATEGORIES)
        population = []
        if kind in ("overlap_fail", "expiry_overlap_fail"):
            category = "Electrical"
            population.append(
                {
                    "issuer_id": "sse-shop",
                    "category": "HotWork",
                    "from_off": from_off - 30,
                    "to_off": to_off + 30,
                }
            )
        elif kind == "duplicate_fail":
            population.append(
                {
                    "issuer_id": issuer,
                    "category": category,
                    "from_off": from_off - 15,
                    "to_off": to_off + 15,
                }
            )
        elif kind == "pass" and rng.random() < 0.5:
            # harmless neighbours: same zone but non-conflicting categories
            # or non-overlapping windows
            if rng.random() < 0.5:
                population.append(
                    {
                        "issuer_id": "sse-shop",
                        "category": "ColdWork",
                        "from_off": from_off,
                        "to_off": to_off,
                    }
                )
            else:
                population.append(
                    {
                        "issuer_id": issuer,
                        "category": category,
                        "from_off": to_off,
                        "to_off": to_off + 60,
                    }
                )
        case = {
            "case_id": k,
            "zone_id": zone,
            "kind": kind,
            "candidate": {
                "issuer_id": issuer,
                "category": category,
                "from_off": from_off,
                "to_off": to_off,
            },
            "population": population,
        }
        case["expected"] = expected_verdicts(case)
        case["form_expected_accept"] = form_accepts(case)
        cases.append(case)
    return cases


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})
    return path


def _write_jsonl(path: Path, rows: list[dict]) -> Path:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path
