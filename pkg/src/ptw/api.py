"""HTTP facade over the service.

JSON over HTTP/1.1, snake_case fields, RFC-3339 UTC timestamps.  Every
module error maps to exactly one (status, code) pair via ERROR_STATUS;
anything unmapped would surface as a 500, which the test suite treats as
a defect.  Mutating routes authenticate, authorize against the privilege
matrix, then dispatch to the owning service operation; the state change
and its audit events commit atomically underneath.
"""

from __future__ import annotations

import argparse
import threading
import time
from datetime import datetime
from typing import Any

import uvicorn
from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .clock import parse_rfc3339
from .config import ServiceConfig, load_config
from .errors import InvalidFilterError, InvalidTokenError, PtwError
from .model import (
    MonitorKind,
    PermitCategory,
    PermitDraft,
    PermitStatus,
    PermitUpdates,
    PpeItem,
    Role,
    TimeWindow,
)
from .rbac import Identity
from .registries import ContractorRecord, MachineRecord, OperationalStatus, Severity
from .service import PermitService
from .transitions import Action, projection

#: code prefix -> HTTP status.  Exact codes take precedence over prefixes.
ERROR_STATUS: dict[str, int] = {
    "unauthorized-role": 403,
    "invalid-token": 401,
    "expired-token": 401,
    "bad-credential": 401,
    "inactive-user": 403,
    "unknown-user": 404,
    "not-found": 404,
    "unknown-permit-link": 404,
    "unknown-contractor": 404,
    "unknown-recipient": 404,
    "wrong-status": 409,
    "illegal-transition": 409,
    "duplicate-signature": 409,
    "self-confirmation-forbidden": 409,
    "missing-report": 422,
    "duplicate-user-id": 409,
    "optimistic-concurrency-conflict": 409,
    "out-of-order-entry": 409,
    "invalid-window": 422,
    "invalid-zone": 422,
    "unknown-category": 422,
    "invalid-severity": 422,
    "invalid-interval": 422,
    "invalid-filter": 422,
    "invalid-range": 422,
    "invalid-qr-token": 404,
    "guard-failed": 409,  # prefix for guard-failed:<name>
    "storage-failure": 503,
    "invalid-config": 500,
}


def status_for(code: str) -> int:
    if code in ERROR_STATUS:
        return ERROR_STATUS[code]
    prefix = code.split(":", 1)[0]
    return ERROR_STATUS.get(prefix, 500)


# --- request bodies ---------------------------------------------------------


class LoginBody(BaseModel):
    user_id: str
    password: str


class WindowBody(BaseModel):
    valid_from: str
    valid_to: str


class PermitBody(BaseModel):
    category: str
    zone_id: str
    window: WindowBody
    description: str = ""
    hazards: list[str] = Field(default_factory=list)
    control_measures: list[str] = Field(default_factory=list)
    ppe_checklist: list[dict] = Field(default_factory=list)
    acceptor_id: str | None = None


class ReviseBody(BaseModel):
    window: WindowBody | None = None
    description: str | None = None
    hazards: list[str] | None = None
    control_measures: list[str] | None = None
    ppe_checklist: list[dict] | None = None
    acceptor_id: str | None = None


class GasReadingBody(BaseModel):
    oxygen_pct: float
    lel_pct: float
    co_ppm: float


class MonitorBody(BaseModel):
    kind: str
    payload: str


class CloseRequestBody(BaseModel):
    summary: str = ""
    feedback: str = ""


class IncidentBody(BaseModel):
    zone_id: str
    severity: str
    root_cause: str
    linked_permit_id: int | None = None


class MachineBody(BaseModel):
    machine_id: str
    name: str
    zone_id: str
    operational_status: str = "operational"
    last_inspection: str
    inspection_interval_days: int


class ContractorBody(BaseModel):
    contractor_id: str
    name: str
    compliance_certificate_id: str
    certificate_valid_until: str


class UserBody(BaseModel):
    user_id: str
    display_name: str
    roles: list[str]
    password: str


class UserUpdateBody(BaseModel):
    display_name: str | None = None
    roles: list[str] | None = None
    active: bool | None = None


def _window(body: WindowBody) -> TimeWindow:
    return TimeWindow(parse_rfc3339(body.valid_from), parse_rfc3339(body.valid_to))


def _ppe(items: list[dict]) -> tuple[PpeItem, ...]:
    return tuple(PpeItem(item=i["item"], checked=bool(i.get("checked", False))) for i in items)


# --- app factory ------------------------------------------------------------


def create_app(service: PermitService) -> FastAPI:
    app = FastAPI(title="ptw", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(PtwError)
    async def ptw_error_handler(_request: Request, exc: PtwError):
        return JSONResponse(
            status_code=status_for(exc.code),
            content={"code": exc.code, "message": exc.message},
        )

    def bearer(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise InvalidTokenError("missing bearer token")
        return authorization.removeprefix("Bearer ")

    def authorized(action: Action):
        def dep(token: str = Depends(bearer)) -> Identity:
            return service.auth.authorize(token, action)

        return dep

    def identified(token: str = Depends(bearer)) -> Identity:
        return service.auth.identify(token)

    # --- health & meta ---

    @app.get("/health")
    def health():
        return {"status": "ok", "time": service.now().isoformat()}

    @app.get("/meta/authorization")
    def meta_authorization():
        return projection()

    # --- auth ---

    @app.post("/auth/login")
    def login(body: LoginBody):
        session = service.login(body.user_id, body.password)
        return session.to_dict()

    # --- permits ---

    @app.post("/permits", status_code=201)
    def create_permit(body: PermitBody, actor: Identity = Depends(authorized(Action.INITIATE))):
        draft = PermitDraft(
            category=PermitCategory.parse(body.category),
            zone_id=body.zone_id,
            window=_window(body.window),
            description=body.description,
            hazards=tuple(body.hazards),
            control_measures=tuple(body.control_measures),
            ppe_checklist=_ppe(body.ppe_checklist),
            acceptor_id=body.acceptor_id,
        )
        return service.initiate(actor, draft).to_dict()

    @app.get("/permits")
    def list_permits(
        status: str | None = None,
        zone: str | None = None,
        category: str | None = None,
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=50, ge=1, le=500),
        _actor: Identity = Depends(identified),
    ):
        statuses = None
        if status:
            try:
                statuses = frozenset(PermitStatus(s) for s in status.split(","))
            except ValueError:
                raise InvalidFilterError(f"unknown status filter: {status!r}") from None
        cat = PermitCategory.parse(category) if category else None
        items, total = service.list_permits(
            statuses=statuses, zone_id=zone, category=cat, page=page, page_size=page_size
        )
        return {
            "items": [p.to_dict() for p in items],
            "total": total,
            "page": page,
            "page_size": page_size,
        }

    @app.get("/permits/{permit_id}")
    def get_permit(permit_id: int, _actor: Identity = Depends(identified)):
        return service.get_permit(permit_id).to_dict()

    @app.get("/permits/{permit_id}/audit")
    def permit_audit(permit_id: int, _actor: Identity = Depends(identified)):
        return {"events": [e.to_dict() for e in service.permit_audit_trail(permit_id)]}

    @app.get("/qr/{token}")
    def by_qr(token: str, _actor: Identity = Depends(identified)):
        return service.get_permit_by_qr(token).to_dict()

    @app.post("/permits/{permit_id}/submit")
    def submit(permit_id: int, actor: Identity = Depends(authorized(Action.SUBMIT))):
        return service.submit(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/validate")
    def validate(permit_id: int, actor: Identity = Depends(authorized(Action.VALIDATE))):
        permit, report = service.validate_permit(permit_id, actor)
        return {"permit": permit.to_dict(), "report": report.to_dict()}

    @app.post("/permits/{permit_id}/sign")
    def sign(permit_id: int, actor: Identity = Depends(authorized(Action.SIGN))):
        return service.sign(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/accept")
    def accept(permit_id: int, actor: Identity = Depends(authorized(Action.ACCEPT))):
        return service.accept(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/suspend")
    def suspend(permit_id: int, actor: Identity = Depends(authorized(Action.SUSPEND))):
        return service.suspend(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/resume")
    def resume(permit_id: int, actor: Identity = Depends(authorized(Action.RESUME))):
        return service.resume(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/revoke")
    def revoke(permit_id: int, actor: Identity = Depends(authorized(Action.REVOKE))):
        return service.revoke(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/close-request")
    def close_request(
        permit_id: int,
        body: CloseRequestBody,
        actor: Identity = Depends(authorized(Action.REQUEST_CLOSE)),
    ):
        return service.request_close(permit_id, actor, body.summary, body.feedback).to_dict()

    @app.post("/permits/{permit_id}/close-confirm")
    def close_confirm(permit_id: int, actor: Identity = Depends(authorized(Action.CONFIRM_CLOSE))):
        return service.confirm_close(permit_id, actor).to_dict()

    @app.post("/permits/{permit_id}/revise")
    def revise(
        permit_id: int, body: ReviseBody, actor: Identity = Depends(authorized(Action.REVISE))
    ):
        updates = PermitUpdates(
            window=_window(body.window) if body.window else None,
            description=body.description,
            hazards=tuple(body.hazards) if body.hazards is not None else None,
            control_measures=(
                tuple(body.control_measures) if body.control_measures is not None else None
            ),
            ppe_checklist=_ppe(body.ppe_checklist) if body.ppe_checklist is not None else None,
            acceptor_id=body.acceptor_id,
        )
        return service.revise(permit_id, actor, updates).to_dict()

    @app.post("/permits/{permit_id}/gas-readings")
    def gas_reading(
        permit_id: int,
        body: GasReadingBody,
        actor: Identity = Depends(authorized(Action.RECORD_GAS)),
    ):
        return service.record_gas_reading(
            permit_id, actor, body.oxygen_pct, body.lel_pct, body.co_ppm
        ).to_dict()

    @app.post("/permits/{permit_id}/monitor")
    def monitor(
        permit_id: int, body: MonitorBody, actor: Identity = Depends(authorized(Action.MONITOR))
    ):
        try:
            kind = MonitorKind(body.kind)
        except ValueError:
            raise InvalidFilterError(f"unknown monitor kind: {body.kind!r}") from None
        return service.append_monitor(permit_id, actor, kind, body.payload).to_dict()

    # --- incidents ---

    @app.post("/incidents", status_code=201)
    def report_incident(body: IncidentBody, actor: Identity = Depends(identified)):
        record = service.report_incident(
            actor,
            body.zone_id,
            Severity.parse(body.severity),
            body.root_cause,
            body.linked_permit_id,
        )
        return record.to_dict()

    @app.get("/incidents")
    def list_incidents(
        zone: str | None = None,
        status: str | None = None,
        _actor: Identity = Depends(identified),
    ):
        return {"items": [i.to_dict() for i in service.list_incidents(zone_id=zone, status=status)]}

    @app.post("/incidents/{incident_id}/close")
    def close_incident(incident_id: int, actor: Identity = Depends(identified)):
        return service.close_incident(actor, incident_id).to_dict()

    @app.get("/zones/{zone_id}/restriction")
    def zone_restriction(zone_id: str, _actor: Identity = Depends(identified)):
        restricted, ids = service.zone_restriction_check(zone_id)
        return {"zone_id": zone_id, "restricted": restricted, "incident_ids": ids}

    # --- registries ---

    @app.post("/machines", status_code=201)
    def put_machine(body: MachineBody, actor: Identity = Depends(identified)):
        record = MachineRecord(
            machine_id=body.machine_id,
            name=body.name,
            zone_id=body.zone_id,
            operational_status=OperationalStatus(body.operational_status),
            last_inspection=datetime.strptime(body.last_inspection, "%Y-%m-%d").date(),
            inspection_interval_days=body.inspection_interval_days,
        )
        return service.put_machine(actor, record).to_dict()

    @app.get("/machines")
    def list_machines(overdue: bool = False, _actor: Identity = Depends(identified)):
        return {"items": [m.to_dict() for m in service.list_machines(overdue_only=overdue)]}

    @app.post("/contractors", status_code=201)
    def put_contractor(body: ContractorBody, actor: Identity = Depends(identified)):
        record = ContractorRecord(
            contractor_id=body.contractor_id,
            name=body.name,
            compliance_certificate_id=body.compliance_certificate_id,
            certificate_valid_until=datetime.strptime(
                body.certificate_valid_until, "%Y-%m-%d"
            ).date(),
        )
        return service.put_contractor(actor, record).to_dict()

    @app.get("/contractors")
    def list_contractors(_actor: Identity = Depends(identified)):
        return {"items": [c.to_dict() for c in service.list_contractors()]}

    # --- users (Admin) ---

    @app.post("/users", status_code=201)
    def create_user(body: UserBody, actor: Identity = Depends(authorized(Action.MANAGE_USER))):
        roles = frozenset(Role(r) for r in body.roles)
        return service.create_user(
            actor, body.user_id, body.display_name, roles, body.password
        ).to_dict()

    @app.put("/users/{user_id}")
    def update_user(
        user_id: str,
        body: UserUpdateBody,
        actor: Identity = Depends(authorized(Action.MANAGE_USER)),
    ):
        kwargs: dict[str, Any] = {}
        if body.display_name is not None:
            kwargs["display_name"] = body.display_name
        if body.roles is not None:
            kwargs["roles"] = frozenset(Role(r) for r in body.roles)
        if body.active is not None:
            kwargs["active"] = body.active
        return service.update_user(actor, user_id, **kwargs).to_dict()

    @app.get("/users")
    def list_users(_actor: Identity = Depends(authorized(Action.MANAGE_USER))):
        return {"items": [u.to_dict() for u in service.auth.list_users()]}

    # --- reports ---

    @app.get("/reports/compliance")
    def compliance_report(
        time_from: str = Query(alias="from"),
        time_to: str = Query(alias="to"),
        format: str = "jsonl",
        _actor: Identity = Depends(identified),
    ):
        doc = service.ledger.export_compliance_report(
            parse_rfc3339(time_from), parse_rfc3339(time_to), format
        )
        media = "text/csv" if format == "csv" else "application/x-ndjson"
        return PlainTextResponse(doc, media_type=media)

    return app


# --- server handle ------------------------------------------------------------


class ServiceHandle:
    """A running API server plus its service; stop() shuts both down."""

    def __init__(self, service: PermitService, server: uvicorn.Server, thread: threading.Thread,
                 host: str, port: int):
        self.service = service
        self._server = server
        self._thread = thread
        self.host = host
        self.port = port

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)
        self.service.close()


def serve(config: ServiceConfig, *, service: PermitService | None = None,
          wait_timeout: float = 15.0) -> ServiceHandle:
    """Start the API in a background thread; returns once /health would answer.

    Port 0 binds an ephemeral port (the handle reports the real one).  The
    background expiry sweep starts unless config disables it; shutdown
    drains in-flight requests before the storage closes.
    """
    svc = service or PermitService(config)
    svc.bootstrap()
    if config.run_background_sweep:
        svc.sweeper.start()
    app = create_app(svc)
    uv_config = uvicorn.Config(
        app, host=config.listen_host, port=config.listen_port, log_level="warning",
        access_log=False,
    )
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(target=server.run, name="ptw-api", daemon=True)
    thread.start()
    deadline = time.monotonic() + wait_timeout
    while not server.started:
        if time.monotonic() > deadline or not thread.is_alive():
            raise RuntimeError("API server failed to start")
        time.sleep(0.02)
    port = config.listen_port
    for s in server.servers:
        for sock in s.sockets:
            port = sock.getsockname()[1]
    return ServiceHandle(svc, server, thread, config.listen_host, port)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ptw-serve", description="Run the permit API server")
    parser.add_argument("--config", help="path to key=value config file")
    args = parser.parse_args(argv)
    config = load_config(args.config)
    handle = serve(config)
    print(f"ptw api listening on {handle.base_url}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        handle.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
