// Thin fetch client for the permit service. The base URL is the single
// piece of configuration the dashboard takes; everything else comes from
// the API itself.

import type {
  AuditEventDto,
  AuthorizationMeta,
  IncidentDto,
  PermitDto,
  PermitListDto,
  SessionInfo,
  ValidationReportDto,
  ZoneRestrictionDto,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Route suffix for each permit action button. */
export const ACTION_ROUTES: Record<string, string> = {
  submit: "submit",
  validate: "validate",
  sign: "sign",
  accept: "accept",
  suspend: "suspend",
  resume: "resume",
  revoke: "revoke",
  request_close: "close-request",
  confirm_close: "close-confirm",
  revise: "revise",
};

export class ApiClient {
  private token: string | null = null;

  constructor(public readonly baseUrl: string) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const payload = text ? JSON.parse(text) : {};
    if (!resp.ok) {
      throw new ApiError(resp.status, payload.code ?? "unknown", payload.message ?? text);
    }
    return payload as T;
  }

  async login(userId: string, password: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>("POST", "/auth/login", {
      user_id: userId,
      password,
    });
    this.setToken(session.token);
    return session;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  meta(): Promise<AuthorizationMeta> {
    return this.request("GET", "/meta/authorization");
  }

  listPermits(params: Record<string, string | number> = {}): Promise<PermitListDto> {
    const query = new URLSearchParams(
      Object.entries(params).map(([k, v]) => [k, String(v)]),
    ).toString();
    return this.request("GET", "/permits" + (query ? `?${query}` : ""));
  }

  getPermit(id: number): Promise<PermitDto> {
    return this.request("GET", `/permits/${id}`);
  }

  createPermit(body: unknown): Promise<PermitDto> {
    return this.request("POST", "/permits", body);
  }

  permitAction(id: number, action: string, body?: unknown): Promise<unknown> {
    const route = ACTION_ROUTES[action];
    if (!route) throw new Error(`no route for action ${action}`);
    return this.request("POST", `/permits/${id}/${route}`, body ?? {});
  }

  validatePermit(id: number): Promise<{ permit: PermitDto; report: ValidationReportDto }> {
    return this.request("POST", `/permits/${id}/validate`, {});
  }

  recordGasReading(id: number, o2: number, lel: number, co: number): Promise<PermitDto> {
    return this.request("POST", `/permits/${id}/gas-readings`, {
      oxygen_pct: o2,
      lel_pct: lel,
      co_ppm: co,
    });
  }

  appendMonitor(id: number, kind: string, payload: string): Promise<PermitDto> {
    return this.request("POST", `/permits/${id}/monitor`, { kind, payload });
  }

  auditTrail(id: number): Promise<{ events: AuditEventDto[] }> {
    return this.request("GET", `/permits/${id}/audit`);
  }

  listIncidents(status?: string): Promise<{ items: IncidentDto[] }> {
    return this.request("GET", "/incidents" + (status ? `?status=${status}` : ""));
  }

  zoneRestriction(zoneId: string): Promise<ZoneRestrictionDto> {
    return this.request("GET", `/zones/${encodeURIComponent(zoneId)}/restriction`);
  }

  createUser(userId: string, displayName: string, roles: string[], password: string) {
    return this.request("POST", "/users", {
      user_id: userId,
      display_name: displayName,
      roles,
      password,
    });
  }
}
