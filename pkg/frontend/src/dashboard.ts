// Dashboard view model: everything the page shows derives from the API on
// each refresh (no client-only state — a hard refresh reproduces the view).

import { ApiClient, ApiError } from "./api.js";
import { auxiliaryActionsFor, transitionActionsFor } from "./authz.js";
import {
  DEFAULT_EXPIRY_LEAD_SECONDS,
  countdownSeconds,
  formatCountdown,
  isExpiringSoon,
} from "./countdown.js";
import type { FieldErrors, PermitFormFields } from "./forms.js";
import { fieldForErrorCode, toCreateBody, validateForm } from "./forms.js";
import type {
  AuditEventDto,
  AuthorizationMeta,
  IncidentDto,
  PermitDto,
  SessionInfo,
  ValidationReportDto,
} from "./types.js";

export interface DashboardRow {
  id: number;
  qr_token: string;
  status: string;
  category: string;
  zone_id: string;
  countdown_seconds: number;
  countdown: string;
  expiring_soon: boolean;
  actions: string[];
  aux_actions: string[];
}

export interface ZoneBanner {
  zone_id: string;
  restricted: boolean;
  incident_ids: number[];
}

export interface DetailModel {
  permit: PermitDto;
  hazards: string[];
  signatures: { role: string; user_id: string; signed_at: string }[];
  gas_readings: PermitDto["gas_readings"];
  monitor_log: PermitDto["monitor_log"];
  audit_trail: AuditEventDto[];
  actions: string[];
  aux_actions: string[];
  banner: ZoneBanner | null;
}

export interface ActOutcome {
  ok: boolean;
  conflict: boolean;
  unauthorized: boolean;
  message: string;
}

export interface FormOutcome {
  ok: boolean;
  permit: PermitDto | null;
  report: ValidationReportDto | null;
  fieldErrors: FieldErrors;
  banner: string | null;
}

export class DashboardViewModel {
  permits: PermitDto[] = [];
  openIncidents: IncidentDto[] = [];
  sessionExpired = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly meta: AuthorizationMeta,
    readonly session: SessionInfo,
    private readonly expiryLeadSeconds: number = DEFAULT_EXPIRY_LEAD_SECONDS,
  ) {}

  /** Pull fresh state; all view data comes from these two calls. */
  async refresh(): Promise<void> {
    try {
      const [permits, incidents] = await Promise.all([
        this.api.listPermits({ page: 1, page_size: 500 }),
        this.api.listIncidents("open"),
      ]);
      this.permits = permits.items;
      this.openIncidents = incidents.items;
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.sessionExpired = true; // page redirects to login
        return;
      }
      throw err;
    }
  }

  startPolling(intervalMs = 5000): void {
    this.stopPolling();
    this.timer = setInterval(() => void this.refresh(), intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  rows(now: Date): DashboardRow[] {
    return this.permits.map((p) => {
      const remaining = countdownSeconds(p.window.valid_to, now);
      return {
        id: p.id,
        qr_token: p.qr_token,
        status: p.status,
        category: p.category,
        zone_id: p.zone_id,
        countdown_seconds: remaining,
        countdown: formatCountdown(remaining),
        expiring_soon:
          ACTIVE_STATUSES.has(p.status) &&
          isExpiringSoon(p.window.valid_to, now, this.expiryLeadSeconds),
        actions: transitionActionsFor(this.session.roles, p.status, this.meta),
        aux_actions: auxiliaryActionsFor(this.session.roles, p.status, this.meta),
      };
    });
  }

  banner(zoneId: string): ZoneBanner {
    const ids = this.openIncidents
      .filter(
        (i) =>
          i.zone_id === zoneId &&
          i.status === "open" &&
          (i.severity === "major" || i.severity === "critical"),
      )
      .map((i) => i.incident_id)
      .sort((a, b) => a - b);
    return { zone_id: zoneId, restricted: ids.length > 0, incident_ids: ids };
  }

  async detail(permitId: number): Promise<DetailModel> {
    const permit = await this.api.getPermit(permitId);
    const trail = await this.api.auditTrail(permitId);
    return {
      permit,
      hazards: permit.hazards,
      signatures: permit.signatures,
      gas_readings: permit.gas_readings,
      monitor_log: permit.monitor_log,
      audit_trail: trail.events,
      actions: transitionActionsFor(this.session.roles, permit.status, this.meta),
      aux_actions: auxiliaryActionsFor(this.session.roles, permit.status, this.meta),
      banner: this.banner(permit.zone_id),
    };
  }

  /**
   * Run a permit action.  No optimistic update: the table re-fetches after
   * the API confirms.  Stale-state 409s surface as a "permit changed"
   * notice; 403 means a button was shown that should not have been.
   */
  async act(permitId: number, action: string, body?: unknown): Promise<ActOutcome> {
    try {
      await this.api.permitAction(permitId, action, body);
      await this.refresh();
      return { ok: true, conflict: false, unauthorized: false, message: "" };
    } catch (err) {
      if (err instanceof ApiError) {
        await this.refresh();
        if (err.status === 409) {
          return {
            ok: false,
            conflict: true,
            unauthorized: false,
            message: `permit changed, refreshed: ${err.message}`,
          };
        }
        if (err.status === 403) {
          return {
            ok: false,
            conflict: false,
            unauthorized: true,
            message: `button/privilege mismatch (dev bug): ${err.message}`,
          };
        }
        if (err.status === 401) {
          this.sessionExpired = true;
          return { ok: false, conflict: false, unauthorized: false, message: "session expired" };
        }
      }
      throw err;
    }
  }

  /**
   * Stage-1 form flow: client validation, then create + submit + Stage-2
   * validate.  A failing report surfaces as a banner naming the offending
   * rule details (e.g. the conflicting permit ids of a duplicate).
   */
  async submitForm(fields: PermitFormFields, now: Date = new Date()): Promise<FormOutcome> {
    const fieldErrors = validateForm(fields, now);
    if (Object.keys(fieldErrors).length) {
      return { ok: false, permit: null, report: null, fieldErrors, banner: null };
    }
    let permit: PermitDto;
    try {
      permit = await this.api.createPermit(toCreateBody(fields));
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        return {
          ok: false,
          permit: null,
          report: null,
          fieldErrors: { [fieldForErrorCode(err.code)]: err.message },
          banner: null,
        };
      }
      throw err;
    }
    await this.api.permitAction(permit.id, "submit");
    const outcome = await this.api.validatePermit(permit.id);
    await this.refresh();
    if (outcome.report.overall === "pass") {
      return {
        ok: true,
        permit: outcome.permit,
        report: outcome.report,
        fieldErrors: {},
        banner: null,
      };
    }
    const failures = outcome.report.verdicts
      .filter((v) => !v.passed)
      .map((v) => `${v.rule_name}: ${v.detail}`)
      .join("; ");
    return {
      ok: false,
      permit: outcome.permit,
      report: outcome.report,
      fieldErrors: {},
      banner: `validation failed — ${failures}`,
    };
  }
}

const ACTIVE_STATUSES = new Set([
  "Submitted",
  "Validated",
  "Approved",
  "InProgress",
  "Suspended",
  "CloseRequested",
]);
