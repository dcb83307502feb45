// Button visibility derives from the authorization metadata the service
// publishes; the dashboard holds no private copy of the rules.

import type { AuthorizationMeta } from "./types.js";

export const PERMIT_STATUSES = [
  "Draft",
  "Submitted",
  "Rejected",
  "Validated",
  "Approved",
  "InProgress",
  "Suspended",
  "CloseRequested",
  "Closed",
  "Revoked",
  "Expired",
] as const;

export const ALL_ROLES = [
  "Admin",
  "SafetyOfficer",
  "AreaInCharge",
  "PermitIssuer",
  "Acceptor",
  "GasTester",
] as const;

// Statuses in which the auxiliary (non-transition) actions apply; a
// documented mirror of the server rules, like the client-side form checks.
const GAS_READING_STATUSES = new Set(["Validated", "Approved", "InProgress", "Suspended"]);
const MONITOR_STATUSES = new Set(["InProgress", "Suspended"]);

function intersects(a: string[], b: string[]): boolean {
  return a.some((x) => b.includes(x));
}

/**
 * Transition buttons for a permit in `status`, as seen by a session with
 * `roles`: exactly the table rows starting at that status whose required
 * roles intersect the session's (system-only rows have an empty role set
 * and are never shown).
 */
export function transitionActionsFor(
  roles: string[],
  status: string,
  meta: AuthorizationMeta,
): string[] {
  const actions = new Set<string>();
  for (const row of meta.transition_table) {
    if (row.from_status !== status) continue;
    if (!intersects(row.required_roles, roles)) continue;
    actions.add(row.action);
  }
  return [...actions].sort();
}

/** Monitor/gas-reading buttons (state-changing but not status-changing). */
export function auxiliaryActionsFor(
  roles: string[],
  status: string,
  meta: AuthorizationMeta,
): string[] {
  const out: string[] = [];
  const gasRoles = meta.privilege_matrix["record_gas"] ?? [];
  const monitorRoles = meta.privilege_matrix["monitor"] ?? [];
  if (GAS_READING_STATUSES.has(status) && intersects(gasRoles, roles)) {
    out.push("record_gas");
  }
  if (MONITOR_STATUSES.has(status) && intersects(monitorRoles, roles)) {
    out.push("monitor");
  }
  return out.sort();
}

/** May this session initiate new permits (controls the form button)? */
export function canInitiate(roles: string[], meta: AuthorizationMeta): boolean {
  return intersects(meta.privilege_matrix["initiate"] ?? [], roles);
}
