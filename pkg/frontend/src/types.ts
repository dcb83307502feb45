// DTOs mirroring the service's JSON wire format (snake_case, RFC-3339 UTC).

export interface SessionInfo {
  token: string;
  user_id: string;
  roles: string[];
  issued_at: string;
  expires_at: string;
}

export interface WindowDto {
  valid_from: string;
  valid_to: string;
}

export interface SignatureDto {
  role: string;
  user_id: string;
  signed_at: string;
}

export interface GasReadingDto {
  taken_by: string;
  taken_at: string;
  oxygen_pct: number;
  lel_pct: number;
  co_ppm: number;
  verdict: "pass" | "fail";
}

export interface MonitorEntryDto {
  at: string;
  author: string;
  kind: string;
  payload: string;
}

export interface ClosureDto {
  summary: string;
  feedback: string;
  requested_by: string;
  requested_at: string;
  confirmed_by: string | null;
  confirmed_at: string | null;
}

export interface PpeItemDto {
  item: string;
  checked: boolean;
}

export interface StatusChangeDto {
  at: string;
  actor: string;
  action: string;
  from_status: string;
  to_status: string;
}

export interface PermitDto {
  id: number;
  qr_token: string;
  category: string;
  zone_id: string;
  description: string;
  hazards: string[];
  control_measures: string[];
  ppe_checklist: PpeItemDto[];
  window: WindowDto;
  status: string;
  issuer_id: string;
  acceptor_id: string | null;
  signatures: SignatureDto[];
  gas_readings: GasReadingDto[];
  monitor_log: MonitorEntryDto[];
  closure: ClosureDto | null;
  revision: number;
  created_at: string;
  updated_at: string;
  status_history: StatusChangeDto[];
  version: number;
}

export interface PermitListDto {
  items: PermitDto[];
  total: number;
  page: number;
  page_size: number;
}

export interface TransitionRow {
  from_status: string;
  action: string;
  to_status: string;
  required_roles: string[];
  guards: string[];
}

export interface AuthorizationMeta {
  privilege_matrix: Record<string, string[]>;
  transition_table: TransitionRow[];
}

export interface AuditEventDto {
  seq: number;
  at: string;
  actor: string;
  entity: { kind: string; id: string };
  action: string;
  payload_digest: string;
  prev_hash: string;
  hash: string;
}

export interface IncidentDto {
  incident_id: number;
  reported_at: string;
  zone_id: string;
  severity: string;
  root_cause: string;
  linked_permit_id: number | null;
  status: string;
}

export interface RuleVerdictDto {
  rule_name: string;
  passed: boolean;
  detail: string;
}

export interface ValidationReportDto {
  permit_id: number;
  checked_at: string;
  verdicts: RuleVerdictDto[];
  overall: "pass" | "fail";
}

export interface ZoneRestrictionDto {
  zone_id: string;
  restricted: boolean;
  incident_ids: number[];
}
