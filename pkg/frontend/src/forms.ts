// Client-side permit form models.
//
// Validation here duplicates a documented subset of the server rules so a
// form can reject obviously-bad input before any request leaves the
// browser:
//   - category must be one of the six,
//   - zone must be non-empty,
//   - the window must be ordered, at most 8 hours, and not already expired,
//   - at least one hazard,
//   - the category's required PPE must be checked.
// Duplicates and zone/category overlaps need server state and are only
// caught by Stage-2 validation; the server stays authoritative throughout.

export const PERMIT_CATEGORIES = [
  "HotWork",
  "ColdWork",
  "Electrical",
  "Excavation",
  "HeightWork",
  "ConfinedSpaceEntry",
] as const;

export const MAX_DURATION_HOURS = 8;

export interface PpeRow {
  item: string;
  checked: boolean;
}

export interface PermitFormFields {
  category: string;
  zone_id: string;
  valid_from: string; // RFC-3339
  valid_to: string;
  description: string;
  hazards: string[];
  control_measures: string[];
  ppe: PpeRow[];
  acceptor_id?: string;
}

export type FieldErrors = Record<string, string>;

/** PPE every category must have checked before submission; the height and
 * electrical variants carry their hazard-specific gear. */
export const CATEGORY_REQUIRED_PPE: Record<string, string[]> = {
  HotWork: ["helmet", "face shield"],
  ColdWork: ["helmet"],
  Electrical: ["helmet", "insulated gloves"],
  Excavation: ["helmet", "high-visibility vest"],
  HeightWork: ["helmet", "harness"],
  ConfinedSpaceEntry: ["helmet", "gas monitor"],
};

/** Pre-filled form for a category, PPE rows unchecked. */
export function defaultFormFields(category: string): PermitFormFields {
  const required = CATEGORY_REQUIRED_PPE[category] ?? ["helmet"];
  return {
    category,
    zone_id: "",
    valid_from: "",
    valid_to: "",
    description: "",
    hazards: [],
    control_measures: [],
    ppe: required.map((item) => ({ item, checked: false })),
  };
}

export function validateForm(fields: PermitFormFields, now: Date): FieldErrors {
  const errors: FieldErrors = {};
  if (!PERMIT_CATEGORIES.includes(fields.category as never)) {
    errors["category"] = `unknown category: ${fields.category}`;
  }
  if (!fields.zone_id.trim()) {
    errors["zone_id"] = "zone is required";
  }
  const from = Date.parse(fields.valid_from);
  const to = Date.parse(fields.valid_to);
  if (Number.isNaN(from)) {
    errors["valid_from"] = "start time is required";
  }
  if (Number.isNaN(to)) {
    errors["valid_to"] = "end time is required";
  }
  if (!errors["valid_from"] && !errors["valid_to"]) {
    if (from >= to) {
      errors["valid_to"] = "end must be after start";
    } else if (to - from > MAX_DURATION_HOURS * 3600 * 1000) {
      errors["valid_to"] = `window exceeds ${MAX_DURATION_HOURS} hours`;
    } else if (to <= now.getTime()) {
      errors["valid_to"] = "window is already in the past";
    }
  }
  if (fields.hazards.filter((h) => h.trim()).length === 0) {
    errors["hazards"] = "list at least one hazard";
  }
  const required = CATEGORY_REQUIRED_PPE[fields.category];
  if (required) {
    const checked = new Set(fields.ppe.filter((p) => p.checked).map((p) => p.item));
    const missing = required.filter((item) => !checked.has(item));
    if (missing.length) {
      errors["ppe"] = `required PPE unchecked: ${missing.join(", ")}`;
    }
  }
  return errors;
}

export function formAccepts(fields: PermitFormFields, now: Date): boolean {
  return Object.keys(validateForm(fields, now)).length === 0;
}

/** Request body for POST /permits from validated form fields. */
export function toCreateBody(fields: PermitFormFields): unknown {
  return {
    category: fields.category,
    zone_id: fields.zone_id,
    window: { valid_from: fields.valid_from, valid_to: fields.valid_to },
    description: fields.description,
    hazards: fields.hazards,
    control_measures: fields.control_measures,
    ppe_checklist: fields.ppe.map((p) => ({ item: p.item, checked: p.checked })),
    acceptor_id: fields.acceptor_id ?? null,
  };
}

/** Map a 422 error code from the API onto a form field. */
export function fieldForErrorCode(code: string): string {
  switch (code) {
    case "invalid-window":
      return "valid_to";
    case "unknown-category":
      return "category";
    case "invalid-zone":
      return "zone_id";
    default:
      return "_form";
  }
}
