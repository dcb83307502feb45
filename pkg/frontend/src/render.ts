// HTML string rendering, kept free of document/window so it is testable
// anywhere; main.ts attaches the strings to the page.

import type { DashboardRow, DetailModel, ZoneBanner } from "./dashboard.js";
import type { FieldErrors, PermitFormFields } from "./forms.js";

export function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderTable(rows: DashboardRow[]): string {
  const body = rows
    .map((row) => {
      const cls = row.expiring_soon ? ' class="expiring"' : "";
      const buttons = [...row.actions, ...row.aux_actions]
        .map(
          (a) =>
            `<button data-permit="${row.id}" data-action="${esc(a)}">${esc(a)}</button>`,
        )
        .join(" ");
      return (
        `<tr${cls} data-permit="${row.id}">` +
        `<td>${row.id}</td>` +
        `<td><span class="chip chip-${esc(row.status)}">${esc(row.status)}</span></td>` +
        `<td>${esc(row.category)}</td>` +
        `<td>${esc(row.zone_id)}</td>` +
        `<td>${esc(row.countdown)}</td>` +
        `<td>${buttons}</td></tr>`
      );
    })
    .join("\n");
  return (
    "<table><thead><tr><th>id</th><th>status</th><th>category</th>" +
    "<th>zone</th><th>expires in</th><th>actions</th></tr></thead>" +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderBanner(banner: ZoneBanner): string {
  if (!banner.restricted) return "";
  return (
    `<div class="banner banner-restricted">zone ${esc(banner.zone_id)} restricted by ` +
    `open incident(s): ${banner.incident_ids.join(", ")}</div>`
  );
}

export function renderDetail(detail: DetailModel): string {
  const p = detail.permit;
  const signatures = detail.signatures
    .map((s) => `<li>${esc(s.role)} — ${esc(s.user_id)} @ ${esc(s.signed_at)}</li>`)
    .join("");
  const gas = detail.gas_readings
    .map(
      (g) =>
        `<li>O2 ${g.oxygen_pct}% LEL ${g.lel_pct}% CO ${g.co_ppm}ppm — ${esc(g.verdict)}</li>`,
    )
    .join("");
  const log = detail.monitor_log
    .map((m) => `<li>[${esc(m.kind)}] ${esc(m.payload)} — ${esc(m.author)}</li>`)
    .join("");
  const trail = detail.audit_trail
    .map((e) => `<li>#${e.seq} ${esc(e.action)} by ${esc(e.actor)} @ ${esc(e.at)}</li>`)
    .join("");
  const buttons = [...detail.actions, ...detail.aux_actions]
    .map((a) => `<button data-permit="${p.id}" data-action="${esc(a)}">${esc(a)}</button>`)
    .join(" ");
  return (
    (detail.banner ? renderBanner(detail.banner) : "") +
    `<h2>Permit ${p.id} <span class="chip">${esc(p.status)}</span></h2>` +
    `<p>${esc(p.category)} in ${esc(p.zone_id)} — ${esc(p.description)}</p>` +
    `<p>QR: <code>${esc(p.qr_token)}</code> (rev ${p.revision})</p>` +
    `<h3>Hazards</h3><ul>${detail.hazards.map((h) => `<li>${esc(h)}</li>`).join("")}</ul>` +
    `<h3>Signatures</h3><ul>${signatures}</ul>` +
    `<h3>Gas readings</h3><ul>${gas}</ul>` +
    `<h3>Monitor log</h3><ul>${log}</ul>` +
    `<h3>Audit trail</h3><ol>${trail}</ol>` +
    `<div class="actions">${buttons}</div>`
  );
}

export function renderFormErrors(errors: FieldErrors): string {
  const entries = Object.entries(errors);
  if (!entries.length) return "";
  return (
    "<ul class='form-errors'>" +
    entries.map(([field, msg]) => `<li data-field="${esc(field)}">${esc(msg)}</li>`).join("") +
    "</ul>"
  );
}

export function renderForm(fields: PermitFormFields, errors: FieldErrors): string {
  const ppe = fields.ppe
    .map(
      (row) =>
        `<label><input type="checkbox" name="ppe" value="${esc(row.item)}"` +
        `${row.checked ? " checked" : ""}> ${esc(row.item)}</label>`,
    )
    .join("");
  return (
    `<form id="permit-form" data-category="${esc(fields.category)}">` +
    renderFormErrors(errors) +
    `<input name="zone_id" placeholder="zone" value="${esc(fields.zone_id)}">` +
    `<input name="valid_from" type="datetime-local" value="${esc(fields.valid_from)}">` +
    `<input name="valid_to" type="datetime-local" value="${esc(fields.valid_to)}">` +
    `<textarea name="description">${esc(fields.description)}</textarea>` +
    `<input name="hazards" placeholder="hazards (comma separated)" ` +
    `value="${esc(fields.hazards.join(", "))}">` +
    `<fieldset class="ppe">${ppe}</fieldset>` +
    `<button type="submit">Submit permit</button></form>`
  );
}
