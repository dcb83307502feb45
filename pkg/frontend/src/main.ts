// Browser entry point: login, permit table with polling, detail pane,
// role-gated actions and the per-category permit form.

import { ApiClient, ApiError } from "./api.js";
import { canInitiate } from "./authz.js";
import { DashboardViewModel } from "./dashboard.js";
import { defaultFormFields, PERMIT_CATEGORIES, type PermitFormFields } from "./forms.js";
import { renderDetail, renderForm, renderFormErrors, renderTable } from "./render.js";

const BASE_URL =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8017";

const app = document.getElementById("app")!;
let vm: DashboardViewModel | null = null;
let api: ApiClient;
let selectedPermit: number | null = null;
let formFields: PermitFormFields | null = null;

function show(html: string): void {
  app.innerHTML = html;
}

function loginView(message = ""): void {
  show(
    `<form id="login"><h1>ptw dashboard</h1>` +
      (message ? `<p class="error">${message}</p>` : "") +
      `<input name="user" placeholder="user id" required>` +
      `<input name="password" type="password" placeholder="password" required>` +
      `<button type="submit">Sign in</button></form>`,
  );
  document.getElementById("login")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(ev.target as HTMLFormElement);
    void login(String(data.get("user")), String(data.get("password")));
  });
}

async function login(user: string, password: string): Promise<void> {
  api = new ApiClient(BASE_URL);
  try {
    const session = await api.login(user, password);
    const meta = await api.meta();
    vm = new DashboardViewModel(api, meta, session);
    await vm.refresh();
    vm.startPolling(5000);
    dashboardView(meta.privilege_matrix["initiate"] ? canInitiate(session.roles, meta) : false);
    setInterval(() => redrawTable(), 1000); // countdown tick
  } catch (err) {
    loginView(err instanceof ApiError ? err.message : String(err));
  }
}

function dashboardView(showFormButton: boolean): void {
  show(
    `<header><h1>ptw dashboard</h1><span id="who">${vm!.session.user_id} ` +
      `(${vm!.session.roles.join(", ")})</span></header>` +
      (showFormButton ? `<div id="new-permit"><select id="category">` +
        PERMIT_CATEGORIES.map((c) => `<option>${c}</option>`).join("") +
        `</select> <button id="open-form">New permit</button></div>` : "") +
      `<div id="notice"></div><div id="form-slot"></div>` +
      `<div id="table"></div><div id="detail"></div>`,
  );
  document.getElementById("open-form")?.addEventListener("click", () => {
    const category = (document.getElementById("category") as HTMLSelectElement).value;
    formFields = defaultFormFields(category);
    document.getElementById("form-slot")!.innerHTML = renderForm(formFields, {});
    bindForm();
  });
  document.getElementById("table")!.addEventListener("click", onAction);
  document.getElementById("detail")!.addEventListener("click", onAction);
  redrawTable();
}

function redrawTable(): void {
  if (!vm) return;
  if (vm.sessionExpired) {
    loginView("session expired — sign in again");
    return;
  }
  document.getElementById("table")!.innerHTML = renderTable(vm.rows(new Date()));
  if (selectedPermit !== null) {
    void vm.detail(selectedPermit).then((detail) => {
      document.getElementById("detail")!.innerHTML = renderDetail(detail);
    });
  }
}

function notice(text: string): void {
  document.getElementById("notice")!.textContent = text;
}

function onAction(ev: Event): void {
  const target = ev.target as HTMLElement;
  const permit = target.closest<HTMLElement>("[data-permit]")?.dataset["permit"];
  if (!permit || !vm) return;
  const id = Number(permit);
  const action = target.dataset["action"];
  if (!action) {
    selectedPermit = id;
    redrawTable();
    return;
  }
  void (async () => {
    let body: unknown;
    if (action === "request_close") {
      body = { summary: prompt("closure summary") ?? "", feedback: "" };
    }
    if (action === "monitor") {
      await api.appendMonitor(id, "supervision_note", prompt("note") ?? "");
      redrawTable();
      return;
    }
    if (action === "record_gas") {
      await api.recordGasReading(
        id,
        Number(prompt("O2 %") ?? "20.9"),
        Number(prompt("LEL %") ?? "0"),
        Number(prompt("CO ppm") ?? "0"),
      );
      redrawTable();
      return;
    }
    const outcome = await vm!.act(id, action, body);
    notice(outcome.ok ? `${action} applied` : outcome.message);
    redrawTable();
  })();
}

function bindForm(): void {
  const form = document.getElementById("permit-form");
  form?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (!formFields || !vm) return;
    const data = new FormData(ev.target as HTMLFormElement);
    const checked = new Set(data.getAll("ppe").map(String));
    const fields: PermitFormFields = {
      ...formFields,
      zone_id: String(data.get("zone_id") ?? ""),
      valid_from: toRfc3339(String(data.get("valid_from") ?? "")),
      valid_to: toRfc3339(String(data.get("valid_to") ?? "")),
      description: String(data.get("description") ?? ""),
      hazards: String(data.get("hazards") ?? "")
        .split(",")
        .map((h) => h.trim())
        .filter(Boolean),
      ppe: formFields.ppe.map((row) => ({ ...row, checked: checked.has(row.item) })),
    };
    void vm.submitForm(fields).then((outcome) => {
      if (outcome.ok) {
        document.getElementById("form-slot")!.innerHTML = "";
        notice(`permit ${outcome.permit!.id} created and validated`);
      } else if (outcome.banner) {
        notice(outcome.banner);
      } else {
        document.getElementById("form-slot")!.innerHTML = renderForm(fields, outcome.fieldErrors);
        bindForm();
      }
      redrawTable();
    });
  });
}

function toRfc3339(local: string): string {
  return local ? new Date(local).toISOString() : "";
}

loginView();
