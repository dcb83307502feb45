// Spawns the real permit service (the dashboard's only dependency) and the
// dataset generator as child processes for the tests.

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";

export interface ServerHandle {
  url: string;
  stop: () => void;
}

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

export async function startServer(extraEnv: Record<string, string> = {}): Promise<ServerHandle> {
  const child: ChildProcess = spawn("python3", ["-m", "ptw.api"], {
    cwd: REPO_ROOT,
    env: {
      ...process.env,
      PYTHONUNBUFFERED: "1",
      PTW_LISTEN_PORT: "0",
      PTW_RUN_BACKGROUND_SWEEP: "false",
      PTW_NOTIFICATION_BACKOFF_BASE: "0",
      ...extraEnv,
    },
    stdio: ["ignore", "pipe", "pipe"],
  });
  let stderr = "";
  child.stderr?.on("data", (chunk) => (stderr += String(chunk)));

  const url = await new Promise<string>((resolve, reject) => {
    let out = "";
    const timer = setTimeout(
      () => reject(new Error(`server did not start: ${out} ${stderr}`)),
      30_000,
    );
    child.stdout?.on("data", (chunk) => {
      out += String(chunk);
      const match = out.match(/listening on (http:\/\/[^\s]+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]!);
      }
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}): ${stderr}`));
    });
  });
  return {
    url,
    stop: () => {
      child.kill("SIGTERM");
    },
  };
}

/** Run `ptw-sim generate` into a temp dir; returns the dataset path. */
export async function generateDataset(seed = 17893): Promise<string> {
  const out = mkdtempSync(join(tmpdir(), "ptw-ds-"));
  await new Promise<void>((resolve, reject) => {
    const child = spawn(
      "python3",
      ["-m", "ptw.sim.cli", "generate", "--seed", String(seed), "--out", out],
      { cwd: REPO_ROOT, stdio: ["ignore", "ignore", "pipe"] },
    );
    let stderr = "";
    child.stderr?.on("data", (chunk) => (stderr += String(chunk)));
    child.on("exit", (code) =>
      code === 0 ? resolve() : reject(new Error(`generate failed: ${stderr}`)),
    );
  });
  return out;
}

export const ROSTER: Array<{ user: string; roles: string[] }> = [
  { user: "ui-sse", roles: ["PermitIssuer"] },
  { user: "ui-so", roles: ["SafetyOfficer"] },
  { user: "ui-so2", roles: ["SafetyOfficer"] },
  { user: "ui-aic", roles: ["AreaInCharge"] },
  { user: "ui-con", roles: ["Acceptor"] },
  { user: "ui-gt", roles: ["GasTester"] },
];

/** Create the standard test users through the API; returns a logged-in
 * client per user id (plus "admin"). */
export async function provisionUsers(url: string): Promise<Record<string, ApiClient>> {
  const admin = new ApiClient(url);
  await admin.login("admin", "admin");
  const clients: Record<string, ApiClient> = { admin };
  for (const entry of ROSTER) {
    await admin.createUser(entry.user, entry.user, entry.roles, "pw");
    const client = new ApiClient(url);
    await client.login(entry.user, "pw");
    clients[entry.user] = client;
  }
  return clients;
}

export function isoMinutesFromNow(minutes: number): string {
  return new Date(Date.now() + minutes * 60_000).toISOString();
}

export async function createDraft(
  issuer: ApiClient,
  zone: string,
  category = "ColdWork",
  opts: { fromMin?: number; toMin?: number; acceptor?: string } = {},
): Promise<number> {
  const permit = await issuer.createPermit({
    category,
    zone_id: zone,
    window: {
      valid_from: isoMinutesFromNow(opts.fromMin ?? 30),
      valid_to: isoMinutesFromNow(opts.toMin ?? 270),
    },
    description: "ui test",
    hazards: ["noise"],
    control_measures: ["barricade"],
    ppe_checklist: [{ item: "helmet", checked: true }],
    acceptor_id: opts.acceptor ?? "ui-con",
  });
  return (permit as { id: number }).id;
}
