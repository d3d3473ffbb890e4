/**
 * Boots the real relay and session services from the installed CLI so the
 * suite exercises the player against live processes, then tears them down.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { createServer } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "..");
export const TRUCK_DOC_PATH = join(REPO_ROOT, "tests", "fixtures", "truck.doc");

const BIN = process.env["BLOCKNAV_BIN"] ?? "blocknav";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.on("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      server.close(() => resolve(address.port));
    });
  });
}

async function waitHealthy(base: string, child: Spawned, deadlineMs: number): Promise<void> {
  const deadline = Date.now() + deadlineMs;
  for (;;) {
    if (child.exited) {
      throw new Error(`${child.name} exited early:\n${child.stderr}`);
    }
    try {
      const res = await fetch(`${base}/healthz`);
      if (res.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`${child.name} not healthy at ${base} after ${deadlineMs}ms:\n${child.stderr}`);
    }
    await new Promise((r) => setTimeout(r, 50));
  }
}

interface Spawned {
  name: string;
  proc: ChildProcess;
  stderr: string;
  exited: boolean;
}

function launch(name: string, args: string[]): Spawned {
  const proc = spawn(BIN, args, { stdio: ["ignore", "ignore", "pipe"] });
  const spawned: Spawned = { name, proc, stderr: "", exited: false };
  proc.stderr?.on("data", (chunk: Buffer) => {
    spawned.stderr += chunk.toString();
  });
  proc.on("exit", () => {
    spawned.exited = true;
  });
  return spawned;
}

function terminate(spawned: Spawned): Promise<void> {
  return new Promise((resolve) => {
    if (spawned.exited) {
      resolve();
      return;
    }
    const killTimer = setTimeout(() => spawned.proc.kill("SIGKILL"), 3000);
    spawned.proc.on("exit", () => {
      clearTimeout(killTimer);
      resolve();
    });
    spawned.proc.kill("SIGTERM");
  });
}

export interface LiveServices {
  serviceBase: string;
  relayBase: string;
  /** The truck fixture, registered at boot. */
  documentId: string;
  /** Kills only the session service, leaving the relay up. */
  stopSessionService: () => Promise<void>;
  stop: () => Promise<void>;
}

/** Poll interval is dropped to 100ms so detection round-trips stay snappy. */
export async function startServices(): Promise<LiveServices> {
  const relayPort = await freePort();
  const servicePort = await freePort();
  const relayBase = `http://127.0.0.1:${relayPort}`;
  const serviceBase = `http://127.0.0.1:${servicePort}`;

  const relay = launch("relay", ["serve-relay", "--listen", `127.0.0.1:${relayPort}`]);
  const service = launch("session-service", [
    "serve-session",
    "--listen",
    `127.0.0.1:${servicePort}`,
    "--relay-addr",
    relayBase,
    "--poll-ms",
    "100",
  ]);

  try {
    await waitHealthy(relayBase, relay, 10_000);
    await waitHealthy(serviceBase, service, 10_000);
  } catch (err) {
    await Promise.all([terminate(relay), terminate(service)]);
    throw err;
  }

  const docText = readFileSync(TRUCK_DOC_PATH, "utf8");
  const res = await fetch(`${serviceBase}/documents`, { method: "POST", body: docText });
  if (!res.ok) {
    const detail = await res.text();
    await Promise.all([terminate(relay), terminate(service)]);
    throw new Error(`could not register the fixture document: ${res.status} ${detail}`);
  }
  const { document_id } = (await res.json()) as { document_id: string };

  return {
    serviceBase,
    relayBase,
    documentId: document_id,
    stopSessionService: () => terminate(service),
    stop: async () => {
      await Promise.all([terminate(relay), terminate(service)]);
    },
  };
}
