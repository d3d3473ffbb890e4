/**
 * Browser bootstrap. Connection targets come from the query string:
 *
 *   ?service=http://host:8732&relay=http://host:8731&document=doc-1
 *   ?service=...&session=<id>           join an existing session
 *
 * Defaults assume the services run next to the page on their usual ports.
 */

import { PlayerController } from "./controller.js";
import { PlayerUi } from "./ui.js";

async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app mount point");

  const params = new URLSearchParams(window.location.search);
  const host = window.location.hostname || "127.0.0.1";
  const config = {
    serviceBase: params.get("service") ?? `http://${host}:8732`,
    relayBase: params.get("relay") ?? `http://${host}:8731`,
    documentId: params.get("document") ?? "doc-1",
    sessionId: params.get("session") ?? undefined,
    deviceId: params.get("device") ?? "player-ui",
  };

  try {
    const controller = await PlayerController.connect(config);
    new PlayerUi(app, controller);
  } catch (err) {
    app.textContent =
      `Could not reach the session service at ${config.serviceBase}: ` +
      `${err instanceof Error ? err.message : String(err)}`;
  }
}

void boot();
