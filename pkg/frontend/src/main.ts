/**
 * Entry point: wire the API client, session controller, and view into the
 * register -> (next -> rate -> submit)* -> completion loop.
 *
 * Configuration is the server URL only (?server=... or same origin).
 */

import { ApiClient } from "./api.js";
import { AnnotationSession } from "./session.js";
import { renderCompletion, renderShell, renderTask, showError, showStatus, ViewRefs } from "./view.js";

export interface FlowDeps {
  api?: ApiClient;
  storage?: Storage;
}

export async function runSessionFlow(
  serverUrl: string,
  root: HTMLElement,
  raterId: string,
  deps: FlowDeps = {},
): Promise<AnnotationSession> {
  const refs: ViewRefs = renderShell(root);
  const api =
    deps.api ??
    new ApiClient(serverUrl, {
      onRetry: (attempt) => showStatus(refs, `Connection trouble, retrying (attempt ${attempt})...`),
    });
  const session = new AnnotationSession(api, deps.storage ?? window.localStorage);

  await session.start(raterId);

  for (;;) {
    showStatus(refs, "Loading next task...");
    const task = await session.next();
    if (task === null) {
      renderCompletion(refs, null);
      return session;
    }
    await new Promise<void>((resolve) => {
      renderTask(refs, task, async (scores) => {
        await session.submit(scores);
        resolve();
      });
    });
  }
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const serverUrl = params.get("server") ?? window.location.origin;

  const form = document.createElement("form");
  form.className = "start-form";
  const label = document.createElement("label");
  label.textContent = "Your rater id: ";
  const input = document.createElement("input");
  input.name = "rater_id";
  input.required = true;
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Start rating";
  label.append(input);
  form.append(label, button);
  root.replaceChildren(form);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const raterId = input.value.trim();
    if (!raterId) return;
    runSessionFlow(serverUrl, root, raterId).catch((error: unknown) => {
      const refs = renderShell(root);
      showError(refs, `Session failed: ${error instanceof Error ? error.message : String(error)}`);
    });
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  bootstrap();
}
