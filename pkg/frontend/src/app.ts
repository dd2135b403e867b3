/** Hash router wiring the views to one ApiClient. */

import { ApiClient } from "./api.js";
import { clear, h } from "./dom.js";
import { loadAndRenderAudit } from "./views/audit.js";
import { renderLibrary } from "./views/library.js";
import { loadAndRenderRunCompare } from "./views/runCompare.js";
import { renderAiResultsPage, renderSessionPage } from "./views/session.js";
import { renderWizard } from "./views/wizard.js";

export function startApp(root: HTMLElement, baseUrl: string): void {
  const client = new ApiClient(baseUrl);
  const navigate = (hash: string) => {
    window.location.hash = hash;
  };

  async function route(): Promise<void> {
    const hash = window.location.hash || "#/library";
    const parts = hash.replace(/^#\//, "").split("/");
    try {
      if (parts[0] === "wizard" && parts[1]) {
        clear(root);
        renderWizard(root, client, parts[1], (result) => {
          if (result.sessionId) navigate(`#/session/${result.sessionId}`);
          else navigate("#/library");
        });
      } else if (parts[0] === "session" && parts[1] && parts[2] === "ai-results") {
        await renderAiResultsPage(root, client, parts[1]);
      } else if (parts[0] === "session" && parts[1]) {
        await renderSessionPage(root, client, parts[1]);
      } else if (parts[0] === "compare" && parts[1] && parts[2]) {
        await loadAndRenderRunCompare(root, client, parts[1], parts[2]);
      } else if (parts[0] === "audit") {
        await loadAndRenderAudit(root, client);
      } else {
        await renderLibrary(root, client, navigate);
      }
    } catch (error) {
      clear(root);
      root.append(h("p", { class: "error" }, String(error)));
    }
  }

  window.addEventListener("hashchange", () => void route());
  void route();
}
