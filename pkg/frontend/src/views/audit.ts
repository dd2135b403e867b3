/** Read-only audit trail table. */

import { ApiClient } from "../api.js";
import { clear, h } from "../dom.js";
import type { AuditRecordPayload } from "../types.js";

export function renderAuditTable(root: HTMLElement,
                                 records: AuditRecordPayload[]): void {
  clear(root);
  root.append(
    h("section", { class: "audit" },
      h("h2", {}, "Audit trail"),
      h("table", { id: "audit-table" },
        h("thead", {}, h("tr", {},
          h("th", {}, "seq"), h("th", {}, "timestamp"), h("th", {}, "actor"),
          h("th", {}, "action"), h("th", {}, "digest"))),
        h("tbody", {}, ...records.map((record) =>
          h("tr", { "data-seq": String(record.seq) },
            h("td", {}, String(record.seq)),
            h("td", {}, record.timestamp),
            h("td", {}, record.actor),
            h("td", {}, record.action),
            h("td", { class: "digest" }, record.digest.slice(0, 12))))))),
  );
}

export async function loadAndRenderAudit(root: HTMLElement,
                                         client: ApiClient): Promise<void> {
  const payload = await client.audit();
  renderAuditTable(root, payload.records);
}
