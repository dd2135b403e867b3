/** Side-by-side comparison of two runs: config diff and score deltas. */

import { ApiClient } from "../api.js";
import { clear, h } from "../dom.js";
import type { RunComparePayload } from "../types.js";

export function renderRunCompare(root: HTMLElement,
                                 report: RunComparePayload): void {
  clear(root);
  const diffRows = report.config_diff.map((row) =>
    h("tr", { class: "config-diff-row", "data-field": row.field },
      h("td", {}, row.field),
      h("td", {}, JSON.stringify(row.a)),
      h("td", {}, JSON.stringify(row.b))));

  const criteriaRows = report.criteria.map((row) =>
    h("tr", { class: row.delta ? "delta-flagged" : "delta-zero" },
      h("td", {}, row.criterion_name),
      h("td", {}, row.score_a === null ? "—" : String(row.score_a)),
      h("td", {}, row.score_b === null ? "—" : String(row.score_b)),
      h("td", { class: "delta" },
        row.delta === null ? "—" : (row.delta > 0 ? `+${row.delta}` : String(row.delta)))));

  root.append(
    h("section", { class: "run-compare", id: "run-compare" },
      h("h2", {}, `Workflow comparison: ${report.run_a} vs ${report.run_b}`),
      h("h3", {}, "Configuration differences"),
      report.config_diff.length === 0
        ? h("p", { id: "config-identical" }, "Configurations are identical.")
        : h("table", { class: "config-diff" },
            h("thead", {}, h("tr", {},
              h("th", {}, "field"), h("th", {}, "run A"), h("th", {}, "run B"))),
            h("tbody", {}, ...diffRows)),
      h("h3", {}, "Per-criterion scores"),
      h("table", { class: "criteria-diff" },
        h("thead", {}, h("tr", {},
          h("th", {}, "criterion"), h("th", {}, "run A"), h("th", {}, "run B"),
          h("th", {}, "delta"))),
        h("tbody", {}, ...criteriaRows)),
      ...report.unmatched_criteria_a.map((name) =>
        h("p", { class: "unmatched" }, `Only in run A: ${name}`)),
      ...report.unmatched_criteria_b.map((name) =>
        h("p", { class: "unmatched" }, `Only in run B: ${name}`))),
  );
}

export async function loadAndRenderRunCompare(root: HTMLElement, client: ApiClient,
                                              runA: string,
                                              runB: string): Promise<void> {
  renderRunCompare(root, await client.compareRuns(runA, runB));
}
