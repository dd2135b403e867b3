/** Run-compare and audit views render their payloads faithfully. */

import { describe, expect, it } from "vitest";

import { renderAuditTable } from "../src/views/audit.js";
import { renderRunCompare } from "../src/views/runCompare.js";
import type { AuditRecordPayload, RunComparePayload } from "../src/types.js";

const REPORT: RunComparePayload = {
  run_a: "run-aaa",
  run_b: "run-bbb",
  subject_doc_id: "dsubject",
  config_diff: [{ field: "reasoning_strategy", a: "before_scoring",
                  b: "chain_of_thought" }],
  criteria: [
    { criterion_name: "Novelty", score_a: 3, score_b: 3, delta: 0 },
    { criterion_name: "Rigor", score_a: 3, score_b: 4, delta: 1 },
  ],
  unmatched_criteria_a: [],
  unmatched_criteria_b: ["Presentation"],
};

describe("run comparison view", () => {
  it("lists config differences and flags nonzero deltas", () => {
    const root = document.createElement("div");
    renderRunCompare(root, REPORT);

    const diffRows = root.querySelectorAll(".config-diff-row");
    expect(diffRows.length).toBe(1);
    expect(diffRows[0].getAttribute("data-field")).toBe("reasoning_strategy");

    const flagged = root.querySelectorAll(".criteria-diff .delta-flagged");
    expect(flagged.length).toBe(1);
    expect(flagged[0].textContent).toContain("Rigor");
    expect(flagged[0].querySelector(".delta")?.textContent).toBe("+1");

    expect(root.textContent).toContain("Only in run B: Presentation");
  });

  it("says so when configurations are identical", () => {
    const root = document.createElement("div");
    renderRunCompare(root, { ...REPORT, config_diff: [] });
    expect(root.querySelector("#config-identical")).not.toBeNull();
  });
});

describe("audit view", () => {
  it("renders one row per record in seq order", () => {
    const records: AuditRecordPayload[] = [1, 2, 3].map((seq) => ({
      seq,
      timestamp: `2026-01-0${seq}T00:00:00+00:00`,
      actor: seq % 2 ? "user" : "system",
      action: `action-${seq}`,
      digest: "d".repeat(64),
      prev_digest: "0".repeat(64),
    }));
    const root = document.createElement("div");
    renderAuditTable(root, records);
    const rows = root.querySelectorAll("#audit-table tbody tr");
    expect(rows.length).toBe(3);
    expect(rows[0].getAttribute("data-seq")).toBe("1");
    expect(rows[2].textContent).toContain("action-3");
  });
});
