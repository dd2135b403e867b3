/**
 * Evaluation workflow wizard: role definition, strategy and style picks,
 * criteria weights editor with a live normalized preview. Validation here is
 * optimistic; the server re-checks everything.
 */

import { ApiClient, ApiError } from "../api.js";
import { clear, h } from "../dom.js";
import { formatNormalized, normalizeWeights, weightError } from "../model.js";
import type { AssessmentStyle, ReasoningStrategy } from "../types.js";

const STRATEGIES: { value: ReasoningStrategy; label: string }[] = [
  { value: "before_scoring", label: "Reasoning before scoring" },
  { value: "after_scoring", label: "Reasoning after scoring" },
  { value: "chain_of_thought", label: "Chain of thought" },
  { value: "deep_reasoning_planning", label: "Deep reasoning with planning" },
];

interface CriterionRow {
  name: string;
  description: string;
  weight: number;
}

export interface WizardResult {
  evaluatorId: string;
  sessionId?: string;
  runId?: string;
}

export function renderWizard(root: HTMLElement, client: ApiClient,
                             subjectDocId: string,
                             onDone?: (result: WizardResult) => void): void {
  clear(root);
  const rows: CriterionRow[] = [
    { name: "Novelty", description: "", weight: 1 },
    { name: "Rigor", description: "", weight: 1 },
  ];
  let strategy: ReasoningStrategy = "before_scoring";
  let style: AssessmentStyle = "scored";

  const errorBox = h("p", { class: "error", id: "wizard-error" });
  const roleName = h("input", { id: "role-name", value: "Assessor" });
  const roleStatement = h("textarea", { id: "role-statement" });
  roleStatement.value = "Ground every judgement in quoted evidence.";

  const criteriaBody = h("tbody", { id: "criteria-rows" });
  const aggregationSelect = h("select", { id: "aggregation" },
    h("option", { value: "weighted_average" }, "weighted average"),
    h("option", { value: "simple_average" }, "simple average"));
  const submitRun = h("button", { id: "submit-run", type: "button" }, "Start run");
  const submitSession = h("button", { id: "submit-session", type: "button" },
                          "Start blind review session");

  function redrawCriteria(): void {
    clear(criteriaBody);
    const normalized = normalizeWeights(rows.map((r) => (r.weight > 0 ? r.weight : 0)));
    rows.forEach((row, index) => {
      const error = weightError(row.weight);
      const nameInput = h("input", {
        class: "criterion-name", value: row.name,
        oninput: (event) => { row.name = (event.target as HTMLInputElement).value; },
      });
      const weightInput = h("input", {
        class: "criterion-weight", type: "number", step: "0.1",
        value: String(row.weight),
        oninput: (event) => {
          row.weight = Number((event.target as HTMLInputElement).value);
          redrawCriteria();
        },
      });
      criteriaBody.append(h("tr", {},
        h("td", {}, nameInput),
        h("td", {}, weightInput),
        h("td", { class: "normalized-weight" },
          error ? "—" : formatNormalized(normalized[index])),
        h("td", { class: error ? "weight-error" : "weight-ok" }, error ?? ""),
        h("td", {}, h("button", {
          type: "button",
          onclick: () => { rows.splice(index, 1); redrawCriteria(); },
        }, "remove")),
      ));
    });
    const blocked = rows.length === 0 || rows.some((r) => weightError(r.weight) !== null);
    (submitRun as HTMLButtonElement).disabled = blocked;
    (submitSession as HTMLButtonElement).disabled = blocked;
  }

  function applyStyle(): void {
    // Aggregation has no effect on qualitative assessments.
    (aggregationSelect as HTMLSelectElement).disabled = style === "qualitative";
  }

  async function submit(kind: "run" | "session"): Promise<void> {
    errorBox.textContent = "";
    try {
      const evaluator = await client.createEvaluator({
        role: { role_name: roleName.value, role_statement: roleStatement.value },
        criteria: rows.map((r) => ({ name: r.name, description: r.description,
                                     weight: r.weight })),
      });
      const config = {
        evaluator_id: evaluator.evaluator_id,
        evaluator_version: evaluator.version,
        reasoning_strategy: strategy,
        assessment_style: style,
        aggregation: (aggregationSelect as HTMLSelectElement).value as
          "weighted_average" | "simple_average",
        provider: { name: "stub", params: { seed: 1 } },
      };
      if (kind === "run") {
        const started = await client.startRun(subjectDocId, config);
        onDone?.({ evaluatorId: evaluator.evaluator_id, runId: started.run_id });
      } else {
        const session = await client.openSession(subjectDocId, config);
        onDone?.({ evaluatorId: evaluator.evaluator_id, sessionId: session.session_id });
      }
    } catch (error) {
      errorBox.textContent = error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : String(error);
    }
  }

  submitRun.addEventListener("click", () => void submit("run"));
  submitSession.addEventListener("click", () => void submit("session"));

  const strategyRadios = STRATEGIES.map(({ value, label }) =>
    h("label", { class: "strategy-option" },
      h("input", {
        type: "radio", name: "strategy", value,
        checked: value === strategy,
        onchange: () => { strategy = value; },
      }), label));

  const styleRadios = (["scored", "qualitative"] as AssessmentStyle[]).map((value) =>
    h("label", { class: "style-option" },
      h("input", {
        type: "radio", name: "style", value,
        checked: value === style,
        onchange: () => { style = value; applyStyle(); },
      }), value));

  root.append(
    h("section", { class: "wizard" },
      h("h2", {}, "Configure evaluation workflow"),
      h("fieldset", {},
        h("legend", {}, "Reviewer role"),
        h("label", {}, "Role name ", roleName),
        h("label", {}, "Role statement ", roleStatement)),
      h("fieldset", {},
        h("legend", {}, "Reasoning strategy"), ...strategyRadios),
      h("fieldset", {},
        h("legend", {}, "Assessment style"), ...styleRadios,
        h("label", {}, " Aggregation ", aggregationSelect)),
      h("fieldset", {},
        h("legend", {}, "Criteria and weights"),
        h("table", { class: "criteria-editor" },
          h("thead", {}, h("tr", {},
            h("th", {}, "name"), h("th", {}, "weight"),
            h("th", {}, "normalized"), h("th", {}, ""), h("th", {}, ""))),
          criteriaBody),
        h("button", {
          id: "add-criterion", type: "button",
          onclick: () => { rows.push({ name: "", description: "", weight: 1 }); redrawCriteria(); },
        }, "add criterion")),
      errorBox,
      submitRun,
      submitSession,
    ),
  );
  redrawCriteria();
  applyStyle();
}
