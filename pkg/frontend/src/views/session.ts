/**
 * Blind review page. While the session awaits the human review, the AI panel
 * renders locked and nothing assessment-shaped is ever requested — the view
 * state is a client-side mirror; the server gate stays authoritative.
 * After reveal: side-by-side comparison with clickable citations that focus
 * the cited segment in the source pane, plus annotation controls.
 */

import { ApiClient, ApiError } from "../api.js";
import { clear, h } from "../dom.js";
import { canViewAssessments, parseSegmentId, segmentAnchorId } from "../model.js";
import type {
  ComparisonReportPayload,
  DocumentManifest,
  SessionSummary,
} from "../types.js";

export async function renderSessionPage(root: HTMLElement, client: ApiClient,
                                        sessionId: string): Promise<void> {
  const summary = await client.getSession(sessionId);
  const subject = await client.getDocument(summary.subject_doc_id);
  clear(root);

  const stateBadge = h("span", { class: `state-badge state-${summary.state}`,
                                 id: "state-badge" }, summary.state);
  const sourcePane = renderSourcePane(subject);
  const workPane = h("div", { class: "work-pane", id: "work-pane" });

  root.append(
    h("header", {},
      h("h2", {}, `Blind review: ${subject.title}`), stateBadge),
    h("div", { class: "split" }, sourcePane, workPane),
  );

  if (!canViewAssessments(summary.state)) {
    renderBlindPhase(workPane, client, summary, stateBadge, sourcePane);
  } else {
    const results = await client.aiResults(sessionId);
    renderComparison(workPane, client, summary, results.comparison, stateBadge,
                     sourcePane);
  }
}

function renderSourcePane(subject: DocumentManifest & { body: string }): HTMLElement {
  const pane = h("div", { class: "source-pane", id: "source-pane" });
  for (const entry of subject.segment_index) {
    const [lo, hi] = entry.char_span;
    pane.append(h("div", {
      class: "segment",
      id: segmentAnchorId(entry.segment_id),
      "data-segment-id": entry.segment_id,
    },
      h("div", { class: "segment-path" }, entry.section_path.join(" / ")),
      h("pre", { class: "segment-text" }, subject.body.slice(lo, hi))));
  }
  return pane;
}

function renderBlindPhase(pane: HTMLElement, client: ApiClient,
                          summary: SessionSummary, stateBadge: HTMLElement,
                          sourcePane: HTMLElement): void {
  clear(pane);
  const [lo, hi] = summary.score_scale;
  const errorBox = h("p", { class: "error", id: "session-error" });

  const lockedPanel = h("section", { class: "ai-panel locked", id: "ai-panel" },
    h("h3", {}, "AI results"),
    h("p", { class: "locked-note" },
      "Locked until your independent review is submitted."));

  if (summary.state === "awaiting_human") {
    const inputs = summary.criteria.map((criterion) => {
      const score = h("input", {
        class: "human-score", type: "number",
        min: String(lo), max: String(hi),
        "data-criterion": criterion.criterion_id,
      });
      const comments = h("textarea", { class: "human-comments",
                                       "data-criterion": criterion.criterion_id });
      return { criterion, score, comments };
    });
    const submit = h("button", { id: "submit-review", type: "button" },
                     "Submit my review");
    submit.addEventListener("click", () => {
      void (async () => {
        errorBox.textContent = "";
        try {
          const entries = inputs.map(({ criterion, score, comments }) => ({
            criterion_id: criterion.criterion_id,
            score: score.value === "" ? null : Number(score.value),
            comments: comments.value,
          }));
          const updated = await client.submitHumanReview(summary.session_id, entries);
          stateBadge.textContent = updated.state;
          renderBlindPhase(pane, client, updated, stateBadge, sourcePane);
        } catch (error) {
          errorBox.textContent = error instanceof ApiError
            ? `${error.code}: ${error.message}` : String(error);
        }
      })();
    });

    pane.append(
      h("section", { class: "human-review-form" },
        h("h3", {}, "Your independent review"),
        h("p", {}, `Scores are on a ${lo}-${hi} scale.`),
        ...inputs.map(({ criterion, score, comments }) =>
          h("div", { class: "criterion-entry" },
            h("h4", {}, criterion.name),
            h("p", { class: "criterion-description" }, criterion.description),
            h("label", {}, "score ", score),
            h("label", {}, "comments ", comments))),
        errorBox, submit),
      lockedPanel);
    return;
  }

  // human_submitted: review is in; reveal becomes available.
  const reveal = h("button", { id: "reveal-button", type: "button" },
                   "Reveal AI results and compare");
  reveal.addEventListener("click", () => {
    void (async () => {
      errorBox.textContent = "";
      try {
        const payload = await client.reveal(summary.session_id);
        stateBadge.textContent = payload.session.state;
        renderComparison(pane, client, payload.session, payload.comparison,
                         stateBadge, sourcePane);
      } catch (error) {
        errorBox.textContent = error instanceof ApiError
          ? `${error.code}: ${error.message}` : String(error);
      }
    })();
  });
  pane.append(
    h("section", {},
      h("h3", {}, "Review submitted"),
      h("p", {}, "Your review is locked in. Reveal the AI results when ready."),
      errorBox, reveal),
    lockedPanel);
}

export function renderComparison(pane: HTMLElement, client: ApiClient,
                                 summary: SessionSummary,
                                 comparison: ComparisonReportPayload,
                                 stateBadge: HTMLElement,
                                 sourcePane: HTMLElement): void {
  clear(pane);
  const errorBox = h("p", { class: "error", id: "session-error" });
  const body = h("tbody", {},
    ...comparison.rows.map((row) => h("tr", {
      class: row.delta === null || row.delta === 0 ? "delta-zero" : "delta-flagged",
      "data-criterion": row.criterion_id,
    },
      h("td", {}, row.criterion_name),
      h("td", { class: "human-score" },
        row.human_score === null ? "—" : String(row.human_score)),
      h("td", { class: "ai-score" },
        row.ai_score === null ? "—" : String(row.ai_score)),
      h("td", { class: "delta" },
        row.delta === null ? "—" : (row.delta > 0 ? `+${row.delta}` : String(row.delta))),
      h("td", { class: "human-comments" }, row.human_comments),
      h("td", { class: "ai-rationale" }, row.ai_rationale_excerpt),
    )));

  const agreement = comparison.agreement_summary;
  pane.append(
    h("section", { class: "comparison", id: "comparison" },
      h("h3", {}, "Side-by-side comparison"),
      h("p", { id: "agreement-summary" },
        `Agreement: ${agreement.matching} of ${agreement.compared} compared criteria match.`),
      h("table", { class: "comparison-table" },
        h("thead", {}, h("tr", {},
          h("th", {}, "criterion"), h("th", {}, "you"), h("th", {}, "AI"),
          h("th", {}, "delta"), h("th", {}, "your comments"),
          h("th", {}, "AI rationale"))),
        body)),
  );

  void appendEvidence(pane, client, summary, sourcePane, errorBox, stateBadge);
}

async function appendEvidence(pane: HTMLElement, client: ApiClient,
                              summary: SessionSummary, sourcePane: HTMLElement,
                              errorBox: HTMLElement,
                              stateBadge: HTMLElement): Promise<void> {
  const results = await client.aiResults(summary.session_id);
  const evidenceSection = h("section", { class: "evidence", id: "evidence" },
    h("h3", {}, "Evidence citations"));

  for (const assessment of results.run.assessments ?? []) {
    for (const claim of assessment.claims) {
      for (const evidence of claim.evidence) {
        const link = h("a", {
          class: "citation-link",
          href: "#",
          "data-segment-id": evidence.segment_id,
        }, `[seg:${evidence.segment_id}]`);
        link.addEventListener("click", (event) => {
          event.preventDefault();
          void focusSegment(client, sourcePane, evidence.segment_id, errorBox);
        });
        evidenceSection.append(h("p", { class: "evidence-row" },
          link, ` “${evidence.quote}”`));
      }
    }
  }
  pane.append(evidenceSection);
  pane.append(renderAnnotationControls(client, summary, stateBadge, errorBox));
  pane.append(errorBox);
}

export async function focusSegment(client: ApiClient, sourcePane: HTMLElement,
                                   segmentId: string,
                                   errorBox: HTMLElement): Promise<void> {
  const ref = parseSegmentId(segmentId);
  if (!ref) {
    errorBox.textContent = `bad citation target ${segmentId}`;
    return;
  }
  try {
    // Resolve through the segments endpoint so a stale link surfaces a 404.
    await client.getSegment(ref.docId, ref.n);
  } catch (error) {
    errorBox.textContent = error instanceof ApiError
      ? `${error.code}: ${error.message}` : String(error);
    return;
  }
  for (const el of Array.from(sourcePane.querySelectorAll(".segment.focused"))) {
    el.classList.remove("focused");
  }
  const target = sourcePane.querySelector<HTMLElement>(
    `#${segmentAnchorId(segmentId)}`);
  if (target) {
    target.classList.add("focused");
    target.scrollIntoView?.({ behavior: "smooth", block: "center" });
  }
}

function renderAnnotationControls(client: ApiClient, summary: SessionSummary,
                                  stateBadge: HTMLElement,
                                  errorBox: HTMLElement): HTMLElement {
  const targetSelect = h("select", { id: "annotation-target" },
    h("option", { value: "overall" }, "overall"),
    ...summary.criteria.map((c) =>
      h("option", { value: c.criterion_id }, c.name)));
  const verdictSelect = h("select", { id: "annotation-verdict" },
    ...["agree", "disagree", "flag_incorrect"].map((v) =>
      h("option", { value: v }, v)));
  const explanation = h("textarea", { id: "annotation-explanation" });
  const list = h("ul", { id: "annotation-list" },
    ...summary.annotations.map((a) =>
      h("li", {}, `${a.target}: ${a.verdict} — ${a.explanation}`)));
  const submit = h("button", { id: "submit-annotation", type: "button" }, "Annotate");
  submit.addEventListener("click", () => {
    void (async () => {
      errorBox.textContent = "";
      try {
        const updated = await client.annotate(
          summary.session_id,
          (targetSelect as HTMLSelectElement).value,
          (verdictSelect as HTMLSelectElement).value,
          explanation.value);
        stateBadge.textContent = updated.state;
        const last = updated.annotations[updated.annotations.length - 1];
        list.append(h("li", {}, `${last.target}: ${last.verdict} — ${last.explanation}`));
      } catch (error) {
        errorBox.textContent = error instanceof ApiError
          ? `${error.code}: ${error.message}` : String(error);
      }
    })();
  });
  return h("section", { class: "annotations", id: "annotations" },
    h("h3", {}, "Annotations"),
    list,
    h("label", {}, "target ", targetSelect),
    h("label", {}, "verdict ", verdictSelect),
    h("label", {}, "explanation ", explanation),
    submit);
}

/** Direct navigation to AI results; renders the gate error page when gated. */
export async function renderAiResultsPage(root: HTMLElement, client: ApiClient,
                                          sessionId: string): Promise<void> {
  clear(root);
  try {
    const results = await client.aiResults(sessionId);
    root.append(h("pre", { id: "ai-results-json" },
                  JSON.stringify(results.run, null, 2)));
  } catch (error) {
    if (error instanceof ApiError) {
      root.append(h("section", { class: "gated-error", id: "gated-error" },
        h("h2", {}, "Results are gated"),
        h("p", { id: "gated-code" }, error.code),
        h("p", {}, error.message)));
      return;
    }
    throw error;
  }
}
