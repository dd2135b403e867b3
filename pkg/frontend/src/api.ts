/**
 * Typed client for the evaluation API. Every request and response body flows
 * through the optional traffic recorder, which is how the blind-review gate
 * test proves that no assessment payload crosses the network before reveal.
 */

import type {
  AuditRecordPayload,
  ComparisonReportPayload,
  DocumentManifest,
  EvaluatorProfilePayload,
  ExplanationRow,
  RevealPayload,
  RunComparePayload,
  RunConfigPayload,
  RunPayload,
  SegmentPayload,
  SessionSummary,
} from "./types.js";

export interface RecordedExchange {
  method: string;
  url: string;
  status: number;
  requestBody: string | null;
  responseBody: string;
}

export type TrafficRecorder = (exchange: RecordedExchange) => void;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface ApiClientOptions {
  token?: string;
  recorder?: TrafficRecorder;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  private readonly fetchImpl: typeof fetch;

  constructor(
    readonly baseUrl: string,
    private readonly options: ApiClientOptions = {},
  ) {
    this.fetchImpl = options.fetchImpl ?? globalThis.fetch.bind(globalThis);
  }

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.options.token) headers["Authorization"] = `Bearer ${this.options.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown,
                           form?: FormData): Promise<T> {
    const url = `${this.baseUrl}${path}`;
    const init: RequestInit = { method, headers: this.headers(form === undefined) };
    if (form !== undefined) {
      init.body = form;
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(url, init);
    const text = await response.text();
    this.options.recorder?.({
      method,
      url,
      status: response.status,
      requestBody: typeof init.body === "string" ? init.body : null,
      responseBody: text,
    });
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, payload.code ?? "unknown",
                         payload.message ?? text);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  // --- documents -----------------------------------------------------------

  uploadDocument(filename: string, content: string, docClass: string,
                 title = ""): Promise<DocumentManifest & { created: boolean }> {
    const form = new FormData();
    form.append("file", new Blob([content], { type: "text/plain" }), filename);
    form.append("doc_class", docClass);
    form.append("title", title);
    return this.request("POST", "/documents", undefined, form);
  }

  listDocuments(): Promise<{ documents: DocumentManifest[] }> {
    return this.request("GET", "/documents");
  }

  getDocument(docId: string): Promise<DocumentManifest & { body: string }> {
    return this.request("GET", `/documents/${docId}`);
  }

  getSegment(docId: string, n: number): Promise<SegmentPayload> {
    return this.request("GET", `/documents/${docId}/segments/${n}`);
  }

  // --- evaluators -----------------------------------------------------------

  createEvaluator(payload: {
    role: { role_name: string; role_statement: string };
    criteria: { name: string; description?: string; weight?: number }[];
  }): Promise<EvaluatorProfilePayload> {
    return this.request("POST", "/evaluators", payload);
  }

  listEvaluators(): Promise<{ evaluators: { evaluator_id: string; latest_version: number;
                                            role_name: string }[] }> {
    return this.request("GET", "/evaluators");
  }

  extractCriteria(docId: string): Promise<{ criteria: { name: string; description: string;
                                                        weight: number }[] }> {
    return this.request("POST", "/evaluators/extract-criteria", { doc_id: docId });
  }

  // --- runs -----------------------------------------------------------------

  startRun(subjectDocId: string, config: Partial<RunConfigPayload>):
      Promise<{ run_id: string; status: string }> {
    return this.request("POST", "/runs", { subject_doc_id: subjectDocId, config });
  }

  getRun(runId: string): Promise<RunPayload> {
    return this.request("GET", `/runs/${runId}`);
  }

  listRuns(): Promise<{ runs: RunPayload[] }> {
    return this.request("GET", "/runs");
  }

  explanationPack(runId: string): Promise<{ run_id: string; rows: ExplanationRow[] }> {
    return this.request("GET", `/runs/${runId}/explanation-pack`);
  }

  compareRuns(a: string, b: string): Promise<RunComparePayload> {
    return this.request("GET",
      `/runs/compare?a=${encodeURIComponent(a)}&b=${encodeURIComponent(b)}`);
  }

  // --- sessions ---------------------------------------------------------------

  openSession(subjectDocId: string, config: Partial<RunConfigPayload>):
      Promise<SessionSummary> {
    return this.request("POST", "/sessions", { subject_doc_id: subjectDocId, config });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  submitHumanReview(sessionId: string, entries: { criterion_id: string;
                                                  score: number | null;
                                                  comments: string }[]):
      Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/human-review`, { entries });
  }

  reveal(sessionId: string): Promise<RevealPayload> {
    return this.request("POST", `/sessions/${sessionId}/reveal`);
  }

  aiResults(sessionId: string): Promise<{ run: RunPayload;
                                          comparison: ComparisonReportPayload }> {
    return this.request("GET", `/sessions/${sessionId}/ai-results`);
  }

  annotate(sessionId: string, target: string, verdict: string,
           explanation: string): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${sessionId}/annotations`,
                        { target, verdict, explanation });
  }

  // --- audit -------------------------------------------------------------------

  audit(fromSeq = 1): Promise<{ records: AuditRecordPayload[] }> {
    return this.request("GET", `/audit?from_seq=${fromSeq}`);
  }
}
