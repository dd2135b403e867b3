/** Payload shapes mirrored from the service API. */

export type SessionState =
  | "awaiting_human"
  | "human_submitted"
  | "revealed"
  | "annotated";

export type ReasoningStrategy =
  | "before_scoring"
  | "after_scoring"
  | "chain_of_thought"
  | "deep_reasoning_planning";

export type AssessmentStyle = "scored" | "qualitative";
export type Aggregation = "weighted_average" | "simple_average";

export interface DocumentManifest {
  doc_id: string;
  doc_class: string;
  title: string;
  content_digest: string;
  segment_index: SegmentIndexEntry[];
  body?: string;
}

export interface SegmentIndexEntry {
  segment_id: string;
  section_path: string[];
  char_span: [number, number];
}

export interface SegmentPayload {
  segment_id: string;
  section_path: string[];
  text: string;
  char_span: [number, number];
}

export interface CriterionPayload {
  criterion_id: string;
  name: string;
  description: string;
  weight: number;
  guidance_refs: string[];
}

export interface EvaluatorProfilePayload {
  evaluator_id: string;
  version: number;
  parent: [string, number] | null;
  role: { role_name: string; role_statement: string };
  criteria: CriterionPayload[];
}

export interface RunConfigPayload {
  evaluator_id: string;
  evaluator_version: number | null;
  reasoning_strategy: ReasoningStrategy;
  assessment_style: AssessmentStyle;
  aggregation: Aggregation;
  score_scale: [number, number];
  retrieval_k: number;
  provider: { name: string; params: Record<string, unknown> };
  parallelism?: number;
}

export interface AssessmentPayload {
  criterion_id: string;
  score: number | null;
  rationale: string;
  claims: { claim_text: string; evidence: { segment_id: string; quote: string }[] }[];
  queries_used: string[];
}

export interface RunPayload {
  run_id: string;
  status: "running" | "completed" | "failed";
  subject_doc_id?: string;
  overall_score?: number | null;
  assessments?: AssessmentPayload[];
  config?: RunConfigPayload;
  run_digest?: string;
}

export interface SessionSummary {
  session_id: string;
  subject_doc_id: string;
  state: SessionState;
  run_status: "running" | "finished";
  score_scale: [number, number];
  criteria: { criterion_id: string; name: string; description: string; weight: number }[];
  annotations: AnnotationPayload[];
  human_review: { entries: HumanReviewEntry[] } | null;
}

export interface HumanReviewEntry {
  criterion_id: string;
  score: number | null;
  comments: string;
}

export interface AnnotationPayload {
  annotation_id: string;
  target: string;
  verdict: "agree" | "disagree" | "flag_incorrect";
  explanation: string;
}

export interface ComparisonRow {
  criterion_id: string;
  criterion_name: string;
  human_score: number | null;
  ai_score: number | null;
  delta: number | null;
  human_comments: string;
  ai_rationale_excerpt: string;
}

export interface ComparisonReportPayload {
  rows: ComparisonRow[];
  agreement_summary: { matching: number; compared: number; total: number };
}

export interface RevealPayload {
  session: SessionSummary;
  run: RunPayload;
  comparison: ComparisonReportPayload;
}

export interface ExplanationRow {
  criterion_id: string;
  criterion_name: string;
  score: number | null;
  justification: string;
  evidence: { segment_id: string; quote: string; claim_text: string }[];
  guidance_refs: string[];
  no_evidence: boolean;
}

export interface RunComparePayload {
  run_a: string;
  run_b: string;
  subject_doc_id: string;
  config_diff: { field: string; a: unknown; b: unknown }[];
  criteria: { criterion_name: string; score_a: number | null; score_b: number | null;
              delta: number | null }[];
  unmatched_criteria_a: string[];
  unmatched_criteria_b: string[];
}

export interface AuditRecordPayload {
  seq: number;
  timestamp: string;
  actor: string;
  action: string;
  digest: string;
  prev_digest: string;
}
