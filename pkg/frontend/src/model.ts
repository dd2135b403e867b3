/** Pure view-model helpers; the server stays authoritative for all of them. */

import type { SessionState } from "./types.js";

/** Client-side mirror of the blind-review gate. */
export function canViewAssessments(state: SessionState): boolean {
  return state === "revealed" || state === "annotated";
}

export function normalizeWeights(weights: number[]): number[] {
  const total = weights.reduce((sum, w) => sum + w, 0);
  return weights.map((w) => w / total);
}

/** Inline validation mirroring the server's weight rules (optimistic only). */
export function weightError(value: number): string | null {
  if (!Number.isFinite(value)) return "weight must be a number";
  if (value <= 0) return "weight must be positive";
  return null;
}

export function formatNormalized(value: number): string {
  return value.toFixed(3);
}

export function parseSegmentId(segmentId: string): { docId: string; n: number } | null {
  const match = /^(.+)\/(\d+)$/.exec(segmentId);
  if (!match) return null;
  return { docId: match[1], n: Number(match[2]) };
}

export function segmentAnchorId(segmentId: string): string {
  return `seg-${segmentId.replace(/[^A-Za-z0-9_-]/g, "-")}`;
}
