/** Test support: real-server lifecycle and DOM polling. */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const SUBJECT_BODY = `# A Layered Architecture for Automated Document Assessment

This report proposes a layered architecture for assessing long technical
documents with language models.

## Motivation

Manual assessment of long submissions is slow and inconsistent between
assessors. Automated pipelines must remain auditable.

## Approach

The pipeline splits each submission into section-aligned chunks, retrieves
related material, and judges one criterion at a time with mechanical
citation checks.

## Findings

Across a pilot corpus the per-criterion agreement with experienced assessors
was encouraging and every accepted judgement carried a verifiable citation.
`;

export interface LiveServer {
  baseUrl: string;
  subjectDocId: string;
  stop: () => void;
}

const nodeFetch: typeof fetch = globalThis.fetch.bind(globalThis);

export async function startServer(): Promise<LiveServer> {
  const workdir = mkdtempSync(join(tmpdir(), "docueval-ui-"));
  const storeDir = join(workdir, "store");
  const subjectPath = join(workdir, "subject.md");
  writeFileSync(subjectPath, SUBJECT_BODY, "utf-8");

  const ingested = execFileSync(
    "docueval", ["--store", storeDir, "ingest", subjectPath, "--doc-class", "subject"],
    { encoding: "utf-8" });
  const subjectDocId = JSON.parse(ingested).doc_id as string;

  const port = 8900 + (process.pid % 500);
  const child: ChildProcess = spawn(
    "docueval",
    ["--store", storeDir, "serve", "--host", "127.0.0.1", "--port", String(port),
     "--sync-runs"],
    { stdio: "ignore" });

  const baseUrl = `http://127.0.0.1:${port}`;
  for (let attempt = 0; attempt < 120; attempt += 1) {
    try {
      const response = await nodeFetch(`${baseUrl}/health`);
      if (response.ok) {
        return { baseUrl, subjectDocId, stop: () => child.kill("SIGTERM") };
      }
    } catch {
      // server still starting
    }
    await sleep(250);
  }
  child.kill("SIGTERM");
  throw new Error("API server did not come up");
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(predicate: () => boolean,
                              timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await sleep(25);
  }
  throw new Error("waitFor timed out");
}

export function setInput(input: HTMLInputElement | HTMLTextAreaElement,
                         value: string): void {
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}
