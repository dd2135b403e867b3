/** Library: documents, evaluators and runs, plus upload and navigation. */

import { ApiClient, ApiError } from "../api.js";
import { clear, h } from "../dom.js";

export async function renderLibrary(root: HTMLElement, client: ApiClient,
                                    navigate: (hash: string) => void): Promise<void> {
  const [documents, evaluators, runs] = await Promise.all([
    client.listDocuments(), client.listEvaluators(), client.listRuns()]);
  clear(root);

  const errorBox = h("p", { class: "error", id: "library-error" });
  const fileInput = h("input", { id: "upload-file", type: "file" });
  const classSelect = h("select", { id: "upload-class" },
    ...["subject", "criteria_guidance", "evaluation_example", "reference_standard"]
      .map((value) => h("option", { value }, value)));
  const uploadButton = h("button", { id: "upload-button", type: "button" }, "Upload");
  uploadButton.addEventListener("click", () => {
    void (async () => {
      errorBox.textContent = "";
      const file = (fileInput as HTMLInputElement).files?.[0];
      if (!file) {
        errorBox.textContent = "choose a file first";
        return;
      }
      try {
        await client.uploadDocument(file.name, await file.text(),
                                    (classSelect as HTMLSelectElement).value);
        await renderLibrary(root, client, navigate);
      } catch (error) {
        errorBox.textContent = error instanceof ApiError
          ? `${error.code}: ${error.message}` : String(error);
      }
    })();
  });

  root.append(
    h("section", { class: "library" },
      h("h2", {}, "Library"),
      h("div", { class: "upload-form" }, fileInput, classSelect, uploadButton, errorBox),
      h("h3", {}, "Documents"),
      h("table", { id: "documents-table" },
        h("thead", {}, h("tr", {}, h("th", {}, "title"), h("th", {}, "class"),
                         h("th", {}, "segments"), h("th", {}, ""))),
        h("tbody", {}, ...documents.documents.map((doc) =>
          h("tr", { "data-doc-id": doc.doc_id },
            h("td", {}, doc.title),
            h("td", {}, doc.doc_class),
            h("td", {}, String(doc.segment_index.length)),
            h("td", {}, doc.doc_class === "subject"
              ? h("button", {
                  class: "start-wizard", type: "button",
                  onclick: () => navigate(`#/wizard/${doc.doc_id}`),
                }, "evaluate")
              : ""))))),
      h("h3", {}, "Evaluators"),
      h("ul", { id: "evaluators-list" }, ...evaluators.evaluators.map((e) =>
        h("li", {}, `${e.role_name} (${e.evaluator_id} v${e.latest_version})`))),
      h("h3", {}, "Runs"),
      h("table", { id: "runs-table" },
        h("thead", {}, h("tr", {}, h("th", {}, "run"), h("th", {}, "status"),
                         h("th", {}, "overall"))),
        h("tbody", {}, ...runs.runs.map((run) =>
          h("tr", { "data-run-id": run.run_id },
            h("td", {}, run.run_id),
            h("td", {}, run.status),
            h("td", {}, run.overall_score == null ? "—" : String(run.overall_score))))))),
  );
}
