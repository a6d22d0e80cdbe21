/** Application shell: case selection, live chat, trace inspection, judgment.

One active session at a time; the service is the source of truth and the
pane state resyncs from it after any failed send.
*/

import { ApiClient, ApiError } from "./api.js";
import { createChatPane } from "./chat.js";
import { DraftStore } from "./drafts.js";
import {
  METRICS,
  buildLabels,
  cycleValue,
  emptyValues,
  prefillFromJudgment,
  valueLabel,
  type MetricName,
  type MetricValues,
} from "./metrics.js";
import { createTracePanel } from "./tracePanel.js";
import type { CaseView, VisibleTurn } from "./types.js";

export interface App {
  element: HTMLElement;
  refreshCases(): Promise<void>;
  startCase(caseId: string): Promise<void>;
  sendMessage(text: string): Promise<void>;
  inspectTurn(tutorTurn: number): Promise<void>;
  prefillJudgment(): Promise<void>;
  submitJudgment(): Promise<void>;
  refreshReport(): Promise<void>;
}

export interface AppOptions {
  client: ApiClient;
  drafts?: DraftStore;
}

export function createApp(root: HTMLElement, options: AppOptions): App {
  const doc = root.ownerDocument;
  const client = options.client;
  const drafts = options.drafts ?? new DraftStore();

  root.innerHTML = `
    <header class="app-header">
      <select data-role="case-select"></select>
      <button type="button" data-role="start-case">Start case</button>
      <span class="case-meta" data-role="case-meta"></span>
    </header>
    <p class="question-view" data-role="question-view"></p>
    <main class="app-main"></main>
    <section class="judgment-panel" data-role="judgment-panel">
      <h3>Judgment</h3>
      <div data-role="metric-rows"></div>
      <label class="events-row">events ok/total
        <input type="number" min="0" data-role="events-ok">
        <input type="number" min="0" data-role="events-total">
      </label>
      <button type="button" data-role="prefill-judgment">Prefill from auto judgment</button>
      <button type="button" data-role="submit-judgment">Submit judgment</button>
      <p class="judgment-status" data-role="judgment-status"></p>
    </section>
    <pre class="report-view" data-role="report-view" hidden></pre>
    <button type="button" data-role="refresh-report">Show report</button>
  `;

  const caseSelect = root.querySelector<HTMLSelectElement>("[data-role=case-select]")!;
  const startButton = root.querySelector<HTMLButtonElement>("[data-role=start-case]")!;
  const caseMeta = root.querySelector<HTMLSpanElement>("[data-role=case-meta]")!;
  const questionView = root.querySelector<HTMLParagraphElement>("[data-role=question-view]")!;
  const main = root.querySelector<HTMLElement>("main")!;
  const metricRows = root.querySelector<HTMLDivElement>("[data-role=metric-rows]")!;
  const eventsOk = root.querySelector<HTMLInputElement>("[data-role=events-ok]")!;
  const eventsTotal = root.querySelector<HTMLInputElement>("[data-role=events-total]")!;
  const prefillButton = root.querySelector<HTMLButtonElement>("[data-role=prefill-judgment]")!;
  const submitButton = root.querySelector<HTMLButtonElement>("[data-role=submit-judgment]")!;
  const judgmentStatus = root.querySelector<HTMLParagraphElement>("[data-role=judgment-status]")!;
  const reportView = root.querySelector<HTMLPreElement>("[data-role=report-view]")!;
  const reportButton = root.querySelector<HTMLButtonElement>("[data-role=refresh-report]")!;

  const chat = createChatPane(doc);
  const tracePanel = createTracePanel(doc);
  main.append(chat.element, tracePanel.element);

  let cases: CaseView[] = [];
  let currentCase: CaseView | null = null;
  let sessionId: string | null = null;
  let turns: VisibleTurn[] = [];
  let values: MetricValues = emptyValues();

  function renderMetricRows(): void {
    metricRows.textContent = "";
    for (const metric of METRICS) {
      const rowElement = doc.createElement("div");
      rowElement.className = "metric-row";
      const name = doc.createElement("span");
      name.className = "metric-name";
      name.textContent = metric;
      const toggle = doc.createElement("button");
      toggle.type = "button";
      toggle.className = "metric-toggle";
      toggle.dataset.role = "metric-toggle";
      toggle.dataset.metric = metric;
      toggle.textContent = valueLabel(values[metric]);
      toggle.addEventListener("click", () => {
        values[metric] = cycleValue(values[metric]);
        toggle.textContent = valueLabel(values[metric]);
        saveDraft();
      });
      rowElement.append(name, toggle);
      metricRows.append(rowElement);
    }
  }

  function readEvents(): [number, number] | null {
    if (eventsOk.value === "" || eventsTotal.value === "") return null;
    return [Number(eventsOk.value), Number(eventsTotal.value)];
  }

  function writeEvents(events: [number, number] | null): void {
    eventsOk.value = events === null ? "" : String(events[0]);
    eventsTotal.value = events === null ? "" : String(events[1]);
  }

  function saveDraft(): void {
    if (currentCase === null) return;
    drafts.save(currentCase.case_id, {
      values,
      events: readEvents(),
      sessionId,
    });
  }

  function describe(error: unknown): string {
    if (error instanceof ApiError) {
      if (error.status === 502 && typeof error.detail === "object" && error.detail !== null) {
        const detail = error.detail as { stage?: string; error?: string };
        return `tutor turn failed in ${detail.stage ?? "?"}: ${detail.error ?? ""}; try again`;
      }
      return `request failed (${error.status}): ${error.message}`;
    }
    return String(error);
  }

  async function resyncFromServer(): Promise<void> {
    if (sessionId === null) return;
    const view = await client.getSession(sessionId);
    turns = view.turns;
    chat.setTurns(turns);
    chat.setFinished(view.finished);
  }

  const app: App = {
    element: root,

    async refreshCases() {
      cases = await client.listCases();
      caseSelect.textContent = "";
      for (const view of cases) {
        const option = doc.createElement("option");
        option.value = view.case_id;
        option.textContent = `${view.case_id} (${view.answer_kind})`;
        caseSelect.append(option);
      }
    },

    async startCase(caseId) {
      const view = cases.find((candidate) => candidate.case_id === caseId);
      if (view === undefined) {
        throw new Error(`unknown case ${caseId}`);
      }
      const started = await client.startSession({
        questionId: view.question_id,
        caseId: view.case_id,
      });
      currentCase = view;
      sessionId = started.session_id;
      turns = [];
      values = emptyValues();
      writeEvents(null);
      const draft = drafts.load(view.case_id);
      if (draft !== null) {
        values = draft.values;
        writeEvents(draft.events);
        judgmentStatus.textContent = "Draft restored.";
      } else {
        judgmentStatus.textContent = "";
      }
      renderMetricRows();
      caseMeta.textContent =
        `${view.case_id}: ${view.answer_kind} answer "${view.injected_answer}"`;
      const session = await client.getSession(started.session_id);
      questionView.textContent = session.question;
      chat.setTurns(turns);
      chat.setFinished(false);
      chat.clearNotice();
      chat.setSuggestions(view.scripted_student_turns);
      tracePanel.clear();
      reportView.hidden = true;
    },

    async sendMessage(text) {
      if (sessionId === null) return;
      chat.clearNotice();
      chat.setBusy(true);
      // Optimistic echo; a failed step rolls back server-side, so resync.
      turns = [...turns, { speaker: "Student", text }];
      chat.setTurns(turns);
      try {
        const reply = await client.sendMessage(sessionId, text);
        turns = [...turns, { speaker: "Tutorbot", text: reply.response }];
        chat.setTurns(turns);
        chat.setFinished(reply.finished);
      } catch (error) {
        chat.showNotice(describe(error));
        await resyncFromServer();
      } finally {
        chat.setBusy(false);
      }
    },

    async inspectTurn(tutorTurn) {
      if (sessionId === null) return;
      try {
        const trace = await client.getTrace(sessionId, tutorTurn);
        tracePanel.showTrace(tutorTurn, trace);
      } catch (error) {
        if (error instanceof ApiError && error.status === 403) {
          tracePanel.showDenied();
        } else {
          tracePanel.showError(describe(error));
        }
      }
    },

    async prefillJudgment() {
      if (sessionId === null) return;
      try {
        const judgment = await client.getAutoJudgment(sessionId);
        const prefill = prefillFromJudgment(judgment);
        values = prefill.values;
        writeEvents(prefill.events);
        renderMetricRows();
        saveDraft();
        judgmentStatus.textContent = "Prefilled from auto judgment.";
      } catch (error) {
        judgmentStatus.textContent = describe(error);
      }
    },

    async submitJudgment() {
      if (currentCase === null) return;
      try {
        const result = await client.submitJudgment({
          case_id: currentCase.case_id,
          labels: buildLabels(values),
          events: readEvents(),
        });
        drafts.clear(currentCase.case_id);
        judgmentStatus.textContent =
          `Submitted ${result.labels} labels for ${result.case_id}.`;
      } catch (error) {
        judgmentStatus.textContent = describe(error);
      }
    },

    async refreshReport() {
      const report = await client.getReport();
      reportView.textContent = report.formatted;
      reportView.hidden = false;
    },
  };

  startButton.addEventListener("click", () => {
    if (caseSelect.value) void app.startCase(caseSelect.value);
  });
  chat.onSend((text) => void app.sendMessage(text));
  chat.onInspect((tutorTurn) => void app.inspectTurn(tutorTurn));
  prefillButton.addEventListener("click", () => void app.prefillJudgment());
  submitButton.addEventListener("click", () => void app.submitJudgment());
  reportButton.addEventListener("click", () => void app.refreshReport());

  eventsOk.addEventListener("change", saveDraft);
  eventsTotal.addEventListener("change", saveDraft);

  renderMetricRows();
  return app;
}
