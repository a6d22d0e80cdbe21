/** End-to-end reviewer flow against a real service process.

Boots the tutoring service on a deterministic simulated model, then drives
the actual UI modules through one correct and one incorrect case: chat to
completion, inspect a hidden record, toggle metrics, submit. The judgments
journal and the service report must both match numbers computed by hand
here.
*/

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { createApp, type App } from "../src/app.js";
import { DraftStore } from "../src/drafts.js";
import type { MetricName, MetricValue } from "../src/metrics.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const STUDENT_TOKEN = "ui-student";
const INSPECTOR_TOKEN = "ui-inspector";
const CORRECT_TEXT = "I worked through it and my answer is 19.6 m/s.";
const INCORRECT_TEXT = "I worked through it and my answer is 12.3 m/s.";

const QUESTION_RECORD = {
  id: "q01",
  question: "A stone is dropped from rest. What is its speed after 2 s?",
  sme_solution: "v = g t = 19.6 m/s",
  topic: "kinematics",
  enriched: {
    detailed_solution:
      "Step 1) Identify the knowns: u = 0, g = 9.8 m/s^2, t = 2 s. " +
      "Step 2) Apply v = u + g t. " +
      "Step 3) Compute v = 0 + 9.8 * 2 = 19.6 m/s.",
    solution_outline: "Step 1) List knowns. Step 2) Pick v = u + g t. Step 3) Evaluate.",
  },
};

const CASE_RECORDS = [
  {
    case_id: "q01-correct",
    question_id: "q01",
    injected_answer: "19.6 m/s",
    answer_kind: "correct",
    scripted_student_turns: [CORRECT_TEXT],
  },
  {
    case_id: "q01-incorrect",
    question_id: "q01",
    injected_answer: "12.3 m/s",
    answer_kind: "incorrect",
    scripted_student_turns: [INCORRECT_TEXT],
  },
];

let server: ChildProcess;
let serverLog = "";
let judgmentsPath: string;

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "sme-ui-"));
  const questionsPath = join(dir, "questions.jsonl");
  const casesPath = join(dir, "cases.jsonl");
  judgmentsPath = join(dir, "judgments.jsonl");
  await writeFile(questionsPath, JSON.stringify(QUESTION_RECORD) + "\n");
  await writeFile(
    casesPath,
    CASE_RECORDS.map((record) => JSON.stringify(record)).join("\n") + "\n",
  );

  server = spawn(
    "soliloquy",
    [
      "serve",
      "--port", String(PORT),
      "--questions", questionsPath,
      "--cases", casesPath,
      "--judgments", judgmentsPath,
      "--journal", join(dir, "journal.jsonl"),
      "--backend", "sim",
      "--seed", "0",
    ],
    {
      env: {
        ...process.env,
        SOLILOQUY_STUDENT_TOKEN: STUDENT_TOKEN,
        SOLILOQUY_INSPECTOR_TOKEN: INSPECTOR_TOKEN,
      },
    },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));

  for (let attempt = 0; attempt < 120; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // Server still booting.
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`service never became healthy:\n${serverLog}`);
}, 60000);

afterAll(() => {
  server?.kill();
});

function mountApp(token: string): { app: App; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.append(root);
  const client = new ApiClient(BASE, token, (input, init) => fetch(input, init));
  const app = createApp(root, { client, drafts: new DraftStore(window.localStorage) });
  return { app, root };
}

/** Click the tri-state toggle until it shows the wanted value. */
function setToggle(root: HTMLElement, metric: MetricName, value: MetricValue): void {
  const wanted = value === null ? "n/a" : String(value);
  const toggle = root.querySelector<HTMLButtonElement>(
    `[data-role=metric-toggle][data-metric=${metric}]`,
  )!;
  for (let clicks = 0; clicks < 3 && toggle.textContent !== wanted; clicks += 1) {
    toggle.click();
  }
  expect(toggle.textContent).toBe(wanted);
}

function setEvents(root: HTMLElement, ok: number, total: number): void {
  const okInput = root.querySelector<HTMLInputElement>("[data-role=events-ok]")!;
  const totalInput = root.querySelector<HTMLInputElement>("[data-role=events-total]")!;
  okInput.value = String(ok);
  totalInput.value = String(total);
  okInput.dispatchEvent(new Event("change"));
  totalInput.dispatchEvent(new Event("change"));
}

interface JournalLine {
  case_id: string;
  metric: string;
  value: number | null;
  events?: { ok: number; total: number };
}

describe("reviewer flow against the live service", () => {
  it(
    "runs one correct and one incorrect case; journal and report match hand computation",
    { timeout: 120000 },
    async () => {
      const { app, root } = mountApp(INSPECTOR_TOKEN);
      await app.refreshCases();
      const select = root.querySelector<HTMLSelectElement>("[data-role=case-select]")!;
      expect([...select.options].map((option) => option.value).sort()).toEqual([
        "q01-correct",
        "q01-incorrect",
      ]);

      // Correct case: the simulated tutor closes after the third verified reply.
      await app.startCase("q01-correct");
      for (let turn = 0; turn < 3; turn += 1) {
        await app.sendMessage(CORRECT_TEXT);
      }
      const chatPane = root.querySelector(".chat-pane")!;
      const finishedBanner = chatPane.querySelector<HTMLParagraphElement>(
        "[data-role=chat-finished]",
      )!;
      expect(finishedBanner.hidden).toBe(false);

      // The hidden record is reachable with the inspector token and stays
      // out of the chat pane.
      await app.inspectTurn(2);
      const tracePane = root.querySelector("[data-role=trace-panel]")!;
      expect(tracePane.textContent).toContain("deciding -> use_python -> received_python");
      expect(tracePane.textContent).toContain("verdict-hidden");
      expect(chatPane.textContent).not.toContain("verdict-hidden");

      // Accept the automatic compilation prefill, then record a full pass.
      await app.prefillJudgment();
      const okInput = root.querySelector<HTMLInputElement>("[data-role=events-ok]")!;
      const totalInput = root.querySelector<HTMLInputElement>("[data-role=events-total]")!;
      expect(okInput.value).toBe(totalInput.value);
      const correctEvents = Number(okInput.value);
      expect(correctEvents).toBeGreaterThan(0);
      setEvents(root, 1, 1);
      setToggle(root, "python_usage_accuracy", 1);
      setToggle(root, "non_usage_of_python", 1);
      setToggle(root, "code_compilation", 1);
      setToggle(root, "calculation_verification", 1);
      await app.submitJudgment();
      expect(
        root.querySelector("[data-role=judgment-status]")!.textContent,
      ).toContain("Submitted 4 labels for q01-correct");

      // Incorrect case: one exchange is enough to judge the refutation.
      await app.startCase("q01-incorrect");
      await app.sendMessage(INCORRECT_TEXT);
      expect(root.querySelector(".chat-pane")!.textContent).toContain("Not quite");
      setEvents(root, 1, 2);
      setToggle(root, "python_usage_accuracy", 1);
      setToggle(root, "non_usage_of_python", 1);
      setToggle(root, "code_compilation", 0);
      setToggle(root, "calculation_verification", 0);
      await app.submitJudgment();
      expect(
        root.querySelector("[data-role=judgment-status]")!.textContent,
      ).toContain("Submitted 4 labels for q01-incorrect");

      // The journal now holds entries for exactly the two reviewed cases,
      // with one value per metric after last-wins replay.
      const lines: JournalLine[] = readFileSync(judgmentsPath, "utf-8")
        .split("\n")
        .filter((line) => line.trim())
        .map((line) => JSON.parse(line));
      const byCase = new Map<string, Map<string, JournalLine>>();
      for (const line of lines) {
        if (!byCase.has(line.case_id)) byCase.set(line.case_id, new Map());
        byCase.get(line.case_id)!.set(line.metric, line);
      }
      expect([...byCase.keys()].sort()).toEqual(["q01-correct", "q01-incorrect"]);
      for (const metrics of byCase.values()) {
        expect(metrics.size).toBe(4);
      }
      expect(
        byCase.get("q01-correct")!.get("calculation_verification")!.value,
      ).toBe(1);
      expect(
        byCase.get("q01-incorrect")!.get("calculation_verification")!.value,
      ).toBe(0);

      // Hand computation: usage 2/2, non-usage 2/2, compilation events
      // (1+1)/(1+2) = 2/3, verification 1/2.
      const client = new ApiClient(BASE, INSPECTOR_TOKEN, (input, init) =>
        fetch(input, init),
      );
      const report = await client.getReport();
      expect(report.case_count).toBe(2);
      expect(report.numerators["python_usage_accuracy"]).toBe(2);
      expect(report.denominators["python_usage_accuracy"]).toBe(2);
      expect(report.numerators["non_usage_of_python"]).toBe(2);
      expect(report.denominators["non_usage_of_python"]).toBe(2);
      expect(report.numerators["code_compilation"]).toBe(2);
      expect(report.denominators["code_compilation"]).toBe(3);
      expect(report.numerators["calculation_verification"]).toBe(1);
      expect(report.denominators["calculation_verification"]).toBe(2);
      expect(report.means["python_usage_accuracy"]).toBe(1);
      expect(report.means["code_compilation"]).toBeCloseTo(2 / 3, 12);
      expect(report.formatted.split("\n").at(-1)).toBe("1.0 / 1.0 / 0.67 / 0.5");

      // The report also renders through the UI.
      await app.refreshReport();
      expect(root.querySelector("[data-role=report-view]")!.textContent).toContain(
        "1.0 / 1.0 / 0.67 / 0.5",
      );
    },
  );

  it(
    "hides the trace panel under a student token while chat keeps working",
    { timeout: 60000 },
    async () => {
      const { app, root } = mountApp(STUDENT_TOKEN);
      await app.refreshCases();
      await app.startCase("q01-correct");
      await app.sendMessage("Hello, I would like to work on this.");

      await app.inspectTurn(0);
      const tracePane = root.querySelector("[data-role=trace-panel]")!;
      expect(tracePane.querySelector("[data-role=trace-denied]")).not.toBeNull();
      expect(tracePane.textContent).toContain("student access only");
      expect(tracePane.textContent).not.toContain("verdict-hidden");

      await app.sendMessage("So how should I start?");
      expect(root.querySelector("[data-role=chat-log]")!.textContent).toContain(
        "So how should I start?",
      );
    },
  );
});
