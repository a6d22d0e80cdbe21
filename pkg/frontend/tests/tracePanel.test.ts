import { describe, expect, it } from "vitest";

import { createTracePanel } from "../src/tracePanel.js";
import type { TraceView } from "../src/types.js";

const TRACE: TraceView = {
  states: ["deciding", "use_python", "received_python"],
  decision: { use_python: true, description: "verify the claimed 19.6" },
  artifact: { code: "v = 9.8 * 2\nok = v == 19.6", result_variables: ["v", "ok"] },
  execution: { status: "ok", values: { v: 19.6, ok: true }, stderr: "" },
  turn: {
    thoughts: "planning-hidden: the check confirmed the claim",
    evaluation: "b",
    action: 3,
    step_number: "2",
    step_state: "r",
    response: "Nice, that matches my calculation.",
  },
  raw_texts: { deciding: "{}" },
  repair_attempts: 1,
};

describe("trace panel", () => {
  it("renders the full hidden record", () => {
    const panel = createTracePanel(document);
    panel.showTrace(0, TRACE);
    const text = panel.element.textContent!;
    expect(text).toContain("deciding -> use_python -> received_python");
    expect(text).toContain("verify the claimed 19.6");
    expect(text).toContain("v = 9.8 * 2");
    expect(text).toContain("v = 19.6");
    expect(text).toContain("planning-hidden");
    expect(text).toContain("b (action 3)");
    expect(text).toContain("repair attempts");
    expect(panel.element.querySelector("[data-role=trace-code]")!.textContent).toBe(
      TRACE.artifact!.code,
    );
  });

  it("renders the no-python path without code or execution rows", () => {
    const panel = createTracePanel(document);
    panel.showTrace(1, {
      ...TRACE,
      states: ["deciding", "no_python"],
      decision: { use_python: false, description: "" },
      artifact: null,
      execution: null,
    });
    expect(panel.element.textContent).toContain("no python needed");
    expect(panel.element.querySelector("[data-role=trace-code]")).toBeNull();
    expect(panel.element.querySelector("[data-role=trace-execution]")).toBeNull();
  });

  it("shows an access-denied state that keeps no hidden content", () => {
    const panel = createTracePanel(document);
    panel.showTrace(0, TRACE);
    panel.showDenied();
    expect(panel.element.classList.contains("trace-denied")).toBe(true);
    expect(panel.element.querySelector("[data-role=trace-denied]")).not.toBeNull();
    expect(panel.element.textContent).not.toContain("planning-hidden");
    expect(panel.element.textContent).not.toContain("9.8");
  });

  it("clears back to the empty state", () => {
    const panel = createTracePanel(document);
    panel.showTrace(0, TRACE);
    panel.clear();
    expect(panel.element.textContent).toContain("No turn inspected yet.");
    expect(panel.element.textContent).not.toContain("planning-hidden");
  });
});
