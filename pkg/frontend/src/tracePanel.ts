/** Trace panel: the only view that renders hidden per-turn material.

Shows the state chain, the use-python decision, generated code, execution
outcome, and the tutor's private evaluation fields. Under a student token
the service answers 403 and the panel falls back to an access-denied state.
*/

import type { TraceView } from "./types.js";

export interface TracePanel {
  element: HTMLElement;
  showTrace(tutorTurn: number, trace: TraceView): void;
  showDenied(): void;
  showError(message: string): void;
  clear(): void;
}

export function createTracePanel(doc: Document): TracePanel {
  const element = doc.createElement("aside");
  element.className = "trace-panel";
  element.dataset.role = "trace-panel";
  clearInto(element, "No turn inspected yet.");

  function clearInto(target: HTMLElement, message: string): void {
    target.textContent = "";
    const empty = doc.createElement("p");
    empty.className = "trace-empty";
    empty.textContent = message;
    target.append(empty);
  }

  function row(label: string, value: string, role?: string): HTMLElement {
    const wrapper = doc.createElement("div");
    wrapper.className = "trace-row";
    const key = doc.createElement("span");
    key.className = "trace-label";
    key.textContent = label;
    const text = doc.createElement("span");
    text.className = "trace-value";
    if (role) text.dataset.role = role;
    text.textContent = value;
    wrapper.append(key, text);
    return wrapper;
  }

  return {
    element,
    showTrace(tutorTurn, trace) {
      element.textContent = "";
      element.classList.remove("trace-denied");

      const heading = doc.createElement("h3");
      heading.textContent = `Hidden record for tutor turn ${tutorTurn}`;
      element.append(heading);

      element.append(row("states", trace.states.join(" -> "), "trace-states"));
      element.append(
        row(
          "decision",
          trace.decision.use_python
            ? `use python: ${trace.decision.description}`
            : "no python needed",
          "trace-decision",
        ),
      );

      if (trace.artifact !== null) {
        const code = doc.createElement("pre");
        code.className = "trace-code";
        code.dataset.role = "trace-code";
        code.textContent = trace.artifact.code;
        element.append(code);
        element.append(
          row("result variables", trace.artifact.result_variables.join(", ")),
        );
      }
      if (trace.execution !== null) {
        element.append(row("execution", trace.execution.status, "trace-execution"));
        const values = Object.entries(trace.execution.values)
          .map(([name, value]) => `${name} = ${String(value)}`)
          .join(", ");
        if (values) element.append(row("values", values, "trace-values"));
        if (trace.execution.stderr) {
          element.append(row("stderr", trace.execution.stderr));
        }
      }

      element.append(row("thoughts", trace.turn.thoughts, "trace-thoughts"));
      element.append(
        row(
          "evaluation",
          `${trace.turn.evaluation} (action ${trace.turn.action})`,
          "trace-evaluation",
        ),
      );
      element.append(
        row("step", `${trace.turn.step_number} (state ${trace.turn.step_state})`),
      );
      element.append(row("repair attempts", String(trace.repair_attempts)));
    },
    showDenied() {
      element.textContent = "";
      element.classList.add("trace-denied");
      const message = doc.createElement("p");
      message.className = "trace-denied-message";
      message.dataset.role = "trace-denied";
      message.textContent =
        "Trace access denied: this token has student access only. " +
        "Chat continues to work; configure an inspector token to see hidden records.";
      element.append(message);
    },
    showError(message) {
      element.textContent = "";
      element.classList.remove("trace-denied");
      const error = doc.createElement("p");
      error.className = "trace-error";
      error.dataset.role = "trace-error";
      error.textContent = message;
      element.append(error);
    },
    clear() {
      element.classList.remove("trace-denied");
      clearInto(element, "No turn inspected yet.");
    },
  };
}
