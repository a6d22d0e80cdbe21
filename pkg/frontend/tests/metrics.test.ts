import { describe, expect, it } from "vitest";

import {
  METRICS,
  buildLabels,
  cycleValue,
  emptyValues,
  prefillFromJudgment,
  valueLabel,
} from "../src/metrics.js";

describe("metric toggles", () => {
  it("keeps the four metrics in report order", () => {
    expect(METRICS).toEqual([
      "python_usage_accuracy",
      "non_usage_of_python",
      "code_compilation",
      "calculation_verification",
    ]);
  });

  it("cycles unset -> pass -> fail -> unset", () => {
    expect(cycleValue(null)).toBe(1);
    expect(cycleValue(1)).toBe(0);
    expect(cycleValue(0)).toBeNull();
  });

  it("labels each state distinctly", () => {
    expect(valueLabel(null)).toBe("n/a");
    expect(valueLabel(1)).toBe("1");
    expect(valueLabel(0)).toBe("0");
  });

  it("builds one label per metric, null included", () => {
    const values = emptyValues();
    values.python_usage_accuracy = 1;
    values.calculation_verification = 0;
    const labels = buildLabels(values);
    expect(labels.map((label) => label.metric)).toEqual([...METRICS]);
    expect(labels[0]).toEqual({ metric: "python_usage_accuracy", value: 1, note: "" });
    expect(labels[1]!.value).toBeNull();
    expect(labels[3]!.value).toBe(0);
  });

  it("prefills from an auto judgment, mapping missing entries to n/a", () => {
    const prefill = prefillFromJudgment({
      case_id: "q01-correct",
      entries: {
        python_usage_accuracy: { value: 1, source: "auto", note: "" },
        non_usage_of_python: null,
        code_compilation: { value: 1, source: "auto", note: "" },
        calculation_verification: { value: 0, source: "auto", note: "" },
      },
      compilation_events: [2, 3],
    });
    expect(prefill.values).toEqual({
      python_usage_accuracy: 1,
      non_usage_of_python: null,
      code_compilation: 1,
      calculation_verification: 0,
    });
    expect(prefill.events).toEqual([2, 3]);
  });
});
