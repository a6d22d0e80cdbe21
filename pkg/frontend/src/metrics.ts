/** Tri-state metric model: 1, 0, or n/a, mapped onto judgment labels. */

import type { JudgmentView, LabelItem } from "./types.js";

export const METRICS = [
  "python_usage_accuracy",
  "non_usage_of_python",
  "code_compilation",
  "calculation_verification",
] as const;

export type MetricName = (typeof METRICS)[number];

export type MetricValue = 0 | 1 | null;

export type MetricValues = Record<MetricName, MetricValue>;

export function emptyValues(): MetricValues {
  return {
    python_usage_accuracy: null,
    non_usage_of_python: null,
    code_compilation: null,
    calculation_verification: null,
  };
}

/** Click order: unset -> pass -> fail -> unset. */
export function cycleValue(value: MetricValue): MetricValue {
  if (value === null) return 1;
  if (value === 1) return 0;
  return null;
}

export function valueLabel(value: MetricValue): string {
  if (value === null) return "n/a";
  return String(value);
}

export function buildLabels(values: MetricValues): LabelItem[] {
  return METRICS.map((metric) => ({
    metric,
    value: values[metric],
    note: "",
  }));
}

/** Seed toggle state and events from the service's automatic judgment. */
export function prefillFromJudgment(judgment: JudgmentView): {
  values: MetricValues;
  events: [number, number];
} {
  const values = emptyValues();
  for (const metric of METRICS) {
    const entry = judgment.entries[metric];
    values[metric] = entry === null || entry === undefined ? null : (entry.value as 0 | 1);
  }
  return { values, events: judgment.compilation_events };
}
