import { beforeEach, describe, expect, it } from "vitest";

import { DraftStore } from "../src/drafts.js";
import { emptyValues } from "../src/metrics.js";

describe("DraftStore", () => {
  beforeEach(() => {
    window.localStorage.clear();
  });

  it("round-trips a draft per case id", () => {
    const store = new DraftStore(window.localStorage);
    const values = emptyValues();
    values.code_compilation = 1;
    store.save("q01-correct", { values, events: [2, 2], sessionId: "s1" });

    const loaded = store.load("q01-correct");
    expect(loaded).not.toBeNull();
    expect(loaded!.values.code_compilation).toBe(1);
    expect(loaded!.values.python_usage_accuracy).toBeNull();
    expect(loaded!.events).toEqual([2, 2]);
    expect(loaded!.sessionId).toBe("s1");
    expect(store.load("q01-incorrect")).toBeNull();
  });

  it("clears drafts after submission", () => {
    const store = new DraftStore(window.localStorage);
    store.save("q01-correct", { values: emptyValues(), events: null, sessionId: null });
    store.clear("q01-correct");
    expect(store.load("q01-correct")).toBeNull();
  });

  it("discards corrupt drafts instead of failing", () => {
    window.localStorage.setItem("sme-ui:draft:q01-correct", "{not json");
    const store = new DraftStore(window.localStorage);
    expect(store.load("q01-correct")).toBeNull();
    expect(window.localStorage.getItem("sme-ui:draft:q01-correct")).toBeNull();
  });

  it("fills missing fields from older drafts with defaults", () => {
    window.localStorage.setItem(
      "sme-ui:draft:q01-correct",
      JSON.stringify({ values: { python_usage_accuracy: 0 } }),
    );
    const store = new DraftStore(window.localStorage);
    const loaded = store.load("q01-correct");
    expect(loaded!.values.python_usage_accuracy).toBe(0);
    expect(loaded!.values.calculation_verification).toBeNull();
    expect(loaded!.events).toBeNull();
  });
});
