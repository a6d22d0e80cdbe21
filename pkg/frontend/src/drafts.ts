/** Judgment drafts persisted per case so an interrupted review survives reload. */

import type { MetricValues } from "./metrics.js";
import { emptyValues } from "./metrics.js";

export interface JudgmentDraft {
  values: MetricValues;
  events: [number, number] | null;
  sessionId: string | null;
}

const PREFIX = "sme-ui:draft:";

export class DraftStore {
  private readonly storage: Storage;

  constructor(storage?: Storage) {
    this.storage = storage ?? globalThis.localStorage;
  }

  save(caseId: string, draft: JudgmentDraft): void {
    this.storage.setItem(PREFIX + caseId, JSON.stringify(draft));
  }

  load(caseId: string): JudgmentDraft | null {
    const raw = this.storage.getItem(PREFIX + caseId);
    if (raw === null) return null;
    try {
      const parsed = JSON.parse(raw) as Partial<JudgmentDraft>;
      return {
        values: { ...emptyValues(), ...(parsed.values ?? {}) },
        events: parsed.events ?? null,
        sessionId: parsed.sessionId ?? null,
      };
    } catch {
      // A corrupt draft is worth less than a clean slate.
      this.storage.removeItem(PREFIX + caseId);
      return null;
    }
  }

  clear(caseId: string): void {
    this.storage.removeItem(PREFIX + caseId);
  }
}
