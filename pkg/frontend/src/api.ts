/** Typed client for the tutoring service; the only module that talks HTTP. */

import type {
  CaseView,
  JudgmentSubmission,
  JudgmentView,
  MessageReply,
  ReportView,
  SessionStart,
  SessionView,
  TraceView,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export interface StartSessionOptions {
  questionId?: string;
  caseId?: string;
  question?: string;
  detailedSolution?: string;
  solutionOutline?: string;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, token: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = token;
    const impl = fetchImpl ?? globalThis.fetch;
    if (!impl) {
      throw new Error("no fetch implementation available");
    }
    // Browsers reject fetch invoked with a detached `this`.
    this.fetchImpl = (input, init) => impl.call(globalThis, input, init);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body === undefined ? {} : { "Content-Type": "application/json" }),
      },
    };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let payload: unknown = null;
    const text = await response.text();
    if (text) {
      try {
        payload = JSON.parse(text);
      } catch {
        payload = text;
      }
    }
    if (!response.ok) {
      const detail =
        payload !== null && typeof payload === "object" && "detail" in payload
          ? (payload as { detail: unknown }).detail
          : payload ?? response.statusText;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  listCases(): Promise<CaseView[]> {
    return this.request("GET", "/cases");
  }

  startSession(options: StartSessionOptions): Promise<SessionStart> {
    return this.request("POST", "/sessions", {
      question_id: options.questionId ?? null,
      case_id: options.caseId ?? null,
      question: options.question ?? null,
      detailed_solution: options.detailedSolution ?? null,
      solution_outline: options.solutionOutline ?? null,
    });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  /** Tutor turns count from zero, matching the service's trace route. */
  getTrace(sessionId: string, turn: number): Promise<TraceView> {
    return this.request("GET", `/sessions/${sessionId}/trace/${turn}`);
  }

  getAutoJudgment(sessionId: string): Promise<JudgmentView> {
    return this.request("GET", `/sessions/${sessionId}/judgment`);
  }

  submitJudgment(submission: JudgmentSubmission): Promise<{ case_id: string; labels: number }> {
    return this.request("POST", "/judgments", submission);
  }

  getReport(): Promise<ReportView> {
    return this.request("GET", "/report");
  }
}
