/** Wire types mirroring the tutoring service's JSON payloads, field for field. */

export interface VisibleTurn {
  speaker: string;
  text: string;
}

export interface Decision {
  use_python: boolean;
  description: string;
}

export interface CodeArtifact {
  code: string;
  result_variables: string[];
}

export interface Execution {
  status: string;
  values: Record<string, unknown>;
  stderr: string;
}

export interface TutorTurn {
  thoughts: string;
  evaluation: string;
  action: number;
  step_number: string;
  step_state: string;
  response: string;
}

export interface TraceView {
  states: string[];
  decision: Decision;
  artifact: CodeArtifact | null;
  execution: Execution | null;
  turn: TutorTurn;
  raw_texts: Record<string, string>;
  repair_attempts: number;
}

export interface SessionStart {
  session_id: string;
  question_id: string;
  created_at: number;
  finished: boolean;
}

export interface MessageReply {
  response: string;
  step_state: string;
  finished: boolean;
}

export interface SessionView {
  session_id: string;
  question_id: string;
  question: string;
  case_id: string | null;
  finished: boolean;
  turns: VisibleTurn[];
}

export interface CaseView {
  case_id: string;
  question_id: string;
  injected_answer: string;
  answer_kind: string;
  scripted_student_turns: string[];
}

export interface MetricEntryView {
  value: number;
  source: string;
  note: string;
}

export interface JudgmentView {
  case_id: string;
  entries: Record<string, MetricEntryView | null>;
  compilation_events: [number, number];
}

export interface ReportView {
  means: Record<string, number>;
  numerators: Record<string, number>;
  denominators: Record<string, number>;
  case_count: number;
  formatted: string;
}

export interface LabelItem {
  metric: string;
  value: number | null;
  note: string;
}

export interface JudgmentSubmission {
  case_id: string;
  labels: LabelItem[];
  events: [number, number] | null;
}
