// Wire shapes for the selection engine HTTP API.  Field names follow the
// server's JSON exactly; anything optional on the wire is optional here.

export type RuleKind = "AT_MOST" | "AT_LEAST" | "EQUALS";

export type RunMode = "DryRun" | "Auto";

export interface RuleRow {
  rule_id: string;
  subtask_id: string;
  parameter: string;
  kind: RuleKind;
  border: string | number;
  seq: number;
}

export interface OfferView {
  offer_index: number;
  values: Record<string, string | number>;
}

export interface ServiceView {
  provider_id: string;
  task_id: string;
  address: string;
  port: number;
  metric: number;
  par_list: string[];
  offers: OfferView[];
}

export interface ResultRow {
  subtask_id: string;
  feasible: boolean;
  epoch: number;
  seq: number;
  provider_id: string | null;
  offer_index: number | null;
  total_cost: number | null;
  path: string[];
  solved_at: number | null;
}

export interface RunResults {
  run_id: string;
  status: string;
  mode: string;
  seq: number;
  results: ResultRow[];
}

export interface HealthView {
  status: string;
  seq: number;
}

export interface RunStarted {
  run_id: string;
  status: string;
  seq: number;
}

export interface EventOutcome {
  subtask_id: string;
  kind: string;
  reopened: string[];
  invalidated_solution: boolean;
}

export interface EventAccepted {
  seq: number;
  outcomes: EventOutcome[];
}

// what-if drift: only the two service-side kinds go over the wire
export interface ParameterChangeEvent {
  kind: "ParameterChanged";
  provider_id: string;
  offer_index: number;
  parameter: string;
  value: string | number;
  task_id?: string;
}

export interface MetricChangeEvent {
  kind: "MetricChanged";
  provider_id: string;
  metric: number;
}

export type DriftEvent = ParameterChangeEvent | MetricChangeEvent;

export interface RuleDraft {
  subtask_id: string;
  parameter: string;
  kind: RuleKind;
  border: string | number;
}
