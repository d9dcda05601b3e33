import { ApiError, type Client } from "./client.js";
import { ResultsPoller } from "./poller.js";
import { resultsHtml, rulesTableHtml, servicesHtml } from "./render.js";
import {
  applyPlan,
  parseRulesBuffer,
  planRuleChanges,
  renderRulesBuffer,
} from "./rulesDiff.js";
import type { RuleRow } from "./types.js";

export interface AppElements {
  rulesBuffer: HTMLTextAreaElement;
  rulesStatus: HTMLElement;
  rulesTable: HTMLElement;
  servicesPanel: HTMLElement;
  resultsPanel: HTMLElement;
  subtasksInput: HTMLInputElement;
  applyButton: HTMLButtonElement;
  startButton: HTMLButtonElement;
  reloadButton: HTMLButtonElement;
  whatIfProvider: HTMLInputElement;
  whatIfMetric: HTMLInputElement;
  whatIfOffer: HTMLInputElement;
  whatIfParam: HTMLInputElement;
  whatIfValue: HTMLInputElement;
  injectMetricButton: HTMLButtonElement;
  injectParamButton: HTMLButtonElement;
  whatIfStatus: HTMLElement;
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

/** Glue between the DOM and the controllers; all logic lives in those. */
export class App {
  readonly poller: ResultsPoller;
  private activeRules: RuleRow[] = [];

  constructor(
    private readonly client: Client,
    private readonly els: AppElements,
    intervalMs = 5000,
  ) {
    this.poller = new ResultsPoller(client, intervalMs);
  }

  async refreshRules(keepBuffer = false): Promise<void> {
    this.activeRules = await this.client.rules();
    this.els.rulesTable.innerHTML = rulesTableHtml(this.activeRules);
    if (!keepBuffer) {
      this.els.rulesBuffer.value = renderRulesBuffer(this.activeRules);
    }
  }

  async refreshServices(): Promise<void> {
    this.els.servicesPanel.innerHTML = servicesHtml(await this.client.services());
  }

  renderResults(): void {
    this.els.resultsPanel.innerHTML = resultsHtml(this.poller.state);
  }

  async applyBuffer(): Promise<void> {
    let seq: number | null = null;
    try {
      const drafts = parseRulesBuffer(this.els.rulesBuffer.value);
      const plan = planRuleChanges(this.activeRules, drafts);
      if (plan.length === 0) {
        this.els.rulesStatus.textContent = "no changes";
        return;
      }
      seq = await applyPlan(this.client, plan);
      this.els.rulesStatus.textContent = `applied ${plan.length} change(s), seq=${seq}`;
    } catch (err) {
      this.els.rulesStatus.textContent = describe(err);
      return;
    }
    this.poller.noteSeq(seq);
    this.renderResults(); // show the stale flag right away
    await this.refreshRules();
    await this.poller.poll();
    this.renderResults();
  }

  async startRun(): Promise<void> {
    const subtasks = this.els.subtasksInput.value
      .split(",")
      .map((s) => s.trim())
      .filter((s) => s !== "");
    if (subtasks.length === 0) {
      this.els.resultsPanel.innerHTML = `<p class="empty">name at least one subtask</p>`;
      return;
    }
    try {
      await this.poller.start(subtasks);
    } catch (err) {
      this.els.resultsPanel.innerHTML = `<span class="badge dead">${describe(err)}</span>`;
      return;
    }
    this.renderResults();
  }

  private async inject(kind: "metric" | "parameter"): Promise<void> {
    const provider = this.els.whatIfProvider.value.trim();
    try {
      const accepted =
        kind === "metric"
          ? await this.client.injectEvent({
              kind: "MetricChanged",
              provider_id: provider,
              metric: Number(this.els.whatIfMetric.value),
            })
          : await this.client.injectEvent({
              kind: "ParameterChanged",
              provider_id: provider,
              offer_index: Number(this.els.whatIfOffer.value),
              parameter: this.els.whatIfParam.value.trim().toLowerCase(),
              value: this.els.whatIfValue.value.trim(),
            });
      const summary = accepted.outcomes
        .map((o) => `${o.subtask_id}:${o.kind}`)
        .join(" ");
      this.els.whatIfStatus.textContent =
        `seq=${accepted.seq}` + (summary ? ` ${summary}` : " (no live session)");
      this.poller.noteSeq(accepted.seq);
    } catch (err) {
      this.els.whatIfStatus.textContent = describe(err);
      return;
    }
    this.renderResults();
    await this.refreshServices();
    await this.poller.poll();
    this.renderResults();
  }

  wire(): void {
    this.els.applyButton.addEventListener("click", () => void this.applyBuffer());
    this.els.startButton.addEventListener("click", () => void this.startRun());
    this.els.reloadButton.addEventListener("click", () => void this.refreshRules());
    this.els.injectMetricButton.addEventListener("click", () => void this.inject("metric"));
    this.els.injectParamButton.addEventListener("click", () => void this.inject("parameter"));
    this.poller.attach((fn, ms) => {
      return window.setInterval(() => {
        fn();
        this.renderResults();
      }, ms);
    });
  }

  async boot(): Promise<void> {
    await this.refreshRules();
    await this.refreshServices();
    this.renderResults();
  }
}
