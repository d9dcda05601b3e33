import type { PanelState } from "./poller.js";
import type { RuleRow, ServiceView } from "./types.js";

function esc(s: unknown): string {
  return String(s)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// metric 1 is nominal, 0 means the provider is out of the game entirely,
// anything in between is running degraded
export function metricBadge(metric: number): "ok" | "degraded" | "dead" {
  if (metric <= 0) return "dead";
  if (metric < 1) return "degraded";
  return "ok";
}

export function formatTotal(total: number | null): string {
  return total === null ? "infeasible" : total.toFixed(9);
}

export function servicesHtml(services: ServiceView[]): string {
  if (services.length === 0) {
    return `<p class="empty">no services registered</p>`;
  }
  const rows: string[] = [];
  for (const svc of services) {
    const badge = metricBadge(svc.metric);
    for (const offer of svc.offers) {
      const values = svc.par_list
        .map((p) => `${esc(p)}=${esc(offer.values[p] ?? "")}`)
        .join(" ");
      rows.push(
        `<tr><td>${esc(svc.provider_id)}</td><td>${esc(svc.task_id)}</td>` +
          `<td>${esc(svc.address)}:${esc(svc.port)}</td>` +
          `<td><span class="badge ${badge}">${esc(svc.metric)}</span></td>` +
          `<td>${offer.offer_index}</td><td class="mono">${values}</td></tr>`,
      );
    }
  }
  return (
    `<table><thead><tr><th>provider</th><th>task</th><th>endpoint</th>` +
    `<th>metric</th><th>offer</th><th>values</th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}

export function rulesTableHtml(rules: RuleRow[]): string {
  if (rules.length === 0) return `<p class="empty">no active rules</p>`;
  const rows = rules
    .map(
      (r) =>
        `<tr><td>${esc(r.rule_id)}</td><td>${esc(r.subtask_id)}</td>` +
        `<td>${esc(r.parameter)}</td><td>${esc(r.kind)}</td>` +
        `<td>${esc(r.border)}</td><td>${r.seq}</td></tr>`,
    )
    .join("");
  return (
    `<table><thead><tr><th>id</th><th>subtask</th><th>parameter</th>` +
    `<th>kind</th><th>border</th><th>seq</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function resultsHtml(state: PanelState): string {
  const parts: string[] = [];
  if (state.stale) {
    parts.push(
      `<span class="badge stale">stale: results are from seq ` +
        `${state.run ? state.run.seq : "?"} but the engine is at ${state.latestSeq}</span>`,
    );
  }
  if (state.error !== null) {
    parts.push(`<span class="badge dead">${esc(state.error)}</span>`);
  }
  if (state.run === null) {
    parts.push(`<p class="empty">no run yet</p>`);
    return parts.join("");
  }
  const run = state.run;
  parts.push(
    `<p class="runline">run <b>${esc(run.run_id)}</b> status=${esc(run.status)} ` +
      `mode=${esc(run.mode)} seq=${run.seq}</p>`,
  );
  const rows = run.results
    .map((row) => {
      const selection = row.feasible
        ? `${esc(row.provider_id)} / offer ${row.offer_index}`
        : `<span class="badge dead">none</span>`;
      return (
        `<tr><td>${esc(row.subtask_id)}</td><td>${selection}</td>` +
        `<td class="mono">${formatTotal(row.total_cost)}</td>` +
        `<td class="mono">${row.path.map(esc).join("-&gt;")}</td>` +
        `<td>${row.epoch}</td><td>${row.seq}</td></tr>`
      );
    })
    .join("");
  parts.push(
    `<table><thead><tr><th>subtask</th><th>selection</th><th>total</th>` +
      `<th>path</th><th>epoch</th><th>seq</th></tr></thead><tbody>${rows}</tbody></table>`,
  );
  return parts.join("");
}

export { esc };
