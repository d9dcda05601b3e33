import type {
  DriftEvent,
  EventAccepted,
  HealthView,
  RuleDraft,
  RuleRow,
  RunMode,
  RunResults,
  RunStarted,
  ServiceView,
} from "./types.js";

// Every path the console is allowed to touch.  The client builds requests
// only through the helpers below, and the audit test in tests/ checks each
// recorded call against this table, so an undocumented endpoint cannot
// sneak in without failing the build.
export const DOCUMENTED_ENDPOINTS: ReadonlyArray<{ method: string; pattern: RegExp }> = [
  { method: "GET", pattern: /^\/health$/ },
  { method: "GET", pattern: /^\/services$/ },
  { method: "GET", pattern: /^\/rules$/ },
  { method: "POST", pattern: /^\/rules$/ },
  { method: "PUT", pattern: /^\/rules\/[^/]+$/ },
  { method: "DELETE", pattern: /^\/rules\/[^/]+$/ },
  { method: "POST", pattern: /^\/run$/ },
  { method: "GET", pattern: /^\/runs\/[^/]+\/results$/ },
  { method: "POST", pattern: /^\/events$/ },
  { method: "POST", pattern: /^\/solve$/ },
];

export function isDocumented(method: string, path: string): boolean {
  const bare = path.split("?")[0];
  return DOCUMENTED_ENDPOINTS.some(
    (e) => e.method === method && e.pattern.test(bare),
  );
}

export interface TransportReply {
  status: number;
  body: unknown;
}

export type Transport = (
  method: string,
  path: string,
  body?: unknown,
) => Promise<TransportReply>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

function messageOf(body: unknown): string {
  if (body && typeof body === "object") {
    const rec = body as Record<string, unknown>;
    if (typeof rec.detail === "string") return rec.detail;
    if (typeof rec.error === "string") return rec.error;
  }
  return JSON.stringify(body);
}

/** Typed calls over an injected transport; throws ApiError on any 4xx/5xx. */
export class Client {
  constructor(private readonly transport: Transport) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const reply = await this.transport(method, path, body);
    if (reply.status >= 400) {
      throw new ApiError(reply.status, messageOf(reply.body));
    }
    return reply.body as T;
  }

  health(): Promise<HealthView> {
    return this.call("GET", "/health");
  }

  async services(): Promise<ServiceView[]> {
    const env = await this.call<{ seq: number; services: ServiceView[] }>(
      "GET", "/services",
    );
    return env.services;
  }

  async rules(): Promise<RuleRow[]> {
    const env = await this.call<{ seq: number; rules: RuleRow[] }>("GET", "/rules");
    return env.rules;
  }

  addRule(draft: RuleDraft): Promise<RuleRow> {
    return this.call("POST", "/rules", draft);
  }

  modifyRule(ruleId: string, border: string | number): Promise<RuleRow> {
    return this.call("PUT", `/rules/${encodeURIComponent(ruleId)}`, { border });
  }

  deleteRule(ruleId: string): Promise<{ seq: number; rule_id: string }> {
    return this.call("DELETE", `/rules/${encodeURIComponent(ruleId)}`);
  }

  startRun(subtasks: string[], mode: RunMode = "DryRun"): Promise<RunStarted> {
    return this.call("POST", "/run", { subtasks, mode });
  }

  results(runId: string): Promise<RunResults> {
    return this.call("GET", `/runs/${encodeURIComponent(runId)}/results`);
  }

  injectEvent(event: DriftEvent): Promise<EventAccepted> {
    return this.call("POST", "/events", event);
  }
}

/**
 * Browser transport.  Plain XMLHttpRequest so the console runs from any
 * static file mount with zero dependencies; resolves with whatever status
 * the server sent and leaves retry policy to the caller.
 */
export function xhrTransport(base = ""): Transport {
  return (method, path, body) =>
    new Promise<TransportReply>((resolve, reject) => {
      const xhr = new XMLHttpRequest();
      xhr.open(method, base + path, true);
      xhr.onreadystatechange = () => {
        if (xhr.readyState !== 4) return;
        if (xhr.status === 0) {
          reject(new Error(`no reply from ${path}`));
          return;
        }
        let parsed: unknown = null;
        try {
          parsed = xhr.responseText ? JSON.parse(xhr.responseText) : null;
        } catch {
          parsed = { error: xhr.responseText };
        }
        resolve({ status: xhr.status, body: parsed });
      };
      xhr.onerror = () => reject(new Error(`request failed: ${method} ${path}`));
      if (body !== undefined) {
        xhr.setRequestHeader("Content-Type", "application/json");
        xhr.send(JSON.stringify(body));
      } else {
        xhr.send();
      }
    });
}

/** fetch-based transport for node tests and anywhere XHR is missing. */
export function fetchTransport(base: string): Transport {
  return async (method, path, body) => {
    const reply = await fetch(base + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await reply.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = { error: text };
    }
    return { status: reply.status, body: parsed };
  };
}

/** Wraps a transport, recording method+path of every call it forwards. */
export function recordingTransport(
  inner: Transport,
  log: Array<{ method: string; path: string }>,
): Transport {
  return (method, path, body) => {
    log.push({ method, path });
    return inner(method, path, body);
  };
}
