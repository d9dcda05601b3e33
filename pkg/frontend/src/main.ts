import { App, type AppElements } from "./app.js";
import { Client, xhrTransport } from "./client.js";

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el as T;
}

(function () {
  document.addEventListener("DOMContentLoaded", () => {
    const els: AppElements = {
      rulesBuffer: grab<HTMLTextAreaElement>("rules-buffer"),
      rulesStatus: grab("rules-status"),
      rulesTable: grab("rules-table"),
      servicesPanel: grab("services-panel"),
      resultsPanel: grab("results-panel"),
      subtasksInput: grab<HTMLInputElement>("subtasks-input"),
      applyButton: grab<HTMLButtonElement>("apply-button"),
      startButton: grab<HTMLButtonElement>("start-button"),
      reloadButton: grab<HTMLButtonElement>("reload-button"),
      whatIfProvider: grab<HTMLInputElement>("whatif-provider"),
      whatIfMetric: grab<HTMLInputElement>("whatif-metric"),
      whatIfOffer: grab<HTMLInputElement>("whatif-offer"),
      whatIfParam: grab<HTMLInputElement>("whatif-param"),
      whatIfValue: grab<HTMLInputElement>("whatif-value"),
      injectMetricButton: grab<HTMLButtonElement>("inject-metric-button"),
      injectParamButton: grab<HTMLButtonElement>("inject-param-button"),
      whatIfStatus: grab("whatif-status"),
    };
    // the console is served from /ui/, the API lives at the same origin root
    const app = new App(new Client(xhrTransport("")), els);
    app.wire();
    void app.boot();
  });
})();
