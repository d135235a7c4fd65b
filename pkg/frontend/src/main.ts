/**
 * DOM wiring. Everything interesting lives in session.ts/charts.ts;
 * this file only moves values between widgets and the session.
 */

import { FitBody } from "./models.js";
import { DashboardSession, SweepPoint } from "./session.js";
import { stripChartSvg, sweepChartSvg } from "./charts.js";

const KNOBS = [
  { name: "x_um", label: "stage x (um)", min: -10, max: 10, step: 0.1, start: 0 },
  { name: "y_um", label: "stage y (um)", min: -10, max: 10, step: 0.1, start: 0 },
  { name: "z_um", label: "stage z (um)", min: -10, max: 10, step: 0.1, start: 0 },
  { name: "magnet_angle_deg", label: "magnet angle (deg)", min: 0, max: 90, step: 1, start: 0 },
  { name: "antenna_coupling", label: "antenna coupling", min: 0, max: 1, step: 0.01, start: 1 },
] as const;

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, attrs: Record<string, string> = {}, text = ""): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function fitTable(fit: FitBody): HTMLTableElement {
  const table = el("table", { class: "fit-table" });
  const head = el("tr");
  for (const h of ["parameter", "value", "std error"]) {
    head.appendChild(el("th", {}, h));
  }
  table.appendChild(head);
  for (const name of Object.keys(fit.params).sort()) {
    const row = el("tr", { "data-param": name });
    row.appendChild(el("td", {}, name));
    row.appendChild(el("td", { class: "value" }, String(fit.params[name])));
    row.appendChild(el("td", {}, String(fit.std_errors[name] ?? "")));
    table.appendChild(row);
  }
  return table;
}

export function mount(root: HTMLElement, session: DashboardSession): void {
  const banner = el("div", { class: "banner", hidden: "hidden" },
    "connection lost - data may be stale, reconnecting");
  root.appendChild(banner);
  session.onStateChange((state) => {
    if (state === "stale") banner.removeAttribute("hidden");
    else if (state === "live") banner.setAttribute("hidden", "hidden");
  });

  // --- alignment panel ---
  const alignPanel = el("section", { class: "panel" });
  alignPanel.appendChild(el("h2", {}, "alignment"));
  const strip = el("div", { class: "chart" });
  alignPanel.appendChild(strip);
  const rateLabel = el("div", { class: "readout" }, "pl: -");
  alignPanel.appendChild(rateLabel);
  for (const knob of KNOBS) {
    const wrap = el("label", { class: "knob" }, knob.label + " ");
    const slider = el("input", {
      type: "range", min: String(knob.min), max: String(knob.max),
      step: String(knob.step), value: String(knob.start), name: knob.name,
    });
    slider.addEventListener("input", () => {
      session.setKnob(knob.name, Number(slider.value));
    });
    wrap.appendChild(slider);
    alignPanel.appendChild(wrap);
  }
  const alignToggle = el("button", {}, "start alignment");
  let stopWatch: (() => void) | null = null;
  alignToggle.addEventListener("click", () => {
    void (async () => {
      if (stopWatch === null) {
        await session.startAlignment();
        stopWatch = session.watchAlignment((point) => {
          strip.innerHTML = stripChartSvg(
            session.plPoints.map((p) => ({ t: p.ts, value: p.rateHz })));
          rateLabel.textContent = `pl: ${point.rateHz.toExponential(3)} Hz`;
        });
        alignToggle.textContent = "stop alignment";
      } else {
        stopWatch();
        stopWatch = null;
        await session.stopAlignment();
        alignToggle.textContent = "start alignment";
      }
    })();
  });
  alignPanel.appendChild(alignToggle);
  root.appendChild(alignPanel);

  // --- run panel ---
  const runPanel = el("section", { class: "panel" });
  runPanel.appendChild(el("h2", {}, "run"));
  const kindInput = el("input", { type: "text", value: "odmr", name: "kind" });
  const configInput = el("textarea", { rows: "8", name: "config" });
  configInput.value = "freq_start = 2.77 GHz\nfreq_stop = 2.97 GHz\nn_points = 81\n" +
    "mw_band_low = 2 GHz\nmw_band_high = 4 GHz\n";
  const seedInput = el("input", { type: "number", value: "1", name: "seed" });
  const startButton = el("button", {}, "start");
  const status = el("div", { class: "status" });
  const errors = el("div", { class: "errors" });
  const chart = el("div", { class: "chart" });
  const fitBox = el("div", { class: "fit" });
  for (const node of [kindInput, configInput, seedInput, startButton,
                      status, errors, chart, fitBox]) {
    runPanel.appendChild(node);
  }
  root.appendChild(runPanel);

  startButton.addEventListener("click", () => {
    void (async () => {
      errors.textContent = "";
      fitBox.textContent = "";
      status.textContent = "starting";
      const outcome = await session.startRun({
        kind: kindInput.value,
        config: configInput.value,
        seed: Number(seedInput.value),
      });
      if (!outcome.ok) {
        status.textContent = "rejected";
        if (!outcome.busy && outcome.validation) {
          for (const key of outcome.validation.missing_keys) {
            errors.appendChild(el("div", { "data-key": key }, `${key}: required`));
          }
          for (const key of outcome.validation.out_of_band) {
            errors.appendChild(el("div", { "data-key": key }, `${key}: out of band`));
          }
        } else {
          errors.appendChild(el("div", {}, outcome.message));
        }
        return;
      }
      status.textContent = `running ${outcome.runId}`;
      const axis: number[] = [];
      const signal: number[] = [];
      const redraw = (point: SweepPoint) => {
        axis[point.index] = point.axis;
        signal[point.index] = point.signal;
        chart.innerHTML = sweepChartSvg({
          axis: axis.filter((v) => v !== undefined),
          signal: signal.filter((v) => v !== undefined),
        });
      };
      const view = await session.watchRun(outcome.runId, redraw);
      status.textContent = `${view.status} (${view.points.length} points)`;
      if (view.status !== "done") {
        errors.appendChild(el("div", {}, view.error ?? "run failed"));
        return;
      }
      const result = await session.fetchResult(outcome.runId);
      chart.innerHTML = sweepChartSvg({
        axis: result.axis,
        signal: result.signal,
        reference: result.reference,
        fit: result.fit,
      });
      if (result.fit) fitBox.appendChild(fitTable(result.fit));
    })();
  });
}

// browser entry point; tests import mount() directly
if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  const base = new URLSearchParams(location.search).get("service") ??
    `${location.protocol}//${location.host}`;
  mount(document.getElementById("app")!, new DashboardSession(base));
}
