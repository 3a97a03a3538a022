/**
 * Canvas strip charts: one panel per output channel plus the p-value trace.
 * The safety band is drawn as horizontal red lines and the first alert in
 * the window as a dashed vertical marker.
 */

import { TelemetryBuffer } from "./telemetry.js";

export interface PanelSpec {
  label: string;
  component: number | "p_value";
  /** Horizontal red guard lines, e.g. the +/-0.5 g Ny band. */
  guards?: number[];
  /** Dotted reference line, e.g. epsilon on the p-value panel. */
  reference?: number;
  fixedRange?: [number, number];
}

export const DEFAULT_PANELS: PanelSpec[] = [
  { label: "sideslip [rad]", component: 0 },
  { label: "roll rate [rad/s]", component: 1 },
  { label: "yaw rate [rad/s]", component: 2 },
  { label: "Ny [g]", component: 3, guards: [0.5, -0.5], fixedRange: [-0.8, 0.8] },
];

function seriesRange(values: number[], fallback: [number, number]): [number, number] {
  if (!values.length) return fallback;
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (hi - lo < 1e-6) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.1 * (hi - lo);
  return [lo - pad, hi + pad];
}

export function drawPanel(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  buffer: TelemetryBuffer,
  spec: PanelSpec,
  epsilon: number,
  windowSeconds: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  const series =
    spec.component === "p_value" ? buffer.pValueSeries() : buffer.outputSeries(spec.component);
  const latest = buffer.latest;
  const tEnd = latest ? latest.time : windowSeconds;
  const tStart = tEnd - windowSeconds;

  let range: [number, number];
  if (spec.component === "p_value") {
    range = [0, 1.02];
  } else if (spec.fixedRange) {
    const values = series.map(([, v]) => v);
    const auto = seriesRange(values, spec.fixedRange);
    range = [Math.min(auto[0], spec.fixedRange[0]), Math.max(auto[1], spec.fixedRange[1])];
  } else {
    range = seriesRange(series.map(([, v]) => v), [-1, 1]);
  }

  const x = (t: number) => ((t - tStart) / windowSeconds) * width;
  const y = (v: number) => height - ((v - range[0]) / (range[1] - range[0])) * height;

  for (const guard of spec.guards ?? []) {
    ctx.strokeStyle = "#e04a4a";
    ctx.lineWidth = 1;
    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.moveTo(0, y(guard));
    ctx.lineTo(width, y(guard));
    ctx.stroke();
  }
  const reference = spec.component === "p_value" ? epsilon : spec.reference;
  if (reference !== undefined) {
    ctx.strokeStyle = "#d0a020";
    ctx.setLineDash([2, 3]);
    ctx.beginPath();
    ctx.moveTo(0, y(reference));
    ctx.lineTo(width, y(reference));
    ctx.stroke();
    ctx.setLineDash([]);
  }

  const alertTime = buffer.firstAlertTime();
  if (alertTime !== null && alertTime >= tStart) {
    ctx.strokeStyle = "#cccccc";
    ctx.setLineDash([5, 4]);
    ctx.beginPath();
    ctx.moveTo(x(alertTime), 0);
    ctx.lineTo(x(alertTime), height);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  ctx.strokeStyle = spec.component === "p_value" ? "#b07ce8" : "#5aa2e0";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  series.forEach(([t, v], i) => {
    if (i === 0) ctx.moveTo(x(t), y(v));
    else ctx.lineTo(x(t), y(v));
  });
  ctx.stroke();

  ctx.fillStyle = "#9aa4b2";
  ctx.font = "11px monospace";
  ctx.fillText(spec.label, 6, 13);
}
