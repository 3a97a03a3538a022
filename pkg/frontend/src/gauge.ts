/**
 * The p-value gauge.  The alert rule matches the server exactly (alert when
 * p >= epsilon); the caution band starts at half the target miss rate.
 */

export type GaugeLevel = "NORMAL" | "CAUTION" | "ALERT";

export function classifyGauge(p: number, epsilon: number): GaugeLevel {
  if (!(p > 0 && p <= 1)) {
    throw new Error(`p-value out of range: ${p}`);
  }
  if (!(epsilon > 0 && epsilon < 1)) {
    throw new Error(`epsilon out of range: ${epsilon}`);
  }
  if (p >= epsilon) return "ALERT";
  if (p >= epsilon / 2) return "CAUTION";
  return "NORMAL";
}

export interface GaugeState {
  /** Last received p-value; null while the output buffer is filling. */
  pValue: number | null;
  /** Mirrors the last received alert flag verbatim. */
  alert: boolean;
  level: GaugeLevel | "CALIBRATING";
}

export function gaugeFromTelemetry(
  pValue: number | null,
  alert: boolean | null,
  epsilon: number,
): GaugeState {
  if (pValue === null) {
    return { pValue: null, alert: false, level: "CALIBRATING" };
  }
  return { pValue, alert: alert === true, level: classifyGauge(pValue, epsilon) };
}
