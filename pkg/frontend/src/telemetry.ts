/**
 * Console state: the rolling telemetry window, the gauge, and the session
 * phase machine.
 *
 * Invariants kept here:
 *  - the chart time axis is monotone (out-of-order frames are rejected);
 *  - the stored p-value history is exactly the received values, never
 *    smoothed or resampled;
 *  - the gauge alert mirrors the last received alert flag;
 *  - the debrief phase is entered only on server confirmation.
 */

import { gaugeFromTelemetry, GaugeState } from "./gauge.js";
import { DebriefReport, SessionStatus, TelemetryMessage } from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "open" | "closed";
export type ConsolePhase = "setup" | "flying" | "awaiting_debrief" | "debrief";

export interface TelemetryFrame {
  t: number;
  time: number;
  outputs: number[];
  pValue: number | null;
  alert: boolean | null;
  status: SessionStatus;
}

/** Rolling window of the last `windowSeconds` of telemetry. */
export class TelemetryBuffer {
  private frames: TelemetryFrame[] = [];

  constructor(private readonly windowSeconds: number = 10.0) {}

  get length(): number {
    return this.frames.length;
  }

  get latest(): TelemetryFrame | null {
    return this.frames.length ? this.frames[this.frames.length - 1] : null;
  }

  push(frame: TelemetryFrame): void {
    const last = this.latest;
    if (last !== null && frame.time <= last.time) {
      throw new Error(`non-monotone telemetry time: ${frame.time} after ${last.time}`);
    }
    this.frames.push(frame);
    const cutoff = frame.time - this.windowSeconds;
    while (this.frames.length && this.frames[0].time < cutoff) {
      this.frames.shift();
    }
  }

  /** (time, value) series for one output component over the window. */
  outputSeries(component: number): Array<[number, number]> {
    return this.frames.map((f) => [f.time, f.outputs[component]]);
  }

  /** p-value series, exactly as received; calibrating frames are skipped. */
  pValueSeries(): Array<[number, number]> {
    const series: Array<[number, number]> = [];
    for (const f of this.frames) {
      if (f.pValue !== null) series.push([f.time, f.pValue]);
    }
    return series;
  }

  /** Time of the first alert inside the window, for the chart marker. */
  firstAlertTime(): number | null {
    for (const f of this.frames) {
      if (f.alert === true) return f.time;
    }
    return null;
  }
}

export class ConsoleState {
  connection: ConnectionStatus = "idle";
  phase: ConsolePhase = "setup";
  status: SessionStatus | null = null;
  gauge: GaugeState = { pValue: null, alert: false, level: "CALIBRATING" };
  buffer: TelemetryBuffer;
  debrief: DebriefReport | null = null;
  lastError: string | null = null;

  private epsilonValue: number;
  private epsilonLocked = false;

  constructor(epsilon: number, windowSeconds: number = 10.0) {
    if (!(epsilon > 0 && epsilon < 1)) {
      throw new Error(`epsilon out of range: ${epsilon}`);
    }
    this.epsilonValue = epsilon;
    this.buffer = new TelemetryBuffer(windowSeconds);
  }

  get epsilon(): number {
    return this.epsilonValue;
  }

  /** Epsilon is adjustable only before the session starts. */
  setEpsilon(value: number): void {
    if (this.epsilonLocked) {
      throw new Error("epsilon is locked once the session starts");
    }
    if (!(value > 0 && value < 1)) {
      throw new Error(`epsilon out of range: ${value}`);
    }
    this.epsilonValue = value;
  }

  sessionStarted(): void {
    this.epsilonLocked = true;
    this.phase = "flying";
    this.status = "running";
  }

  ingest(msg: TelemetryMessage): void {
    if (this.phase !== "flying") {
      throw new Error(`telemetry outside a flying session (phase ${this.phase})`);
    }
    this.buffer.push({
      t: msg.t,
      time: msg.time,
      outputs: msg.outputs,
      pValue: msg.p_value,
      alert: msg.alert,
      status: msg.status,
    });
    this.gauge = gaugeFromTelemetry(msg.p_value, msg.alert, this.epsilonValue);
    this.status = msg.status;
    if (msg.status !== "running") {
      this.phase = "awaiting_debrief";
    }
  }

  abortConfirmed(status: SessionStatus): void {
    this.status = status;
    this.phase = "awaiting_debrief";
  }

  debriefReceived(report: DebriefReport): void {
    if (this.phase !== "awaiting_debrief") {
      throw new Error(`debrief outside awaiting_debrief (phase ${this.phase})`);
    }
    this.debrief = report;
    this.phase = "debrief";
  }

  errorReceived(message: string): void {
    this.lastError = message;
  }
}
