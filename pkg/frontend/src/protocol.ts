/**
 * Wire protocol of the monitoring service, schema_version 1.
 *
 * Field names are part of the contract; everything here mirrors the server
 * schema verbatim and validates incoming messages before they reach state.
 */

export const SCHEMA_VERSION = 1;

export type SessionStatus = "running" | "aborted" | "completed" | "violated";
export type SessionMode = "scripted" | "free";

export interface ServiceMetadata {
  schema_version: number;
  method: string;
  n_calibration: number;
  dt: number;
  past_steps: number;
  lead_steps: number;
  ny_limit: number;
  horizon: number;
  doublet_start: number;
  command_saturation: number;
}

export interface SessionInfo {
  schema_version: number;
  session_id: string;
  epsilon: number;
  mode: SessionMode;
  pace: string;
  dt: number;
  past_steps: number;
  horizon_steps: number;
  ny_limit: number;
}

/** One step of telemetry; p_value/alert are null while the buffer fills. */
export interface TelemetryMessage {
  type: "telemetry";
  t: number;
  time: number;
  outputs: number[];
  p_value: number | null;
  alert: boolean | null;
  status: SessionStatus;
}

export interface AbortAckMessage {
  type: "abort_ack";
  t: number;
  status: SessionStatus;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = TelemetryMessage | AbortAckMessage | ErrorMessage;

export interface Counterfactual {
  from_step: number;
  outputs: number[][];
  would_violate: boolean;
  violation_step: number | null;
}

export interface DebriefReport {
  session_id: string;
  status: SessionStatus;
  epsilon: number;
  seed: number;
  hidden_params: {
    A: number[][];
    B: number[][];
    C: number[][];
    D: number[][];
    V: number;
    g: number;
  };
  telemetry: Omit<TelemetryMessage, "type">[];
  counterfactual: Counterfactual | null;
}

/** Output vector component order. */
export const OUTPUT_NAMES = ["beta", "p", "r", "Ny", "aileron", "rudder"] as const;
export const NY_INDEX = 3;

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error(`not JSON: ${raw.slice(0, 80)}`);
  }
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "telemetry": {
      if (
        typeof msg.t !== "number" ||
        typeof msg.time !== "number" ||
        !Array.isArray(msg.outputs) ||
        msg.outputs.length !== 6 ||
        !msg.outputs.every((v) => typeof v === "number") ||
        !(msg.p_value === null || typeof msg.p_value === "number") ||
        !(msg.alert === null || typeof msg.alert === "boolean") ||
        !isStatus(msg.status)
      ) {
        throw new Error("malformed telemetry message");
      }
      return msg as unknown as TelemetryMessage;
    }
    case "abort_ack": {
      if (typeof msg.t !== "number" || !isStatus(msg.status)) {
        throw new Error("malformed abort_ack message");
      }
      return msg as unknown as AbortAckMessage;
    }
    case "error": {
      if (typeof msg.message !== "string") {
        throw new Error("malformed error message");
      }
      return msg as unknown as ErrorMessage;
    }
    default:
      throw new Error(`unknown message type ${String(msg.type)}`);
  }
}

function isStatus(value: unknown): value is SessionStatus {
  return value === "running" || value === "aborted" || value === "completed" || value === "violated";
}

export interface StepCommand {
  aileron: number;
  rudder: number;
}

export function buildStepMessage(command?: StepCommand): string {
  if (command === undefined) {
    return JSON.stringify({ type: "step" });
  }
  return JSON.stringify({ type: "step", aileron: command.aileron, rudder: command.rudder });
}

export function buildAbortMessage(): string {
  return JSON.stringify({ type: "abort" });
}
