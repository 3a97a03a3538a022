/**
 * Stick-to-command mapping and outbound step pacing.
 *
 * Free-stick mode sends one step message per server step (lockstep) or per
 * tick (realtime).  While disconnected, inputs are dropped on the floor;
 * a stale command must never be queued for replay after reconnect.
 */

import { buildStepMessage, StepCommand } from "./protocol.js";

export interface StickInput {
  /** Lateral stick, -1 .. +1 -> aileron. */
  x: number;
  /** Rudder pedal, -1 .. +1 -> rudder. */
  pedal: number;
}

export function clamp(value: number, bound: number): number {
  return Math.min(bound, Math.max(-bound, value));
}

/** Map normalized stick axes onto commanded deflections, saturated. */
export function mapStick(input: StickInput, saturation: number): StepCommand {
  return {
    aileron: clamp(input.x * saturation, saturation),
    rudder: clamp(input.pedal * saturation, saturation),
  };
}

export interface OutboundChannel {
  readonly connected: boolean;
  send(payload: string): void;
}

/**
 * Emits step messages for the current stick state.  `sendStep` is called
 * once per lockstep exchange (or per 50 ms tick in realtime mode).
 */
export class ControlSender {
  private dropped = 0;

  constructor(
    private readonly channel: OutboundChannel,
    private readonly saturation: number,
    private readonly freeStick: boolean,
  ) {}

  get droppedInputs(): number {
    return this.dropped;
  }

  sendStep(input?: StickInput): boolean {
    if (!this.channel.connected) {
      if (input !== undefined) this.dropped += 1;
      return false;
    }
    if (!this.freeStick) {
      this.channel.send(buildStepMessage());
      return true;
    }
    const command = mapStick(input ?? { x: 0, pedal: 0 }, this.saturation);
    this.channel.send(buildStepMessage(command));
    return true;
  }
}
