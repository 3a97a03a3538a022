/**
 * Browser entry point: wires the session client, console state, gauge,
 * strip charts, stick inputs, and the abort/debrief flow to the DOM.
 */

import { SessionClient } from "./client.js";
import { ControlSender, StickInput } from "./controls.js";
import { DEFAULT_PANELS, drawPanel, PanelSpec } from "./charts.js";
import { Counterfactual, SessionMode } from "./protocol.js";
import { ConsoleState } from "./telemetry.js";

const WINDOW_SECONDS = 10.0;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const connectButton = el<HTMLButtonElement>("connect");
const abortButton = el<HTMLButtonElement>("abort");
const newSessionButton = el<HTMLButtonElement>("new-session");
const epsilonInput = el<HTMLInputElement>("epsilon");
const seedInput = el<HTMLInputElement>("seed");
const modeSelect = el<HTMLSelectElement>("mode");
const serverInput = el<HTMLInputElement>("server");
const gaugeBox = el<HTMLDivElement>("gauge");
const gaugeValue = el<HTMLDivElement>("gauge-value");
const statusLine = el<HTMLDivElement>("status-line");
const chartsBox = el<HTMLDivElement>("charts");
const debriefBox = el<HTMLDivElement>("debrief");
const stickAileron = el<HTMLInputElement>("stick-aileron");
const stickRudder = el<HTMLInputElement>("stick-rudder");
const stickBox = el<HTMLDivElement>("stick");

let state: ConsoleState | null = null;
let client: SessionClient | null = null;
let sender: ControlSender | null = null;
let stepTimer: number | null = null;
let canvases: HTMLCanvasElement[] = [];
let panels: PanelSpec[] = [];

function currentStick(): StickInput {
  return { x: Number(stickAileron.value), pedal: Number(stickRudder.value) };
}

function setStatus(text: string) {
  statusLine.textContent = text;
}

function renderGauge() {
  if (!state) return;
  const gauge = state.gauge;
  const level = gauge.level;
  gaugeBox.dataset.level = level;
  gaugeValue.textContent =
    gauge.pValue === null
      ? "calibrating"
      : `p = ${gauge.pValue.toFixed(4)}  (epsilon = ${state.epsilon})`;
  el<HTMLDivElement>("gauge-level").textContent = level;
}

function renderCharts() {
  if (!state) return;
  canvases.forEach((canvas, i) => {
    const ctx = canvas.getContext("2d");
    if (ctx) {
      drawPanel(ctx, canvas.width, canvas.height, state!.buffer, panels[i],
                state!.epsilon, WINDOW_SECONDS);
    }
  });
}

function renderCounterfactual(cf: Counterfactual | null): string {
  if (cf === null) return "no counterfactual (session did not end in an abort)";
  if (!cf.would_violate) return "counterfactual: the maneuver would have stayed safe";
  return `counterfactual: |Ny| would have crossed the limit at step ${cf.violation_step}`;
}

async function showDebrief() {
  if (!client || !state) return;
  const report = await client.fetchDebrief();
  state.debriefReceived(report);
  const hidden = report.hidden_params;
  const fmt = (rows: number[][]) =>
    rows.map((r) => "[" + r.map((v) => v.toFixed(3)).join(", ") + "]").join("\n ");
  debriefBox.hidden = false;
  debriefBox.innerHTML = "";
  const heading = document.createElement("h2");
  heading.textContent = `Debrief: ${report.status}`;
  const body = document.createElement("pre");
  body.textContent =
    `epsilon: ${report.epsilon}\nseed: ${report.seed}\n` +
    `telemetry records: ${report.telemetry.length}\n` +
    `${renderCounterfactual(report.counterfactual)}\n\n` +
    `hidden A:\n ${fmt(hidden.A)}\nhidden B:\n ${fmt(hidden.B)}\n` +
    `V = ${hidden.V} m/s, g = ${hidden.g} m/s^2`;
  debriefBox.append(heading, body);
  setStatus(`debrief ready (${report.status})`);
  abortButton.disabled = true;
  newSessionButton.hidden = false;
}

function stopStepping() {
  if (stepTimer !== null) {
    window.clearInterval(stepTimer);
    stepTimer = null;
  }
}

function buildCharts(pastSteps: number) {
  panels = [...DEFAULT_PANELS,
            { label: `conformal p-value (warm-up ${pastSteps} steps)`,
              component: "p_value" as const }];
  chartsBox.innerHTML = "";
  canvases = panels.map(() => {
    const canvas = document.createElement("canvas");
    canvas.width = 560;
    canvas.height = 110;
    chartsBox.appendChild(canvas);
    return canvas;
  });
}

async function connect() {
  const epsilon = Number(epsilonInput.value);
  const mode = modeSelect.value as SessionMode;
  state = new ConsoleState(epsilon, WINDOW_SECONDS);
  client = new SessionClient({
    baseUrl: serverInput.value.replace(/\/$/, ""),
    http: (url, init) => fetch(url, init),
    socketFactory: (url) => new WebSocket(url) as unknown as import("./client.js").SocketLike,
  });
  state.connection = "connecting";
  setStatus("creating session...");
  try {
    const seed = seedInput.value === "" ? undefined : Number(seedInput.value);
    const info = await client.createSession(epsilon, mode, seed);
    buildCharts(info.past_steps);
    client.openStream();
    state.connection = "open";
    state.sessionStarted();
    setStatus(`session ${info.session_id} (${mode}, epsilon ${info.epsilon})`);
  } catch (err) {
    state.connection = "closed";
    setStatus(`connection failed: ${String(err)}`);
    return;
  }

  epsilonInput.disabled = true;  // locked for the rest of the session
  connectButton.disabled = true;
  abortButton.disabled = false;
  stickBox.hidden = mode !== "free";
  debriefBox.hidden = true;

  sender = new ControlSender(
    { get connected() { return client!.connected; }, send: (p) => client!.sendRaw(p) },
    1.5,
    mode === "free",
  );

  client.onMessage = (msg) => {
    if (!state) return;
    if (msg.type === "telemetry") {
      state.ingest(msg);
      renderGauge();
      renderCharts();
      if (msg.status !== "running") {
        stopStepping();
        client?.close();
        void showDebrief();
      }
    } else if (msg.type === "abort_ack") {
      stopStepping();
      state.abortConfirmed(msg.status);
      client?.close();
      void showDebrief();
    } else {
      state.errorReceived(msg.message);
      setStatus(`server error: ${msg.message}`);
    }
  };
  client.onDisconnect = () => {
    if (state && state.phase === "flying") {
      state.connection = "closed";
      setStatus("disconnected");
      stopStepping();
    }
  };

  // Lockstep pacing: one step message per dt of wall clock.
  const dtMs = (client.info?.dt ?? 0.05) * 1000;
  stepTimer = window.setInterval(() => {
    if (state?.phase === "flying" && !client?.abortPending) {
      sender?.sendStep(currentStick());
    }
  }, dtMs);
}

connectButton.addEventListener("click", () => void connect());

abortButton.addEventListener("click", () => {
  // Exactly one abort request regardless of how often the button is mashed.
  if (client?.requestAbort()) {
    setStatus("abort requested...");
  }
});

newSessionButton.addEventListener("click", () => {
  stopStepping();
  client?.close();
  state = null;
  client = null;
  sender = null;
  epsilonInput.disabled = false;
  connectButton.disabled = false;
  abortButton.disabled = true;
  newSessionButton.hidden = true;
  debriefBox.hidden = true;
  chartsBox.innerHTML = "";
  gaugeBox.dataset.level = "CALIBRATING";
  gaugeValue.textContent = "-";
  el<HTMLDivElement>("gauge-level").textContent = "idle";
  setStatus("ready");
});

window.addEventListener("keydown", (event) => {
  if (modeSelect.value !== "free") return;
  const step = 0.2;
  if (event.key === "ArrowLeft") stickAileron.value = String(Number(stickAileron.value) - step);
  if (event.key === "ArrowRight") stickAileron.value = String(Number(stickAileron.value) + step);
  if (event.key === "ArrowUp") stickRudder.value = String(Number(stickRudder.value) + step);
  if (event.key === "ArrowDown") stickRudder.value = String(Number(stickRudder.value) - step);
});

setStatus("ready");
