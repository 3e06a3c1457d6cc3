// Operator console wiring: session lifecycle, stream -> telemetry -> canvases,
// and the command controls (speed slider, flip trigger, task switch, pause).

import { SessionClient } from "./client.js";
import { drawStripChart, drawTrajectoryViews } from "./charts.js";
import { Telemetry } from "./store.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const telemetry = new Telemetry(3000);
const client = new SessionClient({
  socketFactory: (url) => new WebSocket(url) as never,
});

let sessionId: string | null = null;
let lastAckNote = "";

async function createSession(): Promise<void> {
  const controller = ($("controller") as HTMLSelectElement).value;
  const task = ($("task") as HTMLSelectElement).value;
  const checkpoint = ($("checkpoint") as HTMLInputElement).value.trim();
  const body: Record<string, unknown> = { controller, task };
  if (controller === "policy" && checkpoint) body.checkpoint = checkpoint;
  const res = await fetch("/sessions", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    lastAckNote = `create failed: ${(await res.json()).detail ?? res.status}`;
    return;
  }
  const doc = await res.json();
  sessionId = doc.id as string;
  telemetry.clear();
  const proto = location.protocol === "https:" ? "wss" : "ws";
  client.connect(`${proto}://${location.host}/sessions/${sessionId}/stream`);
}

function sendCommand(cmd: Parameters<SessionClient["send"]>[0]): void {
  try {
    client.send(cmd);
  } catch (err) {
    lastAckNote = String(err);
  }
}

function bindControls(): void {
  $("create").onclick = () => void createSession();
  const slider = $("speed") as HTMLInputElement;
  slider.oninput = () => {
    $("speed-label").textContent = `${Number(slider.value).toFixed(1)} m/s`;
  };
  slider.onchange = () =>
    sendCommand({ type: "circle_speed", value: Number(slider.value) });
  $("flip").onclick = () => sendCommand({ type: "flip" });
  $("pause").onclick = () => {
    const paused = client.lastFrame?.paused ?? false;
    sendCommand({ type: paused ? "resume" : "pause" });
  };
  ($("task-switch") as HTMLSelectElement).onchange = (ev) => {
    const value = (ev.target as HTMLSelectElement).value as "pos" | "circle" | "flip";
    sendCommand({ type: "task", value });
  };
}

client.onAck = (ack) => {
  lastAckNote = ack.ok
    ? `ack ${JSON.stringify(ack.applied)}${ack.warning ? ` (${ack.warning})` : ""}`
    : `rejected: ${ack.error}`;
};
client.onFrame = (frame) => telemetry.push(frame);

function refreshUi(): void {
  const enabled = client.controlsEnabled();
  for (const id of ["speed", "flip", "pause", "task-switch"]) {
    ($(id) as HTMLButtonElement).disabled = !enabled;
  }
  const banner = $("banner");
  if (client.state !== "connected") {
    banner.textContent = sessionId
      ? `link ${client.state}… reconnecting`
      : "no session";
    banner.className = "banner bad";
  } else if (client.stale()) {
    banner.textContent = "stale stream (no frames > 1 s)";
    banner.className = "banner warn";
  } else {
    const f = client.lastFrame;
    banner.textContent = f
      ? `t=${f.t.toFixed(2)}s task=${f.task} cmd=${f.command.toFixed(2)} ` +
        `tiltage=${f.tiltage.toFixed(2)} V=${f.voltage.toFixed(1)}` +
        (f.paused ? " [paused]" : "")
      : "connected";
    banner.className = "banner ok";
  }
  $("ack-note").textContent = lastAckNote;
}

function draw(): void {
  refreshUi();
  const trace = telemetry.trace(1500);
  const ctx = (id: string) =>
    ($(id) as HTMLCanvasElement).getContext("2d") as CanvasRenderingContext2D;
  drawTrajectoryViews(ctx("view-iso"), ctx("view-xoy"), ctx("view-yoz"), trace);
  drawStripChart(ctx("chart-att"), trace, [
    { label: "roll", color: "#e66", pick: (s) => s.roll },
    { label: "pitch", color: "#6d6", pick: (s) => s.pitch },
    { label: "yaw", color: "#69f", pick: (s) => s.yaw },
  ], "attitude [rad]");
  drawStripChart(ctx("chart-rate"), trace, [
    { label: "wx", color: "#e66", pick: (s) => s.w[0] },
    { label: "wy", color: "#6d6", pick: (s) => s.w[1] },
    { label: "wz", color: "#69f", pick: (s) => s.w[2] },
  ], "body rates [rad/s]");
  drawStripChart(ctx("chart-throttle"), trace, [
    { label: "throttle", color: "#fc6", pick: (s) => s.throttle },
    { label: "tiltage*500", color: "#9ad", pick: (s) => 500 * s.tiltage },
  ], "throttle / tiltage");
  requestAnimationFrame(draw);
}

bindControls();
requestAnimationFrame(draw);
