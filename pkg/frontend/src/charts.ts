// Dependency-free canvas renderers: strip charts and the trajectory views
// (isometric 3D plus XOY / YOZ projections, trace colored by time or speed).

import { Sample } from "./store.js";

export interface SeriesSpec {
  label: string;
  color: string;
  pick: (s: Sample) => number;
}

export function drawStripChart(
  ctx: CanvasRenderingContext2D,
  samples: Sample[],
  specs: SeriesSpec[],
  title: string,
): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#11161d";
  ctx.fillRect(0, 0, w, h);
  ctx.fillStyle = "#8aa";
  ctx.font = "11px monospace";
  ctx.fillText(title, 6, 12);
  if (samples.length < 2) return;

  let lo = Infinity;
  let hi = -Infinity;
  for (const spec of specs) {
    for (const s of samples) {
      const v = spec.pick(s);
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!(hi > lo)) {
    lo -= 1;
    hi += 1;
  }
  const pad = 0.1 * (hi - lo);
  lo -= pad;
  hi += pad;
  const t0 = samples[0].t;
  const t1 = samples[samples.length - 1].t;
  const x = (t: number) => ((t - t0) / Math.max(t1 - t0, 1e-9)) * (w - 10) + 5;
  const y = (v: number) => h - 6 - ((v - lo) / (hi - lo)) * (h - 24);

  if (lo < 0 && hi > 0) {
    ctx.strokeStyle = "#2a3440";
    ctx.beginPath();
    ctx.moveTo(5, y(0));
    ctx.lineTo(w - 5, y(0));
    ctx.stroke();
  }
  let lx = 60;
  for (const spec of specs) {
    ctx.strokeStyle = spec.color;
    ctx.beginPath();
    samples.forEach((s, i) => {
      const px = x(s.t);
      const py = y(spec.pick(s));
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.fillStyle = spec.color;
    ctx.fillText(spec.label, lx, 12);
    lx += ctx.measureText(spec.label).width + 14;
  }
  ctx.fillStyle = "#667";
  ctx.fillText(hi.toFixed(1), w - 42, 20);
  ctx.fillText(lo.toFixed(1), w - 42, h - 8);
}

function colorRamp(f: number): string {
  // blue -> cyan -> yellow -> red
  const x = Math.min(1, Math.max(0, f));
  const r = Math.round(255 * Math.min(1, Math.max(0, 2 * x - 0.5)));
  const g = Math.round(255 * Math.min(1, 1.6 * (1 - Math.abs(x - 0.55))));
  const b = Math.round(255 * Math.min(1, Math.max(0, 1.4 - 2.2 * x)));
  return `rgb(${r},${g},${b})`;
}

type Project = (p: [number, number, number]) => [number, number];

function drawTrace(
  ctx: CanvasRenderingContext2D,
  trace: Sample[],
  project: Project,
  colorBy: (s: Sample, i: number) => number,
  title: string,
  scale: number,
): void {
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#11161d";
  ctx.fillRect(0, 0, w, h);
  ctx.fillStyle = "#8aa";
  ctx.font = "11px monospace";
  ctx.fillText(title, 6, 12);
  const cx = w / 2;
  const cy = h / 2;
  const toPx = (p: [number, number, number]): [number, number] => {
    const [u, v] = project(p);
    return [cx + u * scale, cy - v * scale];
  };
  // axes cross
  ctx.strokeStyle = "#233";
  ctx.beginPath();
  ctx.moveTo(cx - 40, cy);
  ctx.lineTo(cx + 40, cy);
  ctx.moveTo(cx, cy - 40);
  ctx.lineTo(cx, cy + 40);
  ctx.stroke();

  for (let i = 1; i < trace.length; i++) {
    const [x0, y0] = toPx(trace[i - 1].p);
    const [x1, y1] = toPx(trace[i].p);
    ctx.strokeStyle = colorRamp(colorBy(trace[i], i));
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
  if (trace.length) {
    const [x1, y1] = toPx(trace[trace.length - 1].p);
    ctx.fillStyle = "#fff";
    ctx.beginPath();
    ctx.arc(x1, y1, 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

const ISO: Project = (p) => [
  (p[0] - p[1]) * 0.866,
  (p[2] - 3.0) + (p[0] + p[1]) * 0.5 * 0.6,
];
const XOY: Project = (p) => [p[0], p[1]];
const YOZ: Project = (p) => [p[1], p[2] - 3.0];

export function drawTrajectoryViews(
  iso: CanvasRenderingContext2D,
  xoy: CanvasRenderingContext2D,
  yoz: CanvasRenderingContext2D,
  trace: Sample[],
  maxSpeed = 6.0,
): void {
  const n = Math.max(trace.length, 1);
  drawTrace(iso, trace, ISO, (_s, i) => i / n, "3D (time)", 40);
  drawTrace(xoy, trace, XOY, (s) => s.speed / maxSpeed, "XOY (speed)", 55);
  drawTrace(yoz, trace, YOZ, (s) => s.speed / maxSpeed, "YOZ (speed)", 55);
}
