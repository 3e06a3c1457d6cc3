// Wire schema for the live-service stream (versioned JSON frames) plus the
// client-side derived display values.

export const SCHEMA_VERSION = 1;

export interface StateFrame {
  v: number;
  type: "state";
  session: string;
  t: number;
  p: [number, number, number];
  vel: [number, number, number];
  r: number[]; // row-major 3x3, body->world
  w: [number, number, number];
  throttle: number;
  action: [number, number, number, number];
  task: "pos" | "circle" | "flip";
  command: number;
  tiltage: number;
  voltage: number;
  paused: boolean;
}

export interface AckFrame {
  v: number;
  type: "ack";
  ok: boolean;
  applied?: Record<string, unknown>;
  warning?: string;
  error?: string;
}

export type Frame = StateFrame | AckFrame;

export type Command =
  | { type: "circle_speed"; value: number }
  | { type: "flip"; turns?: number }
  | { type: "pos_target"; p: [number, number, number]; yaw?: number }
  | { type: "task"; value: "pos" | "circle" | "flip" }
  | { type: "pause" }
  | { type: "resume" };

export function parseFrame(text: string): Frame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d.v !== SCHEMA_VERSION) return null;
  if (d.type === "ack" && typeof d.ok === "boolean") return d as unknown as AckFrame;
  if (d.type !== "state") return null;
  if (
    typeof d.t !== "number" ||
    !Array.isArray(d.p) || d.p.length !== 3 ||
    !Array.isArray(d.r) || d.r.length !== 9 ||
    !Array.isArray(d.w) || d.w.length !== 3 ||
    typeof d.tiltage !== "number" ||
    typeof d.paused !== "boolean"
  ) {
    return null;
  }
  return d as unknown as StateFrame;
}

// zyx Euler angles of the body->world matrix, for the strip charts
export function eulerOf(r: number[]): { roll: number; pitch: number; yaw: number } {
  const pitch = Math.asin(Math.min(1, Math.max(-1, -r[6])));
  return {
    roll: Math.atan2(r[7], r[8]),
    pitch,
    yaw: Math.atan2(r[3], r[0]),
  };
}

export function tiltDegOf(r: number[]): number {
  return (Math.acos(Math.min(1, Math.max(-1, r[8]))) * 180) / Math.PI;
}

export function speedOf(vel: [number, number, number]): number {
  return Math.hypot(vel[0], vel[1], vel[2]);
}
