// Telemetry history: fixed-capacity ring of decoded frames, ordered by
// timestamp (frames arriving out of order or duplicated are dropped).

import { StateFrame, eulerOf, speedOf } from "./protocol.js";

export interface Sample {
  t: number;
  p: [number, number, number];
  roll: number;
  pitch: number;
  yaw: number;
  w: [number, number, number];
  throttle: number;
  command: number;
  tiltage: number;
  speed: number;
}

export class Telemetry {
  readonly capacity: number;
  private samples: Sample[] = [];

  constructor(capacity = 3000) {
    this.capacity = capacity;
  }

  push(frame: StateFrame): boolean {
    const last = this.samples[this.samples.length - 1];
    if (last && frame.t <= last.t) return false;
    const { roll, pitch, yaw } = eulerOf(frame.r);
    this.samples.push({
      t: frame.t,
      p: frame.p,
      roll,
      pitch,
      yaw,
      w: frame.w,
      throttle: frame.throttle,
      command: frame.command,
      tiltage: frame.tiltage,
      speed: speedOf(frame.vel),
    });
    if (this.samples.length > this.capacity) {
      this.samples.splice(0, this.samples.length - this.capacity);
    }
    return true;
  }

  clear(): void {
    this.samples = [];
  }

  get length(): number {
    return this.samples.length;
  }

  latest(): Sample | null {
    return this.samples[this.samples.length - 1] ?? null;
  }

  series(pick: (s: Sample) => number, window = this.capacity): { t: number[]; y: number[] } {
    const start = Math.max(0, this.samples.length - window);
    const t: number[] = [];
    const y: number[] = [];
    for (let i = start; i < this.samples.length; i++) {
      t.push(this.samples[i].t);
      y.push(pick(this.samples[i]));
    }
    return { t, y };
  }

  trace(window = this.capacity): Sample[] {
    return this.samples.slice(Math.max(0, this.samples.length - window));
  }
}
