import { describe, expect, it } from "vitest";
import { Telemetry } from "../src/store.js";
import { StateFrame } from "../src/protocol.js";

const frame = (t: number, extra: Partial<StateFrame> = {}): StateFrame => ({
  v: 1,
  type: "state",
  session: "s1",
  t,
  p: [0, 0, 3],
  vel: [3, 4, 0],
  r: [1, 0, 0, 0, 1, 0, 0, 0, 1],
  w: [0, 0, 1],
  throttle: 300,
  action: [300, 0, 0, 1],
  task: "circle",
  command: 2,
  tiltage: 1,
  voltage: 25,
  paused: false,
  ...extra,
});

describe("Telemetry", () => {
  it("keeps frames in timestamp order and drops stale arrivals", () => {
    const tl = new Telemetry(10);
    expect(tl.push(frame(0.02))).toBe(true);
    expect(tl.push(frame(0.04))).toBe(true);
    expect(tl.push(frame(0.03))).toBe(false);   // out of order
    expect(tl.push(frame(0.04))).toBe(false);   // duplicate
    expect(tl.length).toBe(2);
    expect(tl.latest()?.t).toBe(0.04);
  });

  it("bounds memory at capacity", () => {
    const tl = new Telemetry(5);
    for (let i = 1; i <= 12; i++) tl.push(frame(i * 0.02));
    expect(tl.length).toBe(5);
    expect(tl.trace()[0].t).toBeCloseTo(0.16);
  });

  it("derives chart values", () => {
    const tl = new Telemetry();
    tl.push(frame(0.02));
    const s = tl.latest()!;
    expect(s.speed).toBeCloseTo(5);
    expect(s.yaw).toBeCloseTo(0);
    expect(s.throttle).toBe(300);
    const series = tl.series((x) => x.throttle);
    expect(series.y).toEqual([300]);
  });
});
