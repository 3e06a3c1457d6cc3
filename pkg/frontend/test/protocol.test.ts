import { describe, expect, it } from "vitest";
import { eulerOf, parseFrame, speedOf, tiltDegOf, SCHEMA_VERSION } from "../src/protocol.js";

const stateFrame = (extra: Record<string, unknown> = {}) =>
  JSON.stringify({
    v: SCHEMA_VERSION,
    type: "state",
    session: "s1",
    t: 1.23,
    p: [0.1, -0.2, 3.0],
    vel: [1.0, 0.0, 0.0],
    r: [1, 0, 0, 0, 1, 0, 0, 0, 1],
    w: [0, 0, 0.5],
    throttle: 244,
    action: [244, 0, 0, 0.5],
    task: "circle",
    command: 2.5,
    tiltage: 1.0,
    voltage: 25.1,
    paused: false,
    ...extra,
  });

describe("parseFrame", () => {
  it("round-trips a state frame losslessly", () => {
    const f = parseFrame(stateFrame());
    expect(f).not.toBeNull();
    expect(f!.type).toBe("state");
    if (f!.type === "state") {
      expect(f!.t).toBe(1.23);
      expect(f!.p).toEqual([0.1, -0.2, 3.0]);
      expect(f!.r).toHaveLength(9);
      expect(f!.command).toBe(2.5);
    }
  });

  it("accepts ack frames", () => {
    const f = parseFrame(JSON.stringify({ v: 1, type: "ack", ok: true, applied: { type: "flip" } }));
    expect(f).not.toBeNull();
    expect(f!.type).toBe("ack");
  });

  it("rejects malformed payloads", () => {
    expect(parseFrame("not json")).toBeNull();
    expect(parseFrame("42")).toBeNull();
    expect(parseFrame(JSON.stringify({ v: 99, type: "state" }))).toBeNull();
    expect(parseFrame(stateFrame({ r: [1, 2, 3] }))).toBeNull();
    expect(parseFrame(stateFrame({ t: "soon" }))).toBeNull();
  });
});

describe("derived display values", () => {
  it("upright attitude has zero angles and tilt", () => {
    const e = eulerOf([1, 0, 0, 0, 1, 0, 0, 0, 1]);
    expect(e.roll).toBeCloseTo(0);
    expect(e.pitch).toBeCloseTo(0);
    expect(e.yaw).toBeCloseTo(0);
    expect(tiltDegOf([1, 0, 0, 0, 1, 0, 0, 0, 1])).toBeCloseTo(0);
  });

  it("quarter yaw turn reads 90 degrees", () => {
    // Rz(pi/2), row-major
    const r = [0, -1, 0, 1, 0, 0, 0, 0, 1];
    expect(eulerOf(r).yaw).toBeCloseTo(Math.PI / 2);
    expect(tiltDegOf(r)).toBeCloseTo(0);
  });

  it("inverted attitude tilts 180 degrees", () => {
    // Rx(pi)
    const r = [1, 0, 0, 0, -1, 0, 0, 0, -1];
    expect(tiltDegOf(r)).toBeCloseTo(180);
    expect(Math.abs(eulerOf(r).roll)).toBeCloseTo(Math.PI);
  });

  it("speed is the velocity norm", () => {
    expect(speedOf([3, 4, 0])).toBeCloseTo(5);
  });
});
