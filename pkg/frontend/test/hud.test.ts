import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { CockpitHud, STALE_AFTER_MS } from "../src/hud.js";
import { decodeServer } from "../src/protocol.js";

const session = readFileSync(join(__dirname, "fixtures", "session.jsonl"), "utf8")
  .split("\n")
  .filter((line) => line.trim().length > 0)
  .map(decodeServer);

describe("scripted-session replay", () => {
  it("mirrors the admitted flag into the blocked indicator on every frame", () => {
    const hud = new CockpitHud();
    let now = 0;
    let checked = 0;
    for (const msg of session) {
      now += 100;
      hud.apply(msg, now);
      if (msg.type === "frame") {
        expect(hud.snapshot.blocked).toBe(!msg.admitted);
        checked += 1;
      }
    }
    expect(checked).toBeGreaterThan(10);
  });

  it("derives distance and velocities from the authoritative state", () => {
    const hud = new CockpitHud([10, 6]);
    for (const msg of session) {
      hud.apply(msg, 0);
      if (msg.type === "frame") {
        const [x, y, , vx, vy] = msg.state;
        const state = hud.snapshot;
        expect(state.distanceToGoal).toBeCloseTo(Math.hypot(x - 10, y - 6), 12);
        expect(state.vx).toBe(vx);
        expect(state.vy).toBe(vy);
      }
    }
  });

  it("tallies per-axis agreement like the study accounting", () => {
    const hud = new CockpitHud();
    let main = 0;
    let side = 0;
    let frames = 0;
    for (const msg of session) {
      hud.apply(msg, 0);
      if (msg.type === "frame") {
        frames += 1;
        if (msg.u_h[0] * msg.u_a[0] >= 0) main += 1;
        if (msg.u_h[1] * msg.u_a[1] >= 0) side += 1;
      }
    }
    const state = hud.snapshot;
    expect(state.agreeMain).toBe(main);
    expect(state.agreeSide).toBe(side);
    expect(hud.agreementPercent().main).toBeCloseTo((100 * main) / frames, 9);
  });

  it("lands with a banner and a history entry", () => {
    const hud = new CockpitHud();
    for (const msg of session) {
      hud.apply(msg, 0);
    }
    const state = hud.snapshot;
    expect(state.landingBanner).toMatch(/Landed/);
    expect(state.history).toHaveLength(1);
    expect(state.history[0].outcome).toBe("Success");
    expect(state.trialRunning).toBe(false);
  });

  it("echoes the clamp flag from the frame", () => {
    const hud = new CockpitHud();
    const flags: boolean[] = [];
    for (const msg of session) {
      hud.apply(msg, 0);
      if (msg.type === "frame") {
        flags.push(hud.snapshot.inputClamped);
      }
    }
    expect(flags[0]).toBe(true); // the scripted first input was over-range
    expect(flags.some((f) => !f)).toBe(true);
  });
});

describe("staleness", () => {
  it("raises the degraded banner after half a second without frames", () => {
    const hud = new CockpitHud();
    const frame = session.find((m) => m.type === "frame");
    hud.apply(frame!, 1000);
    expect(hud.checkStale(1000 + STALE_AFTER_MS)).toBe(false);
    expect(hud.checkStale(1000 + STALE_AFTER_MS + 1)).toBe(true);
    expect(hud.snapshot.stale).toBe(true);
  });

  it("clears on the next frame", () => {
    const hud = new CockpitHud();
    const frame = session.find((m) => m.type === "frame");
    hud.apply(frame!, 0);
    hud.checkStale(1000);
    hud.apply(frame!, 1100);
    expect(hud.snapshot.stale).toBe(false);
  });
});

describe("error frames", () => {
  it("records the message without disturbing the trial state", () => {
    const hud = new CockpitHud();
    hud.apply({ type: "error", message: "bad input" }, 0);
    expect(hud.snapshot.lastError).toBe("bad input");
  });
});
