/**
 * Scene construction and painting.
 *
 * buildScene is pure: it turns the latest (possibly interpolated) frame and
 * the HUD state into a draw list, which paint() rasterizes onto a canvas.
 * Interpolation between the two newest frames smooths the 10 Hz stream up
 * to the display rate; sampling is clamped at the newest frame so the view
 * never runs ahead of the authoritative state.
 */

import type { FrameMessage, LanderStateArray } from "./protocol.js";
import type { HudState } from "./hud.js";

export const WORLD_W = 20;
export const WORLD_H = 16;
export const GOAL_RADIUS = 0.9;

export interface Viewport {
  width: number;
  height: number;
}

export type DrawCommand =
  | { kind: "clear"; color: string }
  | { kind: "circle"; x: number; y: number; r: number; color: string; fill: boolean }
  | { kind: "polygon"; points: Array<[number, number]>; color: string; fill: boolean }
  | { kind: "text"; x: number; y: number; text: string; color: string; size: number }
  | { kind: "banner"; text: string; color: string };

/** Uniform world-to-screen scale with letterboxing, y up. */
export function worldToScreen(
  x: number,
  y: number,
  vp: Viewport,
): [number, number] {
  const scale = Math.min(vp.width / WORLD_W, vp.height / WORLD_H);
  const offX = (vp.width - WORLD_W * scale) / 2;
  const offY = (vp.height - WORLD_H * scale) / 2;
  return [offX + x * scale, vp.height - offY - y * scale];
}

function landerPolygon(
  state: LanderStateArray,
  vp: Viewport,
): Array<[number, number]> {
  const [x, y, theta] = state;
  const body: Array<[number, number]> = [
    [0.0, 0.62],
    [-0.45, 0.1],
    [-0.45, -0.5],
    [0.45, -0.5],
    [0.45, 0.1],
  ];
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  return body.map(([bx, by]) =>
    worldToScreen(x + bx * c - by * s, y + bx * s + by * c, vp),
  );
}

function flamePolygon(
  state: LanderStateArray,
  length: number,
  offsetX: number,
  vp: Viewport,
): Array<[number, number]> {
  const [x, y, theta] = state;
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const base: Array<[number, number]> = [
    [offsetX - 0.16, -0.5],
    [offsetX + 0.16, -0.5],
    [offsetX, -0.5 - length],
  ];
  return base.map(([bx, by]) =>
    worldToScreen(x + bx * c - by * s, y + bx * s + by * c, vp),
  );
}

/** Build the draw list for one display tick. */
export function buildScene(
  frame: FrameMessage | null,
  hud: HudState,
  vp: Viewport,
  goal: [number, number] = [10.0, 6.0],
): DrawCommand[] {
  const scale = Math.min(vp.width / WORLD_W, vp.height / WORLD_H);
  const commands: DrawCommand[] = [{ kind: "clear", color: "#0b0e17" }];
  const [gx, gy] = worldToScreen(goal[0], goal[1], vp);
  commands.push({ kind: "circle", x: gx, y: gy, r: GOAL_RADIUS * scale, color: "#27c93f", fill: false });
  if (frame) {
    // thruster plumes scale with what actually reached the plant
    const [u1, u2] = frame.u_out;
    if (u1 > 0) {
      commands.push({
        kind: "polygon",
        points: flamePolygon(frame.state, 0.4 + 1.2 * u1, 0, vp),
        color: "#ff5533",
        fill: true,
      });
    }
    if (u2 !== 0) {
      // side plume on the engine that fires: left engine for negative u2
      const side = u2 < 0 ? -0.45 : 0.45;
      commands.push({
        kind: "polygon",
        points: flamePolygon(frame.state, 0.25 + 0.6 * Math.abs(u2), side, vp),
        color: "#ff8844",
        fill: true,
      });
    }
    commands.push({
      kind: "polygon",
      points: landerPolygon(frame.state, vp),
      color: hud.blocked ? "#ff3355" : "#cfd8ff",
      fill: true,
    });
    if (hud.blocked) {
      commands.push({ kind: "banner", text: "INPUT BLOCKED", color: "#ff3355" });
    }
  }
  if (hud.stale) {
    commands.push({ kind: "banner", text: "CONNECTION DEGRADED", color: "#ffaa00" });
  }
  if (hud.landingBanner) {
    commands.push({ kind: "banner", text: hud.landingBanner, color: "#27c93f" });
  }
  return commands;
}

/**
 * Holds the two newest frames and samples the shown state by arrival time;
 * requests beyond the newest frame return it unchanged (no extrapolation).
 */
export class FrameBuffer {
  private prev: { frame: FrameMessage; atMs: number } | null = null;
  private next: { frame: FrameMessage; atMs: number } | null = null;

  push(frame: FrameMessage, atMs: number): void {
    this.prev = this.next;
    this.next = { frame, atMs };
  }

  get newest(): FrameMessage | null {
    return this.next?.frame ?? null;
  }

  sampleAt(tMs: number): FrameMessage | null {
    if (!this.next) {
      return null;
    }
    if (!this.prev || tMs >= this.next.atMs) {
      return this.next.frame;
    }
    if (tMs <= this.prev.atMs) {
      return this.prev.frame;
    }
    const span = this.next.atMs - this.prev.atMs;
    const alpha = span > 0 ? (tMs - this.prev.atMs) / span : 1;
    const a = this.prev.frame.state;
    const b = this.next.frame.state;
    const state = a.map((v, i) => v + alpha * (b[i] - v)) as LanderStateArray;
    return { ...this.next.frame, state };
  }

  isStale(nowMs: number, thresholdMs = 500): boolean {
    return this.next !== null && nowMs - this.next.atMs > thresholdMs;
  }
}

/** Rasterize a draw list onto a 2D canvas context. */
export function paint(
  ctx: CanvasRenderingContext2D,
  commands: DrawCommand[],
  vp: Viewport,
): void {
  for (const cmd of commands) {
    switch (cmd.kind) {
      case "clear":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(0, 0, vp.width, vp.height);
        break;
      case "circle":
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, cmd.r, 0, Math.PI * 2);
        if (cmd.fill) {
          ctx.fillStyle = cmd.color;
          ctx.fill();
        } else {
          ctx.strokeStyle = cmd.color;
          ctx.lineWidth = 2;
          ctx.stroke();
        }
        break;
      case "polygon": {
        ctx.beginPath();
        const [first, ...rest] = cmd.points;
        ctx.moveTo(first[0], first[1]);
        for (const [px, py] of rest) {
          ctx.lineTo(px, py);
        }
        ctx.closePath();
        if (cmd.fill) {
          ctx.fillStyle = cmd.color;
          ctx.fill();
        } else {
          ctx.strokeStyle = cmd.color;
          ctx.stroke();
        }
        break;
      }
      case "text":
        ctx.fillStyle = cmd.color;
        ctx.font = `${cmd.size}px monospace`;
        ctx.fillText(cmd.text, cmd.x, cmd.y);
        break;
      case "banner":
        ctx.fillStyle = cmd.color;
        ctx.font = "bold 22px monospace";
        ctx.textAlign = "center";
        ctx.fillText(cmd.text, vp.width / 2, 40);
        ctx.textAlign = "start";
        break;
    }
  }
}
