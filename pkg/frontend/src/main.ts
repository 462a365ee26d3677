/**
 * Browser bootstrap: connects to the bridge named in the URL query
 * (?host=..&port=..), pumps gamepad/keyboard input every animation tick and
 * paints the authoritative stream onto the canvas.
 */

import { CockpitClient, bridgeUrl } from "./client.js";
import { CockpitHud, HudState } from "./hud.js";
import { InputSource } from "./input.js";
import { FrameBuffer, buildScene, paint } from "./render.js";

const INTERPOLATION_DELAY_MS = 100; // one frame period behind the newest

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("scene");
  const maybeCtx = canvas.getContext("2d");
  if (!maybeCtx) {
    throw new Error("canvas 2d context unavailable");
  }
  const ctx: CanvasRenderingContext2D = maybeCtx;
  const vp = { width: canvas.width, height: canvas.height };
  const hud = new CockpitHud();
  const buffer = new FrameBuffer();
  const input = new InputSource();
  input.attachKeyboard(window as unknown as Parameters<InputSource["attachKeyboard"]>[0]);

  const ws = new WebSocket(bridgeUrl(window.location.search));
  const client = new CockpitClient(
    { send: (d) => ws.send(d), close: () => ws.close() },
    {
      onMessage: (msg) => {
        hud.apply(msg, performance.now());
        if (msg.type === "frame") {
          buffer.push(msg, performance.now());
        }
        if (msg.type === "welcome") {
          const select = el<HTMLSelectElement>("condition");
          select.innerHTML = "";
          for (const condition of msg.conditions) {
            const option = document.createElement("option");
            option.value = condition;
            option.textContent = condition;
            select.appendChild(option);
          }
        }
        if (msg.type === "error") {
          console.warn("bridge:", msg.message);
        }
      },
      onProtocolError: (err) => console.error("protocol:", err.message),
    },
  );
  ws.addEventListener("open", () => client.hello());
  ws.addEventListener("message", (ev) => client.handleRaw(String(ev.data)));
  ws.addEventListener("close", () => hud.checkStale(Number.POSITIVE_INFINITY));

  el<HTMLButtonElement>("start").addEventListener("click", () => {
    const condition = el<HTMLSelectElement>("condition").value;
    client.startTrial(condition);
  });
  el<HTMLButtonElement>("abort").addEventListener("click", () => client.abort());
  window.addEventListener("gamepadconnected", () => pollGamepad());
  window.addEventListener("gamepaddisconnected", () => input.setGamepad(null));

  function pollGamepad(): void {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = [...pads].find((p) => p && p.connected) ?? null;
    input.setGamepad(pad ? { connected: pad.connected, axes: pad.axes } : null);
  }

  function tick(): void {
    pollGamepad();
    const { u1, u2 } = input.sample();
    if (hud.snapshot.trialRunning) {
      client.sendInput(u1, u2);
    }
    const now = performance.now();
    hud.checkStale(now);
    const frame = buffer.sampleAt(now - INTERPOLATION_DELAY_MS);
    const state = hud.snapshot;
    paint(ctx, buildScene(frame, state, vp), vp);
    renderHudText(state);
    requestAnimationFrame(tick);
  }

  function renderHudText(state: HudState): void {
    el("status").textContent = state.status;
    el("distance").textContent =
      state.distanceToGoal === null ? "-" : state.distanceToGoal.toFixed(2);
    el("velocity").textContent =
      state.vx === null ? "-" : `${state.vx.toFixed(2)} / ${state.vy?.toFixed(2)}`;
    const pct = hud.agreementPercent();
    el("agreement").textContent =
      `${pct.main.toFixed(0)}% / ${pct.side.toFixed(0)}%`;
    el("blocked").textContent = state.blocked ? "BLOCKED" : "pass";
    el("warning").textContent = input.deviceLost ? "input device lost" : "";
    el("history").textContent = state.history
      .map((h) => `#${h.trial} ${h.condition}: ${h.outcome}`)
      .join("  |  ");
  }

  requestAnimationFrame(tick);
}

window.addEventListener("DOMContentLoaded", main);
