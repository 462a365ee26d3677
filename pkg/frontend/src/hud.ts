/**
 * Cockpit view model. Everything shown on screen is derived from the
 * server's authoritative frames; nothing here simulates physics.
 */

import type {
  FrameMessage,
  ServerMessage,
  TrialEndMessage,
  WelcomeMessage,
} from "./protocol.js";

export const STALE_AFTER_MS = 500;

export interface TrialHistoryEntry {
  trial: number;
  condition: string;
  outcome: string;
  duration: number;
}

export interface HudState {
  connected: boolean;
  sessionId: string | null;
  conditions: string[];
  condition: string | null;
  trial: number | null;
  status: string;
  distanceToGoal: number | null;
  vx: number | null;
  vy: number | null;
  speed: number | null;
  heading: number | null;
  /** direct mapping of the authoritative frame's admitted flag */
  blocked: boolean;
  inputClamped: boolean;
  agreeMain: number;
  agreeSide: number;
  framesSeen: number;
  stale: boolean;
  trialRunning: boolean;
  landingBanner: string | null;
  lastError: string | null;
  history: TrialHistoryEntry[];
}

export class CockpitHud {
  private goal: [number, number];
  private state: HudState;
  private lastFrameAt: number | null = null;
  private lastFrame: FrameMessage | null = null;

  constructor(goal: [number, number] = [10.0, 6.0]) {
    this.goal = goal;
    this.state = {
      connected: false,
      sessionId: null,
      conditions: [],
      condition: null,
      trial: null,
      status: "Idle",
      distanceToGoal: null,
      vx: null,
      vy: null,
      speed: null,
      heading: null,
      blocked: false,
      inputClamped: false,
      agreeMain: 0,
      agreeSide: 0,
      framesSeen: 0,
      stale: false,
      trialRunning: false,
      landingBanner: null,
      lastError: null,
      history: [],
    };
  }

  get snapshot(): HudState {
    return { ...this.state, history: [...this.state.history] };
  }

  get frame(): FrameMessage | null {
    return this.lastFrame;
  }

  apply(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "welcome":
        this.applyWelcome(msg);
        break;
      case "trial_started":
        this.state.condition = msg.condition;
        this.state.trial = msg.trial;
        this.state.trialRunning = true;
        this.state.landingBanner = null;
        this.state.status = "Running";
        break;
      case "frame":
        this.applyFrame(msg, nowMs);
        break;
      case "trial_end":
        this.applyTrialEnd(msg);
        break;
      case "condition":
        this.state.condition = msg.condition;
        break;
      case "error":
        this.state.lastError = msg.message;
        break;
    }
  }

  private applyWelcome(msg: WelcomeMessage): void {
    this.state.connected = true;
    this.state.sessionId = msg.session;
    this.state.conditions = msg.conditions;
  }

  private applyFrame(frame: FrameMessage, nowMs: number): void {
    const [x, y, theta, vx, vy] = frame.state;
    this.state.condition = frame.condition;
    this.state.trial = frame.trial;
    this.state.status = frame.status;
    this.state.distanceToGoal = Math.hypot(x - this.goal[0], y - this.goal[1]);
    this.state.vx = vx;
    this.state.vy = vy;
    this.state.speed = Math.hypot(vx, vy);
    this.state.heading = theta;
    this.state.blocked = !frame.admitted;
    this.state.inputClamped = frame.u_h_clamped;
    if (frame.u_h[0] * frame.u_a[0] >= 0) this.state.agreeMain += 1;
    if (frame.u_h[1] * frame.u_a[1] >= 0) this.state.agreeSide += 1;
    this.state.framesSeen += 1;
    this.state.stale = false;
    this.lastFrameAt = nowMs;
    this.lastFrame = frame;
  }

  private applyTrialEnd(msg: TrialEndMessage): void {
    this.state.trialRunning = false;
    this.state.status = msg.outcome;
    this.state.landingBanner =
      msg.outcome === "Success"
        ? `Landed in ${msg.duration.toFixed(1)} s`
        : `Trial over: ${msg.outcome}`;
    this.state.history = [
      ...this.state.history,
      {
        trial: msg.trial,
        condition: this.state.condition ?? "?",
        outcome: msg.outcome,
        duration: msg.duration,
      },
    ];
  }

  /** Fraction of frames whose per-axis signs agreed, as percentages. */
  agreementPercent(): { main: number; side: number } {
    const n = Math.max(this.state.framesSeen, 1);
    return {
      main: (100 * this.state.agreeMain) / n,
      side: (100 * this.state.agreeSide) / n,
    };
  }

  /** Degrades the display when no frame has arrived recently. */
  checkStale(nowMs: number): boolean {
    if (this.lastFrameAt !== null && nowMs - this.lastFrameAt > STALE_AFTER_MS) {
      this.state.stale = true;
    }
    return this.state.stale;
  }
}
