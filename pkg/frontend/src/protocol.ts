/**
 * Wire protocol spoken with the bridge: newline-terminated JSON frames over
 * a WebSocket. The server is authoritative; the cockpit only ever sends
 * hello, trial control and stick input.
 */

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];
export type LanderStateArray = [number, number, number, number, number, number];

export interface WelcomeMessage {
  type: "welcome";
  version: number;
  session: string;
  conditions: string[];
}

export interface TrialStartedMessage {
  type: "trial_started";
  condition: string;
  trial: number;
}

export interface FrameMessage {
  type: "frame";
  t: number;
  condition: string;
  trial: number;
  /** x, y, theta, vx, vy, omega */
  state: LanderStateArray;
  u_h: Vec2;
  u_h_clamped: boolean;
  u_a: Vec2;
  u_out: Vec2;
  admitted: boolean;
  status: string;
}

export interface TrialEndMessage {
  type: "trial_end";
  outcome: string;
  duration: number;
  trial: number;
}

export interface ConditionMessage {
  type: "condition";
  condition: string;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage =
  | WelcomeMessage
  | TrialStartedMessage
  | FrameMessage
  | TrialEndMessage
  | ConditionMessage
  | ErrorMessage;

export type ClientMessage =
  | { type: "hello"; version: number }
  | { type: "start_trial"; condition: string }
  | { type: "input"; u1: number; u2: number }
  | { type: "abort" }
  | { type: "switch_condition"; condition: string };

export class ProtocolError extends Error {}

function expectNumber(obj: Record<string, unknown>, key: string): number {
  const v = obj[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError(`field ${key} must be a finite number`);
  }
  return v;
}

function expectString(obj: Record<string, unknown>, key: string): string {
  const v = obj[key];
  if (typeof v !== "string") {
    throw new ProtocolError(`field ${key} must be a string`);
  }
  return v;
}

function expectBoolean(obj: Record<string, unknown>, key: string): boolean {
  const v = obj[key];
  if (typeof v !== "boolean") {
    throw new ProtocolError(`field ${key} must be a boolean`);
  }
  return v;
}

function expectNumbers(obj: Record<string, unknown>, key: string, n: number): number[] {
  const v = obj[key];
  if (!Array.isArray(v) || v.length !== n
      || !v.every((x) => typeof x === "number" && Number.isFinite(x))) {
    throw new ProtocolError(`field ${key} must be ${n} finite numbers`);
  }
  return v as number[];
}

/** Parse and validate one server line; throws ProtocolError on junk. */
export function decodeServer(line: string): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 60)}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("frame must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  switch (rec.type) {
    case "welcome": {
      const conditions = rec.conditions;
      if (!Array.isArray(conditions) || !conditions.every((c) => typeof c === "string")) {
        throw new ProtocolError("welcome.conditions must be strings");
      }
      return {
        type: "welcome",
        version: expectNumber(rec, "version"),
        session: expectString(rec, "session"),
        conditions: conditions as string[],
      };
    }
    case "trial_started":
      return {
        type: "trial_started",
        condition: expectString(rec, "condition"),
        trial: expectNumber(rec, "trial"),
      };
    case "frame":
      return {
        type: "frame",
        t: expectNumber(rec, "t"),
        condition: expectString(rec, "condition"),
        trial: expectNumber(rec, "trial"),
        state: expectNumbers(rec, "state", 6) as LanderStateArray,
        u_h: expectNumbers(rec, "u_h", 2) as Vec2,
        u_h_clamped: expectBoolean(rec, "u_h_clamped"),
        u_a: expectNumbers(rec, "u_a", 2) as Vec2,
        u_out: expectNumbers(rec, "u_out", 2) as Vec2,
        admitted: expectBoolean(rec, "admitted"),
        status: expectString(rec, "status"),
      };
    case "trial_end":
      return {
        type: "trial_end",
        outcome: expectString(rec, "outcome"),
        duration: expectNumber(rec, "duration"),
        trial: expectNumber(rec, "trial"),
      };
    case "condition":
      return { type: "condition", condition: expectString(rec, "condition") };
    case "error":
      return { type: "error", message: expectString(rec, "message") };
    default:
      throw new ProtocolError(`unknown server frame type ${String(rec.type)}`);
  }
}

/** Serialize a client message as one newline-terminated line. */
export function encodeClient(msg: ClientMessage): string {
  return JSON.stringify(msg) + "\n";
}
