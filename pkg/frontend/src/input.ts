/**
 * Stick and keyboard capture.
 *
 * The dominant-hand stick's vertical axis throttles the main engine
 * (forward = full burn, u1 in [0, 1]); the opposite stick's horizontal axis
 * drives the rotational thrusters (left = negative = left engine). Keyboard
 * fallback is hold-to-thrust. Both go through a 5% deadzone.
 */

export const DEADZONE = 0.05;

export interface StickSample {
  u1: number;
  u2: number;
}

/** Zero inside the deadzone, rescaled to preserve full deflection. */
export function applyDeadzone(value: number, deadzone: number = DEADZONE): number {
  const magnitude = Math.abs(value);
  if (magnitude < deadzone) {
    return 0;
  }
  const scaled = (magnitude - deadzone) / (1 - deadzone);
  return Math.sign(value) * Math.min(scaled, 1);
}

/**
 * Map standard-layout gamepad axes (0/1 left stick x/y, 2/3 right stick
 * x/y; forward is negative y) to a thruster sample.
 */
export function mapGamepadAxes(
  axes: readonly number[],
  dominantHand: "right" | "left" = "right",
): StickSample {
  const mainAxis = dominantHand === "right" ? axes[3] ?? 0 : axes[1] ?? 0;
  const sideAxis = dominantHand === "right" ? axes[0] ?? 0 : axes[2] ?? 0;
  const u1 = Math.max(0, applyDeadzone(-mainAxis));
  const u2 = applyDeadzone(sideAxis);
  return { u1, u2 };
}

const THRUST_KEYS = new Set(["KeyW", "ArrowUp", "Space"]);
const LEFT_KEYS = new Set(["KeyA", "ArrowLeft"]);
const RIGHT_KEYS = new Set(["KeyD", "ArrowRight"]);

/** Hold-to-thrust keyboard state. */
export class KeyboardState {
  private down = new Set<string>();

  keyDown(code: string): void {
    this.down.add(code);
  }

  keyUp(code: string): void {
    this.down.delete(code);
  }

  clear(): void {
    this.down.clear();
  }

  sample(): StickSample {
    const thrust = [...THRUST_KEYS].some((k) => this.down.has(k)) ? 1 : 0;
    let side = 0;
    if ([...LEFT_KEYS].some((k) => this.down.has(k))) side -= 1;
    if ([...RIGHT_KEYS].some((k) => this.down.has(k))) side += 1;
    return { u1: thrust, u2: side };
  }
}

export interface GamepadLike {
  connected: boolean;
  axes: readonly number[];
}

/**
 * Combined source: prefers a connected gamepad, falls back to the keyboard,
 * and reports device loss so the cockpit can warn and zero its output.
 */
export class InputSource {
  private keyboard = new KeyboardState();
  private gamepad: GamepadLike | null = null;
  private hadGamepad = false;
  deviceLost = false;

  attachKeyboard(target: {
    addEventListener(type: string, cb: (ev: { code: string }) => void): void;
  }): void {
    target.addEventListener("keydown", (ev) => this.keyboard.keyDown(ev.code));
    target.addEventListener("keyup", (ev) => this.keyboard.keyUp(ev.code));
  }

  setGamepad(pad: GamepadLike | null): void {
    if (this.hadGamepad && (pad === null || !pad.connected)) {
      this.deviceLost = true;
    }
    if (pad?.connected) {
      this.hadGamepad = true;
      this.deviceLost = false;
    }
    this.gamepad = pad;
  }

  get keyboardState(): KeyboardState {
    return this.keyboard;
  }

  sample(dominantHand: "right" | "left" = "right"): StickSample {
    if (this.deviceLost) {
      return { u1: 0, u2: 0 };
    }
    if (this.gamepad?.connected) {
      return mapGamepadAxes(this.gamepad.axes, dominantHand);
    }
    return this.keyboard.sample();
  }
}
