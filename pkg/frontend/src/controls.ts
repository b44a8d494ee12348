// Outbound command builders, client-side bounding, keyboard jog, and the
// 30 Hz send rate limit. Values are bounded before they reach the wire:
// grip always in [0, 1], scale always one of 1..5.

export const SCALE_OPTIONS = [1, 2, 3, 4, 5] as const;
export const SEND_INTERVAL_MS = 33; // <= 30 Hz outbound
export const LOCKABLE_AXES = ["x", "y", "z", "rotation"] as const;

// Device workspace: a 160 mm diameter x 110 mm cylinder, axis along x.
const MAX_X_MM = 55;
const MAX_RADIAL_MM = 80;

export interface Jog {
  dx: number;
  dy: number;
  dz: number;
  rx: number;
  ry: number;
  rz: number;
}

export function clampJog(jog: Jog): Jog {
  const dx = Math.min(Math.max(jog.dx, -MAX_X_MM), MAX_X_MM);
  let dy = jog.dy;
  let dz = jog.dz;
  const radial = Math.hypot(dy, dz);
  if (radial > MAX_RADIAL_MM) {
    dy *= MAX_RADIAL_MM / radial;
    dz *= MAX_RADIAL_MM / radial;
  }
  return { dx, dy, dz, rx: jog.rx, ry: jog.ry, rz: jog.rz };
}

export function jogCommand(jog: Jog): string {
  const c = clampJog(jog);
  return JSON.stringify({ type: "jog", ...c });
}

export function gripCommand(value: number): string {
  const bounded = Math.min(Math.max(value, 0), 1);
  return JSON.stringify({ type: "grip", value: bounded });
}

export function scaleCommand(factor: number): string | null {
  if (!SCALE_OPTIONS.includes(factor as (typeof SCALE_OPTIONS)[number])) {
    return null; // never send an out-of-range factor
  }
  return JSON.stringify({ type: "scale", factor });
}

export function lockCommand(axes: string[]): string {
  const valid = axes.filter((a) =>
    (LOCKABLE_AXES as readonly string[]).includes(a),
  );
  return JSON.stringify({ type: "lock", axes: valid });
}

export function trialCommand(action: "start" | "stop"): string {
  return JSON.stringify({ type: "trial", action });
}

export class RateLimiter {
  private lastSentMs = -Infinity;

  constructor(private intervalMs: number = SEND_INTERVAL_MS) {}

  ready(nowMs: number): boolean {
    if (nowMs - this.lastSentMs >= this.intervalMs) {
      this.lastSentMs = nowMs;
      return true;
    }
    return false;
  }
}

// WASD moves in the horizontal plane, Q/E moves Z; holding a key walks the
// held displacement at a fixed speed, mirroring a handle you push and hold.
const KEY_DIRECTIONS: Record<string, [number, number, number]> = {
  w: [1, 0, 0],
  s: [-1, 0, 0],
  a: [0, 1, 0],
  d: [0, -1, 0],
  q: [0, 0, 1],
  e: [0, 0, -1],
};

export class KeyboardJog {
  private held = new Set<string>();
  jog: Jog = { dx: 0, dy: 0, dz: 0, rx: 0, ry: 0, rz: 0 };

  constructor(private speedMmPerS = 40) {}

  keyDown(key: string): boolean {
    const k = key.toLowerCase();
    if (!(k in KEY_DIRECTIONS)) return false;
    this.held.add(k);
    return true;
  }

  keyUp(key: string): void {
    this.held.delete(key.toLowerCase());
  }

  recenter(): void {
    this.jog = { dx: 0, dy: 0, dz: 0, rx: 0, ry: 0, rz: 0 };
  }

  // advances the held displacement by dt and returns whether it moved
  step(dtS: number): boolean {
    if (this.held.size === 0) return false;
    let [dx, dy, dz] = [0, 0, 0];
    for (const k of this.held) {
      const [x, y, z] = KEY_DIRECTIONS[k];
      dx += x;
      dy += y;
      dz += z;
    }
    const step = this.speedMmPerS * dtS;
    this.jog = clampJog({
      ...this.jog,
      dx: this.jog.dx + dx * step,
      dy: this.jog.dy + dy * step,
      dz: this.jog.dz + dz * step,
    });
    return true;
  }
}
