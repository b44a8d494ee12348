// Gateway JSON protocol: message shapes, validation, and the console state
// reducer. Displayed values always mirror the last received message; the
// client never interpolates or resamples.

export type Grid = number[][];

export interface ElectrodeMsg {
  type: "electrode";
  t: number;
  left: Grid;
  right: Grid;
}

export interface TactileMsg {
  type: "tactile";
  t: number;
  left: Grid;
  right: Grid;
}

export interface StateMsg {
  type: "state";
  t: number;
  pose: number[];
  opening: number;
  contact: number | null;
  stale: boolean;
  scale: number;
  locks: string[];
}

export interface ForceMsg {
  type: "force";
  t: number;
  newtons: number;
}

export interface LedgerMsg {
  type: "ledger";
  t: number;
  beaker: number;
  tubes: number[];
  pipette: number;
  spill: number;
}

export interface EventMsg {
  type: "event";
  t: number;
  event: string;
  dispensed_ml?: number;
  relative_error?: number;
  elapsed_s?: number;
}

export interface ErrorMsg {
  type: "error";
  reason: string;
}

export type GatewayMsg =
  | ElectrodeMsg
  | TactileMsg
  | StateMsg
  | ForceMsg
  | LedgerMsg
  | EventMsg
  | ErrorMsg;

export const ELECTRODE_ROWS = 4;
export const ELECTRODE_COLS = 5;
export const TACTILE_ROWS = 10;
export const TACTILE_COLS = 5;
export const STALE_AFTER_MS = 500;

export function isValidGrid(grid: unknown, rows: number, cols: number): grid is Grid {
  if (!Array.isArray(grid) || grid.length !== rows) return false;
  for (const row of grid) {
    if (!Array.isArray(row) || row.length !== cols) return false;
    for (const v of row) {
      if (typeof v !== "number" || !Number.isFinite(v)) return false;
    }
  }
  return true;
}

export interface TrialResult {
  dispensedMl: number;
  relativeError: number;
  elapsedS: number;
}

export interface ConsoleState {
  connected: boolean;
  lastStateAtMs: number | null; // wall time of the last state message
  electrode: { left: Grid; right: Grid } | null;
  tactile: { left: Grid; right: Grid } | null;
  forceN: number;
  pose: number[];
  opening: number;
  contact: number | null;
  scale: number;
  locks: string[];
  serverStale: boolean;
  ledger: LedgerMsg | null;
  trialStartedAtMs: number | null;
  lastResult: TrialResult | null;
  lastError: string | null;
  rejectedGrids: number;
}

export function initialState(): ConsoleState {
  return {
    connected: false,
    lastStateAtMs: null,
    electrode: null,
    tactile: null,
    forceN: 0,
    pose: [0, 0, 0, 0, 0, 0],
    opening: 1,
    contact: null,
    scale: 2,
    locks: [],
    serverStale: false,
    ledger: null,
    trialStartedAtMs: null,
    lastResult: null,
    lastError: null,
    rejectedGrids: 0,
  };
}

// Applies one gateway message; returns false when the message was rejected
// (bad grid shape) so the UI can show an error badge.
export function applyMessage(state: ConsoleState, msg: GatewayMsg, nowMs: number): boolean {
  switch (msg.type) {
    case "electrode":
      if (
        !isValidGrid(msg.left, ELECTRODE_ROWS, ELECTRODE_COLS) ||
        !isValidGrid(msg.right, ELECTRODE_ROWS, ELECTRODE_COLS)
      ) {
        state.rejectedGrids += 1;
        return false;
      }
      state.electrode = { left: msg.left, right: msg.right };
      return true;
    case "tactile":
      if (
        !isValidGrid(msg.left, TACTILE_ROWS, TACTILE_COLS) ||
        !isValidGrid(msg.right, TACTILE_ROWS, TACTILE_COLS)
      ) {
        state.rejectedGrids += 1;
        return false;
      }
      state.tactile = { left: msg.left, right: msg.right };
      return true;
    case "state":
      state.pose = msg.pose;
      state.opening = msg.opening;
      state.contact = msg.contact;
      state.scale = msg.scale;
      state.locks = msg.locks;
      state.serverStale = msg.stale;
      state.lastStateAtMs = nowMs;
      return true;
    case "force":
      state.forceN = msg.newtons;
      return true;
    case "ledger":
      state.ledger = msg;
      return true;
    case "event":
      if (msg.event === "trial_started") {
        state.trialStartedAtMs = nowMs;
        state.lastResult = null;
      } else if (msg.event === "trial_result") {
        state.lastResult = {
          dispensedMl: msg.dispensed_ml ?? 0,
          relativeError: msg.relative_error ?? 0,
          elapsedS: msg.elapsed_s ?? 0,
        };
        state.trialStartedAtMs = null;
      }
      return true;
    case "error":
      state.lastError = msg.reason;
      return true;
    default:
      return true; // unknown types are ignored
  }
}

export function isStale(state: ConsoleState, nowMs: number): boolean {
  if (state.lastStateAtMs === null) return true;
  return state.serverStale || nowMs - state.lastStateAtMs > STALE_AFTER_MS;
}
