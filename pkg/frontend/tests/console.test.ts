// @vitest-environment jsdom
//
// Widget-level tests against the real page markup with a mocked socket:
// heatmap fidelity, reducer behavior, command bounding, scale options.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  KeyboardJog,
  RateLimiter,
  SCALE_OPTIONS,
  clampJog,
  gripCommand,
  jogCommand,
  lockCommand,
  scaleCommand,
} from "../src/controls.js";
import { HeatmapView, cellColor } from "../src/heatmap.js";
import { applyMessage, initialState, isStale } from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));

function loadPage(): void {
  const html = readFileSync(join(here, "..", "index.html"), "utf-8");
  const body = html.slice(html.indexOf("<body>") + 6, html.indexOf("</body>"));
  document.body.innerHTML = body.replace(/<script[\s\S]*?<\/script>/g, "");
}

class MockWebSocket {
  static OPEN = 1;
  static instances: MockWebSocket[] = [];
  readyState = 0;
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(public url: string) {
    MockWebSocket.instances.push(this);
  }

  open(): void {
    this.readyState = MockWebSocket.OPEN;
    this.onopen?.();
  }

  receive(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

function zeros(rows: number, cols: number): number[][] {
  return Array.from({ length: rows }, () => Array(cols).fill(0));
}

describe("heatmap", () => {
  it("renders an all-zero pattern as uniform background", () => {
    const view = new HeatmapView(document.createElement("div"), { vmax: 1, label: "t" });
    view.render(zeros(4, 5));
    const colors = new Set(
      Array.from(view.root.children).map(
        (c) => (c as HTMLElement).style.backgroundColor,
      ),
    );
    expect(colors.size).toBe(1);
    expect(colors.values().next().value).toBe(cellColor(0, 1));
  });

  it("puts a single saturated cell exactly at its index", () => {
    const view = new HeatmapView(document.createElement("div"), { vmax: 1, label: "t" });
    const grid = zeros(4, 5);
    grid[2][3] = 1.0;
    view.render(grid);
    const saturated = Array.from(view.root.children).filter(
      (c) => (c as HTMLElement).style.backgroundColor === cellColor(1, 1),
    );
    expect(saturated.length).toBe(1);
    const cell = saturated[0] as HTMLElement;
    expect(cell.dataset.row).toBe("2");
    expect(cell.dataset.col).toBe("3");
  });

  it("mirrors rendered values cell for cell", () => {
    const view = new HeatmapView(document.createElement("div"), { vmax: 1, label: "t" });
    const grid = [
      [0, 0.25, 0.5, 0.75, 1],
      [0.1, 0.2, 0.3, 0.4, 0.5],
      [1, 1, 1, 0, 0],
      [0, 0, 0, 0, 0.001],
    ];
    view.render(grid);
    expect(view.values()).toEqual(grid);
  });
});

describe("state reducer", () => {
  it("rejects an electrode grid with the wrong cell count", () => {
    const state = initialState();
    const bad = { type: "electrode", t: 1, left: zeros(4, 4), right: zeros(4, 5) };
    expect(applyMessage(state, bad as never, 0)).toBe(false);
    expect(state.rejectedGrids).toBe(1);
    expect(state.electrode).toBeNull();
  });

  it("keeps the last received numerics verbatim", () => {
    const state = initialState();
    applyMessage(
      state,
      {
        type: "state", t: 5, pose: [351.5, 0, 280, 0, 0, 0],
        opening: 0.1234, contact: 0.141, stale: false, scale: 3, locks: ["x"],
      },
      1000,
    );
    applyMessage(state, { type: "force", t: 5, newtons: 0.0521 }, 1000);
    expect(state.opening).toBe(0.1234);
    expect(state.forceN).toBe(0.0521);
    expect(state.scale).toBe(3);
    expect(state.locks).toEqual(["x"]);
  });

  it("flags staleness after 500 ms without a state message", () => {
    const state = initialState();
    expect(isStale(state, 0)).toBe(true);
    applyMessage(
      state,
      { type: "state", t: 1, pose: [0, 0, 0, 0, 0, 0], opening: 1, contact: null,
        stale: false, scale: 2, locks: [] },
      1000,
    );
    expect(isStale(state, 1400)).toBe(false);
    expect(isStale(state, 1501)).toBe(true);
  });
});

describe("command bounding", () => {
  it("grip values always land in [0, 1]", () => {
    expect(JSON.parse(gripCommand(1.5)).value).toBe(1);
    expect(JSON.parse(gripCommand(-0.2)).value).toBe(0);
    expect(JSON.parse(gripCommand(0.5)).value).toBe(0.5);
  });

  it("scale factors outside 1..5 are never sent", () => {
    expect(scaleCommand(0)).toBeNull();
    expect(scaleCommand(6)).toBeNull();
    expect(scaleCommand(2.5)).toBeNull();
    for (const factor of SCALE_OPTIONS) {
      expect(JSON.parse(scaleCommand(factor)!)).toEqual({ type: "scale", factor });
    }
  });

  it("jog displacement clamps to the device cylinder", () => {
    const clamped = clampJog({ dx: 90, dy: 80, dz: 80, rx: 0, ry: 0, rz: 0 });
    expect(clamped.dx).toBe(55);
    expect(Math.hypot(clamped.dy, clamped.dz)).toBeCloseTo(80, 9);
    const json = JSON.parse(jogCommand({ dx: -90, dy: 0, dz: 0, rx: 0, ry: 0, rz: 0 }));
    expect(json.dx).toBe(-55);
  });

  it("lock command drops unknown axes", () => {
    expect(JSON.parse(lockCommand(["x", "bogus", "rotation"])).axes)
      .toEqual(["x", "rotation"]);
  });

  it("rate limiter holds sends to one per interval", () => {
    const limiter = new RateLimiter(33);
    expect(limiter.ready(0)).toBe(true);
    expect(limiter.ready(10)).toBe(false);
    expect(limiter.ready(32)).toBe(false);
    expect(limiter.ready(33)).toBe(true);
  });

  it("keyboard jog walks and recenters", () => {
    const jog = new KeyboardJog(40);
    expect(jog.keyDown("w")).toBe(true);
    expect(jog.keyDown("p")).toBe(false);
    jog.step(0.5);
    expect(jog.jog.dx).toBeCloseTo(20);
    jog.keyUp("w");
    jog.keyDown("q");
    jog.step(0.25);
    expect(jog.jog.dz).toBeCloseTo(10);
    jog.recenter();
    expect(jog.jog).toEqual({ dx: 0, dy: 0, dz: 0, rx: 0, ry: 0, rz: 0 });
  });
});

describe("page wiring", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    loadPage();
    MockWebSocket.instances = [];
    (globalThis as Record<string, unknown>).WebSocket = MockWebSocket;
  });

  async function setup(): Promise<MockWebSocket> {
    const { setupConsole } = await import("../src/main.js");
    setupConsole("ws://test");
    const ws = MockWebSocket.instances.at(-1)!;
    ws.open();
    return ws;
  }

  it("scale selector offers exactly x1..x5", async () => {
    await setup();
    const select = document.getElementById("scale-select") as HTMLSelectElement;
    const values = Array.from(select.options).map((o) => o.value);
    expect(values).toEqual(["1", "2", "3", "4", "5"]);
  });

  it("renders an incoming electrode pattern cell for cell", async () => {
    const ws = await setup();
    const left = zeros(4, 5);
    left[1][2] = 0.42;
    left[3][4] = 1.0;
    const right = zeros(4, 5);
    right[0][0] = 0.77;
    ws.receive({ type: "electrode", t: 1, left, right });
    const readBack = (id: string) =>
      Array.from({ length: 4 }, (_, r) =>
        Array.from({ length: 5 }, (_, c) => {
          const cell = document.querySelector(
            `#${id} [data-row="${r}"][data-col="${c}"]`,
          ) as HTMLElement;
          return Number(cell.dataset.value);
        }),
      );
    expect(readBack("electrode-left")).toEqual(left);
    expect(readBack("electrode-right")).toEqual(right);
  });

  it("grip slider emits a bounded grip command", async () => {
    const ws = await setup();
    const slider = document.getElementById("grip-slider") as HTMLInputElement;
    slider.value = "0.5";
    slider.dispatchEvent(new Event("input"));
    const sent = ws.sent.map((s) => JSON.parse(s));
    expect(sent).toContainEqual({ type: "grip", value: 0.5 });
  });

  it("disconnect disables the controls", async () => {
    const ws = await setup();
    ws.close();
    const button = document.getElementById("trial-start") as HTMLButtonElement;
    expect(button.disabled).toBe(true);
  });

  it("gateway error surfaces in the badge", async () => {
    const ws = await setup();
    ws.receive({ type: "error", reason: "scale factor 7 outside 1..5" });
    const badge = document.getElementById("error-badge") as HTMLElement;
    expect(badge.hidden).toBe(false);
    expect(badge.textContent).toContain("outside 1..5");
  });
});
