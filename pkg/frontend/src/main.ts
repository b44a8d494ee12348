// Page wiring: connect the gateway client to the dashboard widgets and
// the control strip. Display updates ride message arrival; outbound jog
// updates are rate-limited client-side.

import { GatewayClient } from "./client.js";
import {
  KeyboardJog,
  RateLimiter,
  SCALE_OPTIONS,
  gripCommand,
  jogCommand,
  lockCommand,
  scaleCommand,
  trialCommand,
} from "./controls.js";
import { HeatmapView } from "./heatmap.js";
import { ConsoleState, applyMessage, initialState, isStale } from "./protocol.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

// Default scene geometry for the top-down sketch (cosmetic only; the
// numbers mirror the default scenario).
const SKETCH = {
  beaker: { x: 350, y: 0, r: 40 },
  tubes: [
    { x: 350, y: -80, r: 9 },
    { x: 350, y: 80, r: 9 },
  ],
};

export function setupConsole(url: string): void {
  const state: ConsoleState = initialState();

  const electrodeLeft = new HeatmapView(byId("electrode-left"), { vmax: 1, label: "electrode L" });
  const electrodeRight = new HeatmapView(byId("electrode-right"), { vmax: 1, label: "electrode R" });
  const tactileLeft = new HeatmapView(byId("tactile-left"), { vmax: 9, label: "tactile L" });
  const tactileRight = new HeatmapView(byId("tactile-right"), { vmax: 9, label: "tactile R" });

  const status = byId("status");
  const staleBadge = byId("stale-badge");
  const errorBadge = byId("error-badge");
  const forceBar = byId("force-bar");
  const forceValue = byId("force-value");
  const poseText = byId("pose");
  const openingFill = byId("opening-fill");
  const openingValue = byId("opening-value");
  const contactMarker = byId("contact-marker");
  const ledgerText = byId("ledger");
  const timer = byId("timer");
  const result = byId("result");
  const sceneCanvas = byId<HTMLCanvasElement>("scene");

  // scale selector carries exactly the legal factors
  const scaleSelect = byId<HTMLSelectElement>("scale-select");
  for (const factor of SCALE_OPTIONS) {
    const option = document.createElement("option");
    option.value = String(factor);
    option.textContent = `x${factor}`;
    scaleSelect.appendChild(option);
  }

  const client = new GatewayClient(url, {
    onMessage: (msg) => {
      const ok = applyMessage(state, msg, Date.now());
      errorBadge.hidden = ok && state.lastError === null;
      if (state.lastError !== null) {
        errorBadge.textContent = `gateway: ${state.lastError}`;
        state.lastError = null;
        errorBadge.hidden = false;
      } else if (!ok) {
        errorBadge.textContent = `rejected ${state.rejectedGrids} malformed grid(s)`;
      }
      redraw();
    },
    onStatus: (connected) => {
      state.connected = connected;
      status.textContent = connected ? "connected" : "reconnecting…";
      status.className = connected ? "ok" : "bad";
      document.querySelectorAll("button, input, select").forEach((el) => {
        (el as HTMLButtonElement).disabled = !connected;
      });
      redraw();
    },
  });

  function redraw(): void {
    if (state.electrode) {
      electrodeLeft.render(state.electrode.left);
      electrodeRight.render(state.electrode.right);
    }
    if (state.tactile) {
      tactileLeft.render(state.tactile.left);
      tactileRight.render(state.tactile.right);
    }
    forceValue.textContent = `${state.forceN.toFixed(3)} N`;
    forceBar.style.width = `${Math.min(state.forceN / 8, 1) * 100}%`;
    const [x, y, z, rx, ry, rz] = state.pose;
    poseText.textContent =
      `x ${x.toFixed(1)}  y ${y.toFixed(1)}  z ${z.toFixed(1)} mm   ` +
      `rx ${rx.toFixed(1)}  ry ${ry.toFixed(1)}  rz ${rz.toFixed(1)} deg   scale x${state.scale}` +
      (state.locks.length ? `   locks: ${state.locks.join(",")}` : "");
    openingFill.style.width = `${state.opening * 100}%`;
    openingValue.textContent = state.opening.toFixed(3);
    if (state.contact !== null) {
      contactMarker.hidden = false;
      contactMarker.style.left = `${state.contact * 100}%`;
    } else {
      contactMarker.hidden = true;
    }
    if (state.ledger) {
      const tubes = state.ledger.tubes.map((v, i) => `tube${i} ${v.toFixed(3)}`).join("  ");
      ledgerText.textContent =
        `beaker ${state.ledger.beaker.toFixed(2)} ml   ${tubes}   ` +
        `pipette ${state.ledger.pipette.toFixed(3)}   spill ${state.ledger.spill.toFixed(3)}`;
    }
    if (state.lastResult) {
      result.textContent =
        `dispensed ${state.lastResult.dispensedMl.toFixed(3)} ml, ` +
        `error ${(state.lastResult.relativeError * 100).toFixed(1)}%, ` +
        `${state.lastResult.elapsedS.toFixed(1)} s`;
    }
    drawScene();
  }

  function drawScene(): void {
    let ctx: CanvasRenderingContext2D | null = null;
    try {
      ctx = sceneCanvas.getContext("2d");
    } catch {
      return; // no 2D context in headless test DOMs
    }
    if (!ctx) return;
    const w = sceneCanvas.width;
    const h = sceneCanvas.height;
    ctx.clearRect(0, 0, w, h);
    // top-down: world x down the canvas, world y across; 1 px = 1 mm around x=350
    const toPx = (wx: number, wy: number): [number, number] =>
      [w / 2 + wy, h / 2 + (wx - 350)];
    ctx.strokeStyle = "#3d6dd8";
    for (const circle of [SKETCH.beaker, ...SKETCH.tubes]) {
      const [cx, cy] = toPx(circle.x, circle.y);
      ctx.beginPath();
      ctx.arc(cx, cy, circle.r, 0, Math.PI * 2);
      ctx.stroke();
    }
    const [tx, ty] = toPx(state.pose[0], state.pose[1]);
    ctx.fillStyle = isStale(state, Date.now()) ? "#777" : "#ff6040";
    ctx.beginPath();
    ctx.arc(tx, ty, 4, 0, Math.PI * 2);
    ctx.fill();
  }

  // -- controls ------------------------------------------------------

  const keyJog = new KeyboardJog();
  const jogLimiter = new RateLimiter();
  let jogDirty = false;

  const jogSliders = {
    dx: byId<HTMLInputElement>("jog-x"),
    dy: byId<HTMLInputElement>("jog-y"),
    dz: byId<HTMLInputElement>("jog-z"),
  };
  for (const [axis, slider] of Object.entries(jogSliders)) {
    slider.addEventListener("input", () => {
      (keyJog.jog as unknown as Record<string, number>)[axis] = Number(slider.value);
      jogDirty = true;
    });
  }
  byId("jog-reset").addEventListener("click", () => {
    keyJog.recenter();
    for (const slider of Object.values(jogSliders)) slider.value = "0";
    jogDirty = true;
  });

  document.addEventListener("keydown", (event) => {
    if (keyJog.keyDown(event.key)) event.preventDefault();
  });
  document.addEventListener("keyup", (event) => keyJog.keyUp(event.key));

  const gripSlider = byId<HTMLInputElement>("grip-slider");
  gripSlider.addEventListener("input", () => {
    client.send(gripCommand(Number(gripSlider.value)));
    byId("grip-value").textContent = Number(gripSlider.value).toFixed(3);
  });

  scaleSelect.addEventListener("change", () => {
    const command = scaleCommand(Number(scaleSelect.value));
    if (command) client.send(command);
  });

  const lockBoxes = ["x", "y", "z", "rotation"].map((axis) =>
    byId<HTMLInputElement>(`lock-${axis}`),
  );
  for (const box of lockBoxes) {
    box.addEventListener("change", () => {
      const axes = lockBoxes.filter((b) => b.checked).map((b) => b.id.slice(5));
      client.send(lockCommand(axes));
    });
  }

  byId("trial-start").addEventListener("click", () => client.send(trialCommand("start")));
  byId("trial-stop").addEventListener("click", () => client.send(trialCommand("stop")));

  // 20 Hz housekeeping: keyboard jog integration, rate-limited jog sends,
  // stale badge, trial timer
  setInterval(() => {
    const moved = keyJog.step(0.05);
    if (moved) {
      for (const [axis, slider] of Object.entries(jogSliders)) {
        slider.value = String((keyJog.jog as unknown as Record<string, number>)[axis]);
      }
    }
    if ((moved || jogDirty) && jogLimiter.ready(Date.now())) {
      client.send(jogCommand(keyJog.jog));
      jogDirty = false;
    }
    staleBadge.hidden = !isStale(state, Date.now());
    if (state.trialStartedAtMs !== null) {
      timer.textContent = `${((Date.now() - state.trialStartedAtMs) / 1000).toFixed(1)} s`;
    }
    drawScene();
  }, 50);

  client.connect();
}

declare global {
  interface Window {
    TELEHAPTIC_GATEWAY?: string;
  }
}
