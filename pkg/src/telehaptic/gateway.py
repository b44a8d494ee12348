"""JSON WebSocket gateway between the master endpoint and the operator console.

Outbound: tactile / electrode / state / force / ledger / event snapshots,
decimated to at most 30 Hz per client. Inbound: jog, grip, scale, lock and
trial commands; jog values are treated as the haptic handle displacement.
Malformed JSON earns an error reply; unknown message types are ignored
with a logged warning.

The protocol itself lives in two pure functions (build_outbound,
handle_inbound) so it is testable without sockets; serve_gateway wraps
them in a threaded WebSocket server.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from typing import Dict, List, Optional

from . import protocol as wire
from .control import Axis
from .endpoints import MasterEndpoint, OperatorAction
from .scenario import ScenarioSpec
from .tactile import Finger

log = logging.getLogger(__name__)

DEFAULT_UI_PORT = 8765
OUTBOUND_PERIOD_S = 1.0 / 30.0  # decimation ceiling
STALE_AFTER_US = 500_000


class GatewayOperator:
    """Thread-safe operator mailbox driven by console commands.

    The master control loop polls it; WebSocket handlers update it. The
    last jog is held (position-mode mapping), grip likewise.
    """

    def __init__(self, spec: ScenarioSpec):
        self._lock = threading.Lock()
        self._displacement = (0.0, 0.0, 0.0)
        self._tilt = (0.0, 0.0, 0.0)
        self._grip = 1.0
        self._scale: Optional[int] = None
        self._lock_mask: Optional[frozenset] = None
        self.done = False
        self.done_at_us = None
        self.trial_started_us: Optional[int] = None
        self.trial_events: List[dict] = []
        if spec.start_grasped:
            gap = spec.outer_diameter_mm / spec.gripper_max_gap_mm
            self._grip = gap

    # -- console side ------------------------------------------------------

    def set_jog(self, dx, dy, dz, rx=0.0, ry=0.0, rz=0.0) -> None:
        with self._lock:
            self._displacement = (float(dx), float(dy), float(dz))
            self._tilt = (float(rx), float(ry), float(rz))

    def set_grip(self, value: float) -> None:
        with self._lock:
            self._grip = min(max(float(value), 0.0), 1.0)

    def set_scale(self, factor: int) -> None:
        with self._lock:
            self._scale = factor

    def set_locks(self, axes) -> None:
        with self._lock:
            self._lock_mask = frozenset(Axis(a) for a in axes)

    # -- master side ---------------------------------------------------------

    def poll(self, now_us: int, master: MasterEndpoint) -> OperatorAction:
        with self._lock:
            return OperatorAction(
                displacement=self._displacement,
                tilt=self._tilt,
                grip=self._grip,
                scale=self._scale,
                lock_mask=self._lock_mask,
            )


class LedgerMirror:
    """Master-side liquid bookkeeping integrated from the event stream."""

    def __init__(self, spec: ScenarioSpec):
        self.beaker_ml = spec.beaker_ml
        self.tube_ml = [0.0 for _ in spec.tube_centers_mm]
        self.pipette_ml = 0.0
        self.spill_ml = 0.0
        self._consumed = 0

    def update_from(self, master: MasterEndpoint) -> None:
        events = master.events
        while self._consumed < len(events):
            self._apply(events[self._consumed])
            self._consumed += 1

    def _apply(self, event: wire.SceneEventPayload) -> None:
        ml = event.volume_delta_ul / 1000.0
        code = event.event_code
        if code == int(wire.EventCode.LIQUID_DRAWN):
            # delta is negative: liquid leaving the beaker for the bulb
            self.beaker_ml += ml
            self.pipette_ml -= ml
        elif code == int(wire.EventCode.LIQUID_DISPENSED):
            self.pipette_ml -= ml
            if event.location_code >= int(wire.LocationCode.TUBE_BASE):
                self.tube_ml[event.location_code - int(wire.LocationCode.TUBE_BASE)] += ml
            else:
                self.beaker_ml += ml
        elif code == int(wire.EventCode.LIQUID_SPILLED):
            self.pipette_ml -= ml
            self.spill_ml += ml

    def as_dict(self) -> dict:
        return {
            "beaker": self.beaker_ml,
            "tubes": list(self.tube_ml),
            "pipette": self.pipette_ml,
            "spill": self.spill_ml,
        }


def _grid(cells) -> list:
    return [[float(v) for v in row] for row in cells]


def build_outbound(master: MasterEndpoint, ledger: LedgerMirror, now_us: int) -> List[dict]:
    """Snapshot messages for one outbound gateway frame."""
    ledger.update_from(master)
    out = []
    if master.last_frames:
        out.append({
            "type": "tactile",
            "t": now_us,
            "left": _grid(master.last_frames[Finger.LEFT].cells),
            "right": _grid(master.last_frames[Finger.RIGHT].cells),
        })
    if master.last_patterns:
        out.append({
            "type": "electrode",
            "t": now_us,
            "left": _grid(master.last_patterns[Finger.LEFT].cells),
            "right": _grid(master.last_patterns[Finger.RIGHT].cells),
        })
    twin = master.twin
    out.append({
        "type": "state",
        "t": now_us,
        "pose": list(twin.position_mm) + list(twin.orientation_deg),
        "opening": twin.opening,
        "contact": twin.contact_opening,
        "stale": twin.staleness_us(now_us) > STALE_AFTER_US,
        "scale": master.cfg.scale_factor,
        "locks": sorted(a.value for a in master.cfg.lock_mask),
    })
    out.append({"type": "force", "t": now_us, "newtons": master.last_force_n})
    out.append({"type": "ledger", "t": now_us, **ledger.as_dict()})
    return out


def handle_inbound(text: str, operator: GatewayOperator) -> Optional[dict]:
    """Apply one console command; returns a reply dict or None."""
    try:
        msg = json.loads(text)
        if not isinstance(msg, dict):
            raise ValueError("not an object")
    except ValueError:
        return {"type": "error", "reason": "malformed json"}
    kind = msg.get("type")
    try:
        if kind == "jog":
            operator.set_jog(
                msg.get("dx", 0.0), msg.get("dy", 0.0), msg.get("dz", 0.0),
                msg.get("rx", 0.0), msg.get("ry", 0.0), msg.get("rz", 0.0),
            )
        elif kind == "grip":
            value = float(msg["value"])
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"grip value {value} outside [0, 1]")
            operator.set_grip(value)
        elif kind == "scale":
            factor = int(msg["factor"])
            if factor not in (1, 2, 3, 4, 5):
                raise ValueError(f"scale factor {factor} outside 1..5")
            operator.set_scale(factor)
        elif kind == "lock":
            operator.set_locks(msg.get("axes", []))
        elif kind == "trial":
            action = msg.get("action")
            if action not in ("start", "stop"):
                raise ValueError(f"unknown trial action {action!r}")
            operator.trial_events.append({"action": action})
        else:
            log.warning("ignoring unknown gateway message type %r", kind)
            return None
    except (KeyError, TypeError, ValueError) as exc:
        return {"type": "error", "reason": str(exc)}
    return None


def serve_gateway(
    master: MasterEndpoint,
    operator: GatewayOperator,
    spec: ScenarioSpec,
    port: int = DEFAULT_UI_PORT,
    stop: Optional[threading.Event] = None,
    clock=None,
):
    """Threaded WebSocket server bridging the console to the master.

    Blocks until the stop event is set. clock() must return the current
    master-side time in simulated microseconds (wall-derived in serve
    mode).
    """
    from websockets.sync.server import serve as ws_serve

    stop = stop or threading.Event()
    ledger = LedgerMirror(spec)
    clock = clock or (lambda: int(time.monotonic() * 1e6))
    trial_mark: Dict[str, float] = {}

    def handler(conn):
        conn_stop = threading.Event()

        def sender():
            while not (stop.is_set() or conn_stop.is_set()):
                now_us = clock()
                try:
                    for message in build_outbound(master, ledger, now_us):
                        conn.send(json.dumps(message))
                    for note in _drain_trial(operator, ledger, spec, trial_mark, now_us):
                        conn.send(json.dumps(note))
                except Exception:
                    return
                time.sleep(OUTBOUND_PERIOD_S)

        tx = threading.Thread(target=sender, daemon=True)
        tx.start()
        try:
            for text in conn:
                reply = handle_inbound(text, operator)
                if reply is not None:
                    conn.send(json.dumps(reply))
        except Exception:
            pass
        finally:
            conn_stop.set()

    with ws_serve(handler, "127.0.0.1", port) as server:
        waiter = threading.Thread(target=lambda: (stop.wait(), server.shutdown()),
                                  daemon=True)
        waiter.start()
        server.serve_forever()


def _drain_trial(operator, ledger, spec, trial_mark, now_us) -> List[dict]:
    out = []
    while operator.trial_events:
        event = operator.trial_events.pop(0)
        if event["action"] == "start":
            trial_mark["t0"] = now_us
            trial_mark["tube0"] = ledger.tube_ml[spec.target_tube]
            out.append({"type": "event", "t": now_us, "event": "trial_started"})
        else:
            dispensed = ledger.tube_ml[spec.target_tube] - trial_mark.get("tube0", 0.0)
            elapsed = (now_us - trial_mark.get("t0", now_us)) / 1e6
            error = abs(dispensed - spec.target_volume_ml) / spec.target_volume_ml
            out.append({
                "type": "event",
                "t": now_us,
                "event": "trial_result",
                "dispensed_ml": dispensed,
                "relative_error": error,
                "elapsed_s": elapsed,
            })
    return out
