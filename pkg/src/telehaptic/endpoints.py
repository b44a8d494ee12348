"""Master and slave endpoints, stream schedulers, and session drivers.

Both endpoints are sans-io state machines: they consume inbound bytes and
scheduled time events, and push outbound bytes through a send callback.
The same cores run under the deterministic virtual-clock session (tests,
trials) and under the wall-clock socket runners (live `serve` mode).

Stream rates ride the simulated clock: the slave publishes tactile frame
pairs at 120 Hz and robot state at 50 Hz; the master publishes TCP pose
commands at the 125 Hz control rate, gripper commands on change plus a
10 Hz keepalive, and a force-feedback value per tactile pair.
"""

from __future__ import annotations

import heapq
import select
import socket
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import protocol as wire
from .control import (
    HapticInput,
    PidState,
    RobotTarget,
    WorkspaceConfig,
    clamp_to_device_workspace,
    pid_step,
    scale_workspace,
)
from .kinesthetic import GripperState, kinesthetic_force
from .protocol import FrameDecoder, MsgType, WireMessage
from .scenario import ScenarioSpec
from .sim import RemoteScene, SceneEvent, SceneEventCode, SceneState, scene_events
from .tactile import (
    ElectrodePattern,
    Finger,
    TactileFrame,
    resample_bicubic,
)

DEFAULT_SLAVE_PORT = 7420
PORT_ENV_VAR = "TELEHAPTIC_PORT"

GRIP_KEEPALIVE_US = 100_000  # 10 Hz


def stream_times(rate_hz: int):
    """Emission instants for a fixed-rate stream on the microsecond clock.

    t_k = round(k * 1e6 / rate) in exact integer arithmetic, so counts over
    any interval T land within one message of rate*T.
    """
    k = 0
    while True:
        yield (k * 1_000_000 + rate_hz // 2) // rate_hz
        k += 1


class _Schedule:
    def __init__(self, rate_hz: int, skip_first: bool = False):
        self._times = stream_times(rate_hz)
        self.next_due = next(self._times)
        if skip_first:
            self.advance()

    def advance(self) -> None:
        self.next_due = next(self._times)


@dataclass
class TwinState:
    """Master-side mirror of the slave robot, fed by the 50 Hz state stream.

    Pose is micrometer-quantized on the wire, so a stationary slave mirrors
    within 0.001 mm, well inside the 0.1 mm contract.
    """

    x_um: int = 0
    y_um: int = 0
    z_um: int = 0
    rx_mdeg: int = 0
    ry_mdeg: int = 0
    rz_mdeg: int = 0
    opening_permille: int = 1000
    contact_permille: int = wire.CONTACT_UNSET
    last_update_us: int = -1

    @property
    def position_mm(self) -> Tuple[float, float, float]:
        return (self.x_um / 1000.0, self.y_um / 1000.0, self.z_um / 1000.0)

    @property
    def orientation_deg(self) -> Tuple[float, float, float]:
        return (self.rx_mdeg / 1000.0, self.ry_mdeg / 1000.0, self.rz_mdeg / 1000.0)

    @property
    def opening(self) -> float:
        return self.opening_permille / 1000.0

    @property
    def contact_opening(self) -> Optional[float]:
        return wire.permille_to_opening(self.contact_permille)

    def staleness_us(self, now_us: int) -> int:
        if self.last_update_us < 0:
            return now_us
        return now_us - self.last_update_us


@dataclass(frozen=True)
class OperatorAction:
    """One control-tick worth of operator intent."""

    displacement: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    tilt: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    grip: float = 1.0
    scale: Optional[int] = None
    lock_mask: Optional[frozenset] = None
    done: bool = False


class Recorder:
    """Interface for trial logging; the default discards everything."""

    def on_message(self, direction: str, msg: WireMessage, now_us: int) -> None:
        pass


Sender = Callable[[bytes], None]


class MasterEndpoint:
    """Operator-side endpoint: workspace mapping, twin mirror, haptics."""

    def __init__(
        self,
        spec: ScenarioSpec,
        operator,
        send: Sender,
        recorder: Optional[Recorder] = None,
    ):
        self.spec = spec
        self.operator = operator
        self.home = RobotTarget(spec.home_position_mm, spec.home_orientation_deg)
        self.cfg = spec.workspace()
        self.twin = TwinState()
        self.decoder = FrameDecoder()
        self.recorder = recorder or Recorder()
        self.connected = True
        self.done = False
        self.seq_gap_count = 0
        self.last_force_n = 0.0
        self.last_patterns: Dict[Finger, ElectrodePattern] = {}
        self.last_frames: Dict[Finger, TactileFrame] = {}
        self.events: List[wire.SceneEventPayload] = []
        self._send_bytes = send
        self._tx_seq = 0
        self._rx_expected = 0
        self._pending_frames: Dict[int, Dict[int, wire.TactileFramePayload]] = {}
        self._last_grip_pm: Optional[int] = None
        self._grip_keepalive_due = 0

    # -- outbound -----------------------------------------------------

    def _send(self, msg_type: MsgType, payload, now_us: int) -> None:
        msg = WireMessage(msg_type, self._tx_seq, now_us, payload)
        self._tx_seq += 1
        self.recorder.on_message("m2s", msg, now_us)
        self._send_bytes(wire.encode(msg))

    def control_tick(self, now_us: int) -> None:
        action = self.operator.poll(now_us, self)
        if action.done:
            self.done = True
        if action.scale is not None and action.scale != self.cfg.scale_factor:
            self.cfg = WorkspaceConfig(action.scale, self.cfg.lock_mask)
            self._send(MsgType.CONFIG_SET,
                       wire.ConfigSetPayload(wire.ConfigKey.SCALE_FACTOR, action.scale),
                       now_us)
        if action.lock_mask is not None and action.lock_mask != self.cfg.lock_mask:
            self.cfg = WorkspaceConfig(self.cfg.scale_factor, action.lock_mask)
            self._send(MsgType.CONFIG_SET,
                       wire.ConfigSetPayload(wire.ConfigKey.LOCK_MASK,
                                             _lock_bits(action.lock_mask)),
                       now_us)
        handle = HapticInput(
            clamp_to_device_workspace(action.displacement),
            action.tilt,
            min(max(action.grip, 0.0), 1.0),
            now_us,
        )
        target = scale_workspace(handle, self.cfg, self.home)
        self._send(MsgType.TCP_COMMAND,
                   wire.TcpCommandPayload(*wire.pose_to_wire(target.tcp_position,
                                                             target.tcp_orientation)),
                   now_us)
        grip_pm = wire.opening_to_permille(handle.grip_command)
        if grip_pm != self._last_grip_pm or now_us >= self._grip_keepalive_due:
            self._send(MsgType.GRIPPER_COMMAND, wire.GripperCommandPayload(grip_pm), now_us)
            self._last_grip_pm = grip_pm
            self._grip_keepalive_due = now_us + GRIP_KEEPALIVE_US

    # -- inbound ------------------------------------------------------

    def on_bytes(self, data: bytes, now_us: int) -> None:
        self.decoder.feed(data)
        for msg in self.decoder.poll():
            if msg.seq != self._rx_expected:
                if msg.seq > self._rx_expected:
                    self.seq_gap_count += msg.seq - self._rx_expected
                self._rx_expected = msg.seq
            self._rx_expected += 1
            self._dispatch(msg, now_us)

    def _dispatch(self, msg: WireMessage, now_us: int) -> None:
        p = msg.payload
        if msg.msg_type is MsgType.ROBOT_STATE:
            self.twin = TwinState(p.x_um, p.y_um, p.z_um, p.rx_mdeg, p.ry_mdeg,
                                  p.rz_mdeg, p.opening_permille, p.contact_permille,
                                  msg.sim_timestamp_us)
        elif msg.msg_type is MsgType.TACTILE_FRAME:
            self._on_tactile(msg, now_us)
        elif msg.msg_type is MsgType.SCENE_EVENT:
            self.events.append(p)

    def _on_tactile(self, msg: WireMessage, now_us: int) -> None:
        stash = self._pending_frames.setdefault(msg.sim_timestamp_us, {})
        stash[msg.payload.finger] = msg.payload
        if len(stash) < 2:
            return
        del self._pending_frames[msg.sim_timestamp_us]
        # drop any older unpaired leftovers
        for ts in [t for t in self._pending_frames if t < msg.sim_timestamp_us]:
            del self._pending_frames[ts]
        frames = {}
        for finger_code, payload in stash.items():
            finger = Finger(finger_code)
            cells = np.array(payload.cells_cn, dtype=np.float64).reshape(10, 5) / 100.0
            frames[finger] = TactileFrame(finger, cells, msg.sim_timestamp_us)
        self.last_frames = frames
        self.last_patterns = {f: resample_bicubic(fr) for f, fr in frames.items()}
        grip = GripperState(self.twin.opening, self.twin.contact_opening)
        force = kinesthetic_force(frames[Finger.LEFT], frames[Finger.RIGHT], grip)
        self.last_force_n = force.magnitude
        self._send(MsgType.FORCE_FEEDBACK,
                   wire.ForceFeedbackPayload(wire.newton_to_mn(force.magnitude)),
                   msg.sim_timestamp_us)

    def on_disconnect(self, now_us: int) -> None:
        self.connected = False


class SlaveEndpoint:
    """Remote-cell endpoint: PID regulator driving the scene simulation."""

    def __init__(
        self,
        spec: ScenarioSpec,
        send: Sender,
        recorder: Optional[Recorder] = None,
        scene: Optional[RemoteScene] = None,
    ):
        self.spec = spec
        self.scene = scene or RemoteScene(spec)
        self.state: SceneState = self.scene.initial_state()
        self.gains = spec.gains()
        self.pid_state = PidState()
        self.decoder = FrameDecoder()
        self.recorder = recorder or Recorder()
        self.connected = True
        self.seq_gap_count = 0
        self.force_feedback_count = 0
        self.session_events: List[SceneEvent] = []
        self._send_bytes = send
        self._tx_seq = 0
        self._rx_expected = 0
        self._target: Optional[RobotTarget] = None
        self._grip_cmd = self.state.gripper.commanded_opening
        self._last_tick_us = 0

    def _send(self, msg_type: MsgType, payload, now_us: int) -> None:
        msg = WireMessage(msg_type, self._tx_seq, now_us, payload)
        self._tx_seq += 1
        self.recorder.on_message("s2m", msg, now_us)
        self._send_bytes(wire.encode(msg))

    # -- scheduled events ----------------------------------------------

    def control_tick(self, now_us: int) -> None:
        dt = (now_us - self._last_tick_us) / 1e6
        if dt <= 0.0:
            return
        self._last_tick_us = now_us
        if self.connected and self._target is not None:
            current = replace(self.state.robot, timestamp_us=0)
            target = replace(self._target, timestamp_us=0)
            command, self.pid_state = pid_step(target, current, self.gains,
                                               self.pid_state, dt)
        else:
            command = (0.0,) * 6  # fail-safe halt
        previous = self.state
        self.state = self.scene.tick(previous, command, self._grip_cmd, dt)
        for event in scene_events(previous, self.state):
            self.session_events.append(event)
            self._send(MsgType.SCENE_EVENT, _event_payload(event), now_us)

    def tactile_tick(self, now_us: int) -> None:
        left, right = self.scene.synthesize_tactile(self.state)
        for frame in (left, right):
            cells_cn = tuple(
                wire.newton_to_cn(v) for v in frame.cells.reshape(-1).tolist()
            )
            self._send(MsgType.TACTILE_FRAME,
                       wire.TactileFramePayload(frame.finger.value, cells_cn),
                       now_us)

    def state_tick(self, now_us: int) -> None:
        robot = self.state.robot
        grip = self.state.gripper
        self._send(MsgType.ROBOT_STATE,
                   wire.RobotStatePayload(
                       *wire.pose_to_wire(robot.tcp_position, robot.tcp_orientation),
                       wire.opening_to_permille(grip.p_current),
                       wire.opening_to_permille(grip.p_contact),
                   ),
                   now_us)

    # -- inbound -------------------------------------------------------

    def on_bytes(self, data: bytes, now_us: int) -> None:
        self.decoder.feed(data)
        for msg in self.decoder.poll():
            if msg.seq != self._rx_expected:
                if msg.seq > self._rx_expected:
                    self.seq_gap_count += msg.seq - self._rx_expected
                self._rx_expected = msg.seq
            self._rx_expected += 1
            p = msg.payload
            if msg.msg_type is MsgType.TCP_COMMAND:
                self._target = RobotTarget(
                    (wire.um_to_mm(p.x_um), wire.um_to_mm(p.y_um), wire.um_to_mm(p.z_um)),
                    (wire.mdeg_to_deg(p.rx_mdeg), wire.mdeg_to_deg(p.ry_mdeg),
                     wire.mdeg_to_deg(p.rz_mdeg)),
                    msg.sim_timestamp_us,
                )
            elif msg.msg_type is MsgType.GRIPPER_COMMAND:
                opening = wire.permille_to_opening(p.opening_permille)
                if opening is not None:
                    self._grip_cmd = opening
            elif msg.msg_type is MsgType.FORCE_FEEDBACK:
                self.force_feedback_count += 1
            # CONFIG_SET is master-side semantics; it is logged upstream

    def on_disconnect(self, now_us: int) -> None:
        """Connection loss: the sim halts via a zeroed velocity command on
        the very next control tick."""
        self.connected = False
        self.session_events.append(
            SceneEvent(SceneEventCode.SESSION_CLOSED, 0.0, None, now_us)
        )


def _lock_bits(lock_mask) -> int:
    from .control import Axis

    bits = 0
    order = {Axis.X: 1, Axis.Y: 2, Axis.Z: 4, Axis.ROTATION: 8}
    for axis in lock_mask:
        bits |= order[axis]
    return bits


def _event_payload(event: SceneEvent) -> wire.SceneEventPayload:
    code = wire.EventCode[event.code.name]
    if event.tube_index is not None:
        location = wire.LocationCode.TUBE_BASE + event.tube_index
    elif event.code is SceneEventCode.LIQUID_SPILLED:
        location = wire.LocationCode.SPILL
    elif event.code in (SceneEventCode.LIQUID_DRAWN, SceneEventCode.LIQUID_DISPENSED):
        location = wire.LocationCode.BEAKER
    else:
        location = wire.LocationCode.NONE
    delta = wire.ml_to_ul(event.volume_delta_ml)
    if event.code is SceneEventCode.LIQUID_DRAWN:
        delta = -delta  # liquid leaving the source pool
    return wire.SceneEventPayload(int(code), delta, int(location))


# -- deterministic virtual-clock session ------------------------------------

_PRIO_DELIVERY = 0
_PRIO_SLAVE_TICK = 1
_PRIO_TACTILE = 2
_PRIO_STATE = 3
_PRIO_MASTER_TICK = 4


class VirtualSession:
    """Master and slave wired over an in-process loopback byte stream,
    driven by a single deterministic event heap on the simulated clock."""

    def __init__(
        self,
        spec: ScenarioSpec,
        operator,
        recorder: Optional[Recorder] = None,
        latency_us: int = 0,
    ):
        self.spec = spec
        self.latency_us = latency_us
        self.now_us = 0
        self._heap: List[Tuple[int, int, int, Callable[[int], None]]] = []
        self._counter = 0
        self.master = MasterEndpoint(spec, operator, self._send_to_slave, recorder)
        self.slave = SlaveEndpoint(spec, self._send_to_master, recorder)
        self._sched_slave = _Schedule(spec.control_hz, skip_first=True)
        self._sched_master = _Schedule(spec.control_hz)
        self._sched_tactile = _Schedule(spec.tactile_hz)
        self._sched_state = _Schedule(spec.state_hz)
        self._push(self._sched_slave.next_due, _PRIO_SLAVE_TICK, self._slave_tick)
        self._push(self._sched_tactile.next_due, _PRIO_TACTILE, self._tactile_tick)
        self._push(self._sched_state.next_due, _PRIO_STATE, self._state_tick)
        self._push(self._sched_master.next_due, _PRIO_MASTER_TICK, self._master_tick)

    # -- transport -----------------------------------------------------

    def _send_to_slave(self, data: bytes) -> None:
        at = self.now_us + self.latency_us
        self._push(at, _PRIO_DELIVERY, lambda t, d=data: self.slave.on_bytes(d, t))

    def _send_to_master(self, data: bytes) -> None:
        at = self.now_us + self.latency_us
        self._push(at, _PRIO_DELIVERY, lambda t, d=data: self.master.on_bytes(d, t))

    # -- scheduling ------------------------------------------------------

    def _push(self, t_us: int, prio: int, fn) -> None:
        self._counter += 1
        heapq.heappush(self._heap, (t_us, prio, self._counter, fn))

    def _slave_tick(self, now: int) -> None:
        self.slave.control_tick(now)
        self._sched_slave.advance()
        self._push(self._sched_slave.next_due, _PRIO_SLAVE_TICK, self._slave_tick)

    def _tactile_tick(self, now: int) -> None:
        self.slave.tactile_tick(now)
        self._sched_tactile.advance()
        self._push(self._sched_tactile.next_due, _PRIO_TACTILE, self._tactile_tick)

    def _state_tick(self, now: int) -> None:
        self.slave.state_tick(now)
        self._sched_state.advance()
        self._push(self._sched_state.next_due, _PRIO_STATE, self._state_tick)

    def _master_tick(self, now: int) -> None:
        self.master.control_tick(now)
        self._sched_master.advance()
        self._push(self._sched_master.next_due, _PRIO_MASTER_TICK, self._master_tick)

    # -- execution -------------------------------------------------------

    def run_until(self, t_end_us: int, stop: Optional[Callable[[], bool]] = None) -> int:
        """Process every event strictly before t_end_us. Returns the time of
        the last processed event. The optional stop predicate is checked
        after each event."""
        last = self.now_us
        while self._heap and self._heap[0][0] < t_end_us:
            t, _prio, _n, fn = heapq.heappop(self._heap)
            self.now_us = t
            fn(t)
            last = t
            if stop is not None and stop():
                return last
        self.now_us = max(self.now_us, t_end_us)
        return last

    def run_for(self, duration_us: int, stop=None) -> int:
        return self.run_until(self.now_us + duration_us, stop)


# -- wall-clock socket runners ----------------------------------------------


class SocketRunner:
    """Paces a sans-io endpoint against the wall clock over a TCP socket."""

    def __init__(self, endpoint, schedules, sock: socket.socket, realtime: bool = True):
        self.endpoint = endpoint
        self.schedules = schedules  # list of (_Schedule, handler)
        self.sock = sock
        self.realtime = realtime
        self.sock.setblocking(False)

    def run(self, duration_s: Optional[float] = None, stop: Optional[Callable[[], bool]] = None):
        t0 = time.monotonic()
        end_us = None if duration_s is None else int(duration_s * 1e6)
        while True:
            if stop is not None and stop():
                return
            due, handler = min(
                ((s.next_due, h) for s, h in self.schedules), key=lambda x: x[0]
            )
            if end_us is not None and due >= end_us:
                return
            if self.realtime:
                wait_s = due / 1e6 - (time.monotonic() - t0)
                while wait_s > 0:
                    readable, _, _ = select.select([self.sock], [], [], min(wait_s, 0.01))
                    now_us = int((time.monotonic() - t0) * 1e6)
                    if readable and not self._drain(now_us):
                        return
                    if stop is not None and stop():
                        return
                    wait_s = due / 1e6 - (time.monotonic() - t0)
            else:
                readable, _, _ = select.select([self.sock], [], [], 0)
                if readable and not self._drain(due):
                    return
            for sched, h in self.schedules:
                if sched.next_due == due:
                    h(due)
                    sched.advance()

    def _drain(self, now_us: int) -> bool:
        try:
            data = self.sock.recv(65536)
        except BlockingIOError:
            return True
        except OSError:
            data = b""
        if not data:
            self.endpoint.on_disconnect(now_us)
            return False
        self.endpoint.on_bytes(data, now_us)
        return True


def _socket_sender(sock: socket.socket) -> Sender:
    def send(data: bytes) -> None:
        try:
            sock.sendall(data)
        except OSError:
            pass

    return send


def run_slave_endpoint(
    spec: ScenarioSpec,
    conn: socket.socket,
    realtime: bool = True,
    duration_s: Optional[float] = None,
    stop: Optional[Callable[[], bool]] = None,
) -> SlaveEndpoint:
    """Serve the remote cell over an established byte stream."""
    slave = SlaveEndpoint(spec, _socket_sender(conn))
    runner = SocketRunner(
        slave,
        [
            (_Schedule(spec.control_hz, skip_first=True), slave.control_tick),
            (_Schedule(spec.tactile_hz), slave.tactile_tick),
            (_Schedule(spec.state_hz), slave.state_tick),
        ],
        conn,
        realtime,
    )
    runner.run(duration_s, stop)
    return slave


def run_master_endpoint(
    spec: ScenarioSpec,
    operator,
    conn: socket.socket,
    realtime: bool = True,
    duration_s: Optional[float] = None,
    stop: Optional[Callable[[], bool]] = None,
    recorder: Optional[Recorder] = None,
) -> MasterEndpoint:
    """Drive the operator side over an established byte stream."""
    master = MasterEndpoint(spec, operator, _socket_sender(conn), recorder)
    runner = SocketRunner(
        master,
        [(_Schedule(spec.control_hz), master.control_tick)],
        conn,
        realtime,
    )
    runner.run(duration_s, stop)
    return master
