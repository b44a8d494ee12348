"""Trial execution, JSON-Lines logging, metrics, replay, and benchmarking.

A trial wires the master and slave endpoints over the in-process loopback,
steps simulated time until the scripted operator signals done (or the
timeout), and logs a header, every wire message (tactile frames as
digests), the final scene state, and exactly one metrics block. Logs are
byte-reproducible for a given scenario and seed, and replaying the logged
command stream rebuilds the final state bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import statistics
import zlib
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import protocol as wire
from .endpoints import Recorder, SlaveEndpoint, VirtualSession, _Schedule
from .policies import FeedbackCondition, ScriptedOperator
from .scenario import ScenarioSpec, from_dict
from .sim import SceneState

LOG_VERSION = "telehaptic-log/1"

# Dispense events closer together than this belong to one squeeze.
SQUEEZE_GAP_US = 500_000


class ReplayIncompatibleError(RuntimeError):
    """The log was produced by an incompatible build or log version."""


class ReplayDivergenceError(RuntimeError):
    """Re-executing the command stream did not reproduce the logged state."""


@dataclass(frozen=True)
class Metrics:
    dispensed_ml: Tuple[float, ...]
    relative_error: float
    task_time_s: float
    squeeze_count: int
    spill_ml: float
    completed: bool
    failed: bool

    def to_dict(self) -> dict:
        return asdict(self)


class TrialRecorder(Recorder):
    """Collects one dict per wire message, tactile payloads as digests."""

    def __init__(self):
        self.records: List[dict] = []

    def on_message(self, direction: str, msg: wire.WireMessage, now_us: int) -> None:
        self.records.append(_message_record(direction, msg, now_us))


def _message_record(direction: str, msg: wire.WireMessage, now_us: int) -> dict:
    p = msg.payload
    if msg.msg_type is wire.MsgType.TACTILE_FRAME:
        packed = wire.payload_bytes(msg)
        body = {"finger": p.finger, "digest": f"{zlib.crc32(packed):08x}"}
    else:
        body = asdict(p)
    return {
        "rec": "msg",
        "dir": direction,
        "t": now_us,
        "type": msg.msg_type.name.lower(),
        "seq": msg.seq,
        "ts": msg.sim_timestamp_us,
        "p": body,
    }


def state_digest(state: SceneState) -> str:
    """Canonical digest of a scene state; repr round-trips floats."""
    canon = repr((
        state.robot.tcp_position,
        state.robot.tcp_orientation,
        state.gripper.p_current,
        state.gripper.p_contact,
        state.gripper.commanded_opening,
        state.pipette.held_liquid_ml,
        state.pipette.compression,
        state.ledger.beaker_ml,
        state.ledger.tube_ml,
        state.ledger.pipette_ml,
        state.ledger.spill_ml,
        state.grasped,
        state.dropped,
        state.sim_time_us,
    ))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _final_record(state: SceneState, t_us: int, completed: bool) -> dict:
    return {
        "rec": "final_state",
        "t": t_us,
        "digest": state_digest(state),
        "ledger": {
            "beaker_ml": state.ledger.beaker_ml,
            "tube_ml": list(state.ledger.tube_ml),
            "pipette_ml": state.ledger.pipette_ml,
            "spill_ml": state.ledger.spill_ml,
        },
        "pose": list(state.robot.tcp_position) + list(state.robot.tcp_orientation),
        "grasped": state.grasped,
        "dropped": state.dropped,
        "sim_time_us": state.sim_time_us,
        "completed": completed,
    }


@dataclass
class TrialResult:
    records: List[dict]
    metrics: Metrics
    final_state: SceneState

    def log_text(self) -> str:
        lines = [json.dumps(r, sort_keys=True, separators=(",", ":"))
                 for r in self.records]
        return "\n".join(lines) + "\n"

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.log_text())


def run_trial(
    spec: ScenarioSpec,
    condition: Union[FeedbackCondition, str],
    policy_factory=None,
    latency_us: int = 0,
) -> TrialResult:
    """Execute one dosing trial over the loopback transport.

    policy_factory, when given, is called with a scene-peek callable and
    must return the operator; the default builds the condition's scripted
    operator.
    """
    if isinstance(condition, str):
        condition = FeedbackCondition(condition.lower())
    recorder = TrialRecorder()
    holder: Dict[str, SlaveEndpoint] = {}
    peek = lambda: holder["slave"].state
    if policy_factory is None:
        policy = ScriptedOperator(spec, condition, spec.seed, peek)
    else:
        policy = policy_factory(peek)
    session = VirtualSession(spec, policy, recorder, latency_us)
    holder["slave"] = session.slave

    header = {
        "rec": "header",
        "version": LOG_VERSION,
        "spec_hash": spec.spec_hash(),
        "seed": spec.seed,
        "condition": condition.value,
        "latency_us": latency_us,
        "spec": spec.to_dict(),
    }
    timeout_us = int(spec.timeout_s * 1e6)
    last_t = session.run_until(timeout_us, stop=lambda: policy.done)
    completed = bool(policy.done)
    end_us = policy.done_at_us if completed and policy.done_at_us is not None else last_t

    records = [header] + recorder.records
    records.append(_final_record(session.slave.state, end_us, completed))
    metrics = _metrics_from(records, spec, session.slave.state, end_us, completed)
    records.append({"rec": "metrics", **metrics.to_dict()})
    return TrialResult(records, metrics, session.slave.state)


def _metrics_from(records, spec, state, end_us, completed) -> Metrics:
    dispensed = tuple(state.ledger.tube_ml)
    target = spec.target_volume_ml
    rel = abs(dispensed[spec.target_tube] - target) / target
    return Metrics(
        dispensed_ml=dispensed,
        relative_error=rel,
        task_time_s=end_us / 1e6,
        squeeze_count=_squeeze_count(records),
        spill_ml=state.ledger.spill_ml,
        completed=completed,
        failed=state.dropped,
    )


def _squeeze_count(records: Iterable[dict]) -> int:
    """Distinct expel episodes: dispense/spill events grouped by time gap."""
    times = [
        r["t"]
        for r in records
        if r.get("rec") == "msg" and r.get("type") == "scene_event"
        and r["p"]["event_code"] in (int(wire.EventCode.LIQUID_DISPENSED),
                                     int(wire.EventCode.LIQUID_SPILLED))
    ]
    count = 0
    previous = None
    for t in times:
        if previous is None or t - previous > SQUEEZE_GAP_US:
            count += 1
        previous = t
    return count


def compute_metrics(records: Sequence[dict], spec: Optional[ScenarioSpec] = None) -> Metrics:
    """Recompute the metrics block from a log's records."""
    header = records[0]
    if spec is None:
        spec = from_dict(header["spec"])
    final = _find_record(records, "final_state")
    dispensed = tuple(final["ledger"]["tube_ml"])
    target = spec.target_volume_ml
    return Metrics(
        dispensed_ml=dispensed,
        relative_error=abs(dispensed[spec.target_tube] - target) / target,
        task_time_s=final["t"] / 1e6,
        squeeze_count=_squeeze_count(records),
        spill_ml=final["ledger"]["spill_ml"],
        completed=final["completed"],
        failed=final["dropped"],
    )


def _find_record(records, kind: str) -> dict:
    matches = [r for r in records if r.get("rec") == kind]
    if len(matches) != 1:
        raise ValueError(f"log must contain exactly one {kind} record, found {len(matches)}")
    return matches[0]


def read_log(path) -> List[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


_M2S_PAYLOADS = {
    "tcp_command": wire.TcpCommandPayload,
    "gripper_command": wire.GripperCommandPayload,
    "force_feedback": wire.ForceFeedbackPayload,
    "config_set": wire.ConfigSetPayload,
}


def _record_to_message(record: dict) -> wire.WireMessage:
    cls = _M2S_PAYLOADS[record["type"]]
    payload = cls(**record["p"])
    return wire.WireMessage(wire.MsgType[record["type"].upper()], record["seq"],
                            record["ts"], payload)


def replay(records: Sequence[dict]) -> SceneState:
    """Re-execute a log's command stream; verify the final state matches.

    Returns the replayed final state; raises ReplayDivergenceError when the
    rebuilt state differs from the recorded one, ReplayIncompatibleError on
    a log from another build.
    """
    header = records[0]
    if header.get("rec") != "header" or header.get("version") != LOG_VERSION:
        raise ReplayIncompatibleError(
            f"log version {header.get('version')!r} does not match {LOG_VERSION!r}"
        )
    spec = from_dict(header["spec"])
    latency_us = header.get("latency_us", 0)
    final = _find_record(records, "final_state")
    end_us = final["t"]

    m2s_records = [r for r in records if r.get("rec") == "msg" and r.get("dir") == "m2s"]
    if [r["seq"] for r in m2s_records] != list(range(len(m2s_records))):
        raise ReplayDivergenceError(
            "command stream has sequence holes; records were lost or reordered"
        )

    slave = SlaveEndpoint(spec, lambda data: None)
    deliveries = [
        (r["t"] + latency_us, i, wire.encode(_record_to_message(r)))
        for i, r in enumerate(m2s_records)
    ]
    # With zero latency a command sent at time t was queued after the slave
    # tick at t had already run, so ties go to the tick; with latency the
    # delivery event carries the lower priority and runs first.
    delivery_prio = 2 if latency_us == 0 else 0
    events = [(t, delivery_prio, i, data) for t, i, data in deliveries]
    sched = _Schedule(spec.control_hz, skip_first=True)
    while sched.next_due <= end_us:
        events.append((sched.next_due, 1, 0, None))
        sched.advance()
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    for t, _prio, _i, data in events:
        if data is None:
            slave.control_tick(t)
        else:
            slave.on_bytes(data, t)

    if state_digest(slave.state) != final["digest"]:
        raise ReplayDivergenceError(
            "replayed state digest does not match the log; "
            "the log is damaged or from a diverging build"
        )
    return slave.state


# -- benchmarking -------------------------------------------------------------

BENCH_FIELDS = ("condition", "trials", "mean_error", "sd_error", "mean_time_s", "sd_time_s")


def bench(
    spec: ScenarioSpec,
    trials: int,
    seed_base: int = 0,
    conditions: Sequence[FeedbackCondition] = tuple(FeedbackCondition),
) -> Tuple[List[dict], Dict[str, List[Metrics]]]:
    """Run trials x conditions over a shared seed ladder.

    Returns (aggregate rows, per-condition metric lists). Identical seeds
    across conditions give paired comparisons.
    """
    per_condition: Dict[str, List[Metrics]] = {}
    for condition in conditions:
        results = []
        for k in range(trials):
            trial_spec = spec.replace(seed=seed_base + k)
            results.append(run_trial(trial_spec, condition).metrics)
        per_condition[condition.value] = results
    rows = []
    for condition in conditions:
        ms = per_condition[condition.value]
        errors = [m.relative_error for m in ms]
        times = [m.task_time_s for m in ms]
        rows.append({
            "condition": condition.value,
            "trials": len(ms),
            "mean_error": statistics.fmean(errors),
            "sd_error": statistics.stdev(errors) if len(errors) > 1 else 0.0,
            "mean_time_s": statistics.fmean(times),
            "sd_time_s": statistics.stdev(times) if len(times) > 1 else 0.0,
        })
    return rows, per_condition


def bench_csv(rows: List[dict]) -> str:
    lines = [",".join(BENCH_FIELDS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[f]) for f in BENCH_FIELDS))
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)
