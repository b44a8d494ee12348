"""Acceptance suite: one test per criterion, tolerances pinned inline.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. The dosing/ablation criteria share one 20-seed benchmark run.
"""

import random
import statistics
import time

import numpy as np
import pytest

from telehaptic import protocol as wire
from telehaptic.endpoints import VirtualSession
from telehaptic.kinesthetic import GripperState, kinesthetic_force
from telehaptic.policies import FeedbackCondition, StationaryOperator
from telehaptic.scenario import default_scenario
from telehaptic.sim import RemoteScene
from telehaptic.tactile import Finger, clamp_sensor, resample_bicubic
from telehaptic.trial import compute_metrics, read_log, replay, run_trial

from .oracles import brute_force_grasp_force, reference_electrode_pattern
from .test_protocol import random_message

SPEC = default_scenario()


def report(name):
    print(f"\nPASS: {name}")


# -- criterion: bicubic oracle equivalence ------------------------------------


def test_bicubic_oracle_equivalence():
    """resample_bicubic matches the independent reference resampler
    (kernel a=-0.5, edge clamp, align corners) within 1e-9 on 100 seeded
    random frames plus constant and linear fields, in under a second."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        frame = clamp_sensor(rng.uniform(0.0, 12.0, (10, 5)))
        got = resample_bicubic(frame).cells
        want = np.asarray(reference_electrode_pattern(frame.cells.tolist()))
        worst = max(worst, float(np.abs(got - want).max()))
    for c in (1.0, 4.5, 9.0):
        frame = clamp_sensor(np.full((10, 5), c))
        got = resample_bicubic(frame).cells
        worst = max(worst, float(np.abs(got - c / 9.0).max()))
    rows = 1.0 + 0.8 * np.arange(10.0)
    frame = clamp_sensor(np.tile(rows[:, None], (1, 5)))
    got = resample_bicubic(frame).cells
    for rp in range(4):
        worst = max(worst, abs(got[rp, 0] - (1.0 + 0.8 * rp * 3) / 9.0))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 1.0
    report(f"bicubic oracle equivalence (worst dev {worst:.2e}, {elapsed:.2f} s)")


# -- criterion: grasp-force law exactness ---------------------------------------


def test_grasp_force_exactness():
    """kinesthetic_force equals (sum/100)*max(0, contact-current) clamped to
    [0, 8] N against an independent accumulator on 1000 random inputs, plus
    exact boundary cases."""
    rng = np.random.default_rng(41)
    for _ in range(1000):
        left = clamp_sensor(rng.uniform(0.0, 11.0, (10, 5)), Finger.LEFT)
        right = clamp_sensor(rng.uniform(0.0, 11.0, (10, 5)), Finger.RIGHT)
        p_contact = float(rng.uniform(0.0, 1.0))
        p_current = float(rng.uniform(0.0, 1.0))
        want = brute_force_grasp_force(left.cells.tolist(), right.cells.tolist(),
                                       p_contact, p_current)
        got = kinesthetic_force(left, right, GripperState(p_current, p_contact)).magnitude
        assert got == pytest.approx(want, abs=1e-12)
    zeros = clamp_sensor(np.zeros((10, 5)))
    assert kinesthetic_force(zeros, zeros, GripperState(0.1, 0.9)).magnitude == 0.0
    assert kinesthetic_force(zeros, zeros, GripperState(0.1, None)).magnitude == 0.0
    nines = clamp_sensor(np.full((10, 5), 9.0))
    assert kinesthetic_force(nines, nines, GripperState(0.0, 1.0)).magnitude == 8.0
    report("grasp-force law exactness (1000 random + boundaries)")


# -- criterion: liquid conservation --------------------------------------------


def test_conservation_over_random_commands():
    """Ledger total drifts at most 1e-9 ml across 10^4 random-command
    ticks, in under 5 s."""
    t0 = time.perf_counter()
    scene = RemoteScene(SPEC)
    state = scene.initial_state()
    total = state.ledger.total_ml
    rng = np.random.default_rng(7)
    worst = 0.0
    grasp = scene.grasp_opening
    for _ in range(10_000):
        velocity = tuple(rng.uniform(-120.0, 120.0, 6))
        grip = float(rng.uniform(0.0, grasp))  # stay grasped: exercise flows
        state = scene.tick(state, velocity, grip, 0.008)
        worst = max(worst, abs(state.ledger.total_ml - total))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 5.0
    report(f"conservation over 10^4 ticks (drift {worst:.1e} ml, {elapsed:.2f} s)")


# -- criterion: protocol roundtrip / corruption / resync ------------------------


def test_protocol_roundtrip_and_crc():
    """decode(encode(m)) identity on 10^4 random messages of every type;
    random single-bit corruption always rejected; stream resynchronizes
    after one corrupted frame."""
    rng = random.Random(97)
    for msg_type in wire.MsgType:
        for _ in range(10_000 // 5):
            for _ in range(5):
                msg = random_message(rng, msg_type)
                decoded, _ = wire.decode(wire.encode(msg))
                assert decoded == msg
    flips = 0
    for msg_type in wire.MsgType:
        for _ in range(200):
            data = bytearray(wire.encode(random_message(rng, msg_type)))
            bit = rng.randrange(len(data) * 8)
            data[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises(wire.ProtocolError):
                wire.decode(bytes(data))
            flips += 1
    messages = [random_message(rng) for _ in range(100)]
    frames = [bytearray(wire.encode(m)) for m in messages]
    frames[50][wire.HEADER_SIZE] ^= 0x20
    decoder = wire.FrameDecoder()
    decoder.feed(b"".join(bytes(f) for f in frames))
    out = decoder.poll()
    assert decoder.corruption_errors == 1
    assert out == messages[:50] + messages[51:]
    report(f"protocol roundtrip (7x10^4 msgs), {flips} bit flips caught, resync OK")


# -- criterion: stream rates and twin precision ---------------------------------


def test_stream_rates_and_twin_precision():
    """Over 10 simulated seconds: 1200 +/- 1 tactile messages per finger,
    500 +/- 1 state messages; stationary twin error <= 0.1 mm. Under 2 s
    wall time on the simulated clock."""
    counts = {"left": 0, "right": 0, "state": 0}

    class Counter:
        def on_message(self, direction, msg, now_us):
            if msg.msg_type is wire.MsgType.TACTILE_FRAME:
                counts["left" if msg.payload.finger == 0 else "right"] += 1
            elif msg.msg_type is wire.MsgType.ROBOT_STATE:
                counts["state"] += 1

    t0 = time.perf_counter()
    grasp = SPEC.outer_diameter_mm / SPEC.gripper_max_gap_mm
    session = VirtualSession(SPEC, StationaryOperator(grasp), Counter())
    session.run_until(10_000_000)
    elapsed = time.perf_counter() - t0
    assert abs(counts["left"] - 1200) <= 1
    assert abs(counts["right"] - 1200) <= 1
    assert abs(counts["state"] - 500) <= 1
    twin_err = max(
        abs(a - b) for a, b in
        zip(session.master.twin.position_mm, session.slave.state.robot.tcp_position)
    )
    assert twin_err <= 0.1
    assert elapsed < 2.0
    report(f"rates 120/50 Hz (+/-1 over 10 s), twin err {twin_err:.4f} mm, {elapsed:.2f} s")


# -- criterion: contact-pattern progression -------------------------------------


def test_contact_pattern_progression():
    """Nonzero-cell count and per-cell force nondecreasing in compression
    across c in {0.05, 0.25, 0.5, 0.75, 1.0}; full compression saturates
    the center column at 9 N."""
    scene = RemoteScene(SPEC)
    previous = None
    previous_count = -1
    for c in (0.05, 0.25, 0.5, 0.75, 1.0):
        cells = scene.footprint_cells(c)
        count = int((cells > 0).sum())
        assert count >= previous_count
        if previous is not None:
            assert (cells >= previous - 1e-12).all()
        previous, previous_count = cells, count
    full = scene.footprint_cells(1.0)
    r0, r1 = SPEC.contact_rows
    assert (full[r0:r1 + 1, 2] == 9.0).all()
    report("contact-pattern progression monotone, saturated center at c=1")


# -- criteria: dosing benchmark + ablation direction ----------------------------


@pytest.fixture(scope="module")
def benchmark_results():
    results = {}
    timings = {}
    for condition in FeedbackCondition:
        t0 = time.perf_counter()
        metrics = []
        for seed in range(20):
            metrics.append(run_trial(SPEC.replace(seed=seed), condition).metrics)
        timings[condition.value] = time.perf_counter() - t0
        results[condition.value] = metrics
    return results, timings


def test_dosing_benchmark_vfe(benchmark_results):
    """VFE over seeds 0..19: mean relative dosing error <= 9% of the 2 ml
    target, completing in under 60 s of wall time."""
    results, timings = benchmark_results
    errors = [m.relative_error for m in results["vfe"]]
    mean_error = statistics.fmean(errors)
    assert all(m.completed and not m.failed for m in results["vfe"])
    assert mean_error <= 0.09
    assert timings["vfe"] < 60.0
    report(f"VFE dosing error {mean_error*100:.2f}% <= 9% "
           f"({timings['vfe']:.1f} s for 20 trials)")


def test_ablation_direction(benchmark_results):
    """Same 20 seeds: mean error VFE <= VE <= V and VFE <= VF <= V, and
    mean task time VFE < V. Directional claims only; no human-subject
    effect sizes are asserted."""
    results, _ = benchmark_results

    def mean_err(c):
        return statistics.fmean(m.relative_error for m in results[c])

    def mean_time(c):
        return statistics.fmean(m.task_time_s for m in results[c])

    e = {c: mean_err(c) for c in ("v", "vf", "ve", "vfe")}
    assert e["vfe"] <= e["ve"] <= e["v"]
    assert e["vfe"] <= e["vf"] <= e["v"]
    assert mean_time("vfe") < mean_time("v")
    report("ablation ordering "
           f"err: vfe {e['vfe']*100:.2f} <= ve {e['ve']*100:.2f} <= v {e['v']*100:.2f}, "
           f"vfe <= vf {e['vf']*100:.2f} <= v; "
           f"time vfe {mean_time('vfe'):.1f} s < v {mean_time('v'):.1f} s")


# -- criterion: determinism and replay ------------------------------------------


def test_determinism_and_replay(tmp_path):
    """`run --seed 7` twice produces byte-identical logs; replay rebuilds
    the final state and metrics exactly."""
    from telehaptic.cli import main

    log1, log2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["run", "--condition", "vfe", "--seed", "7", "--log", str(log1)]) == 0
    assert main(["run", "--condition", "vfe", "--seed", "7", "--log", str(log2)]) == 0
    assert log1.read_bytes() == log2.read_bytes()

    records = read_log(log1)
    final = replay(records)
    logged_metrics = next(r for r in records if r["rec"] == "metrics")
    recomputed = compute_metrics(records)
    assert recomputed.relative_error == logged_metrics["relative_error"]
    assert list(final.ledger.tube_ml) == list(recomputed.dispensed_ml)
    report("determinism: byte-identical logs, replay reproduces metrics exactly")
