"""Command-line interface: run / bench / replay / serve."""

from __future__ import annotations

import argparse
import os
import socket
import sys
import threading

from .endpoints import DEFAULT_SLAVE_PORT, PORT_ENV_VAR, run_slave_endpoint
from .gateway import DEFAULT_UI_PORT, GatewayOperator, serve_gateway
from .policies import FeedbackCondition
from .scenario import ScenarioSpec, default_scenario, load_scenario
from .trial import bench, bench_csv, compute_metrics, read_log, replay, run_trial

CONDITIONS = [c.value for c in FeedbackCondition]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telehaptic",
        description="Deterministic teleoperation simulator for remote liquid dosing",
    )
    parser.add_argument("--scale", type=int, choices=[1, 2, 3, 4, 5],
                        help="workspace scaling factor override")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one dosing trial")
    p_run.add_argument("--scenario", help="scenario TOML file (default: built-in)")
    p_run.add_argument("--condition", choices=CONDITIONS, default="vfe")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--log", help="write the trial log (JSON Lines) here")

    p_bench = sub.add_parser("bench", help="run the feedback-condition benchmark")
    p_bench.add_argument("--scenario")
    p_bench.add_argument("--trials", type=int, default=20)
    p_bench.add_argument("--seeds", type=int, default=0, metavar="S",
                         help="base seed; trial k uses seed S+k")
    p_bench.add_argument("--conditions", default=",".join(CONDITIONS),
                         help="comma-separated subset of v,vf,ve,vfe")
    p_bench.add_argument("--out", help="write the CSV table here (default: stdout)")

    p_replay = sub.add_parser("replay", help="re-execute a trial log and verify it")
    p_replay.add_argument("--log", required=True)

    p_serve = sub.add_parser("serve", help="live operator mode with the web console")
    p_serve.add_argument("--scenario")
    p_serve.add_argument("--port", type=int, default=None,
                         help=f"slave TCP port (default ${PORT_ENV_VAR} or {DEFAULT_SLAVE_PORT})")
    p_serve.add_argument("--ui-port", type=int, default=DEFAULT_UI_PORT)
    p_serve.add_argument("--realtime", action="store_true", default=True,
                         help="pace the simulation against the wall clock (default)")
    p_serve.add_argument("--duration", type=float, default=None,
                         help="stop after this many seconds (default: run until ^C)")
    return parser


def _load_spec(args) -> ScenarioSpec:
    spec = load_scenario(args.scenario) if getattr(args, "scenario", None) else default_scenario()
    if args.scale is not None:
        spec = spec.replace(scale_factor=args.scale)
    return spec


def resolve_slave_port(explicit=None, env=None) -> int:
    """--port beats $TELEHAPTIC_PORT beats the built-in default."""
    if explicit is not None:
        return explicit
    env = os.environ if env is None else env
    return int(env.get(PORT_ENV_VAR, DEFAULT_SLAVE_PORT))


def cmd_run(args) -> int:
    spec = _load_spec(args).replace(seed=args.seed)
    result = run_trial(spec, args.condition)
    if args.log:
        result.write_log(args.log)
    m = result.metrics
    status = "completed" if m.completed else "INCOMPLETE"
    if m.failed:
        status = "FAILED (pipette dropped)"
    print(f"trial {status}: condition={args.condition} seed={args.seed}")
    print(f"  dispensed: {', '.join(f'{v:.4f}' for v in m.dispensed_ml)} ml "
          f"(target {spec.target_volume_ml} ml in tube {spec.target_tube})")
    print(f"  relative error: {m.relative_error:.4f}")
    print(f"  task time: {m.task_time_s:.2f} s, squeezes: {m.squeeze_count}, "
          f"spilled: {m.spill_ml:.4f} ml")
    if args.log:
        print(f"  log written to {args.log}")
    return 0 if m.completed and not m.failed else 1


def cmd_bench(args) -> int:
    spec = _load_spec(args)
    conditions = []
    for name in args.conditions.split(","):
        name = name.strip().lower()
        if name not in CONDITIONS:
            print(f"unknown condition {name!r}", file=sys.stderr)
            return 2
        conditions.append(FeedbackCondition(name))
    rows, _ = bench(spec, args.trials, args.seeds, conditions)
    csv_text = bench_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    print(f"\n{args.trials} trials/condition, seeds {args.seeds}..{args.seeds + args.trials - 1}",
          file=sys.stderr)
    for row in rows:
        print(f"  {row['condition']:>4}: error {row['mean_error']*100:6.2f}% "
              f"(sd {row['sd_error']*100:5.2f}), time {row['mean_time_s']:6.1f} s",
              file=sys.stderr)
    return 0


def cmd_replay(args) -> int:
    records = read_log(args.log)
    final_state = replay(records)
    metrics = compute_metrics(records)
    logged = next(r for r in records if r.get("rec") == "metrics")
    print(f"replay OK: final state digest matches")
    print(f"  dispensed: {', '.join(f'{v:.4f}' for v in final_state.ledger.tube_ml)} ml")
    print(f"  relative error: {metrics.relative_error:.4f} "
          f"(logged {logged['relative_error']:.4f})")
    if abs(metrics.relative_error - logged["relative_error"]) > 0.0:
        print("  WARNING: recomputed metrics differ from the logged block", file=sys.stderr)
        return 1
    return 0


def cmd_serve(args) -> int:
    spec = _load_spec(args)
    port = resolve_slave_port(args.port)
    stop = threading.Event()

    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind(("127.0.0.1", port))
    listener.listen(1)

    def slave_side():
        conn, _addr = listener.accept()
        with conn:
            run_slave_endpoint(spec, conn, realtime=args.realtime,
                               duration_s=args.duration, stop=stop.is_set)

    slave_thread = threading.Thread(target=slave_side, daemon=True)
    slave_thread.start()

    master_sock = socket.create_connection(("127.0.0.1", port))
    operator = GatewayOperator(spec)

    # the gateway needs the master object, so construct it here and run its
    # paced loop on a thread
    from .endpoints import MasterEndpoint, SocketRunner, _Schedule, _socket_sender
    import time as _time

    master = MasterEndpoint(spec, operator, _socket_sender(master_sock))
    runner = SocketRunner(master, [(_Schedule(spec.control_hz), master.control_tick)],
                          master_sock, args.realtime)
    t0 = _time.monotonic()
    master_thread = threading.Thread(
        target=lambda: runner.run(args.duration, stop.is_set), daemon=True)
    master_thread.start()

    print(f"slave on tcp://127.0.0.1:{port}, console gateway on ws://127.0.0.1:{args.ui_port}")
    print("press Ctrl-C to stop")
    try:
        serve_gateway(master, operator, spec, args.ui_port, stop,
                      clock=lambda: int((_time.monotonic() - t0) * 1e6))
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        master_sock.close()
        listener.close()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "bench": cmd_bench,
        "replay": cmd_replay,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
