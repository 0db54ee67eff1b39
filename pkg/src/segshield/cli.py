"""Command-line front ends: segshield, shaper, tracesim, attackeval."""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from pathlib import Path

from .attackeval import run_attack
from .errors import SegShieldError
from .profiles import (
    device_profile,
    device_profile_names,
    segmentation_profile,
    segmentation_profile_names,
)
from .report import run_experiment
from .rng import derive_seed
from .segcore import load_config
from .shaper import (
    SocketTuning,
    mean_wall_time,
    open_shaped_connection,
    run_receiver,
)
from .tracesim import (
    ingest_trace,
    inject_cover_traffic,
    load_profile,
    obfuscate_trace,
    pad_trace,
    synthesize_trace,
    write_trace,
)


def _segmentation(name: str, prob: float | None, seed: int):
    """Accept either a preset name or a path to a JSON config."""
    if name in segmentation_profile_names():
        return segmentation_profile(name, prob=prob, seed=seed)
    config = load_config(name)
    if prob is not None:
        from dataclasses import replace

        config = replace(config, prob=prob)
    return config


def _device(name: str):
    if name in device_profile_names():
        return device_profile(name)
    return load_profile(name)


def _dump_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _run(main) -> int:
    try:
        main()
        return 0
    except (SegShieldError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------------
# segshield


def main_segshield(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="segshield", description="Run the full defense/attack/overhead experiment."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("experiment", help="run a configured experiment")
    exp.add_argument("--config", required=True, help="experiment config (JSON)")
    exp.add_argument("--out", required=True, help="output directory for the report")
    args = parser.parse_args(argv)

    def go():
        report = run_experiment(args.config, args.out)
        for arm in sorted(report.metrics):
            print(f"{arm}: accuracy {report.metrics[arm].accuracy:.4f}")
        print(f"report written to {args.out}")

    return _run(go)


# ---------------------------------------------------------------------------
# shaper


def main_shaper(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shaper", description="Shaped TCP transfers.")
    sub = parser.add_subparsers(dest="command", required=True)

    send = sub.add_parser("send", help="send a pseudo-random payload")
    send.add_argument("--addr", required=True, help="receiver address host:port")
    send.add_argument("--size", type=int, required=True, help="payload bytes per run")
    send.add_argument("--profile", default="rand-low", help="segmentation profile or 'none'")
    send.add_argument("--prob", type=float, default=None, help="override probability")
    send.add_argument("--send-buf", type=int, default=2**16)
    send.add_argument("--recv-buf", type=int, default=2**17)
    send.add_argument("--reps", type=int, default=1)
    send.add_argument("--seed", type=int, default=0)
    send.add_argument("--out", default=None, help="stats JSON path (default stdout)")

    recv = sub.add_parser("recv", help="receive and digest one or more transfers")
    recv.add_argument("--port", type=int, required=True)
    recv.add_argument("--host", default="0.0.0.0")
    recv.add_argument("--reps", type=int, default=1)
    recv.add_argument("--timeout", type=float, default=60.0)
    recv.add_argument("--recv-buf", type=int, default=2**17)
    recv.add_argument("--out", default=None, help="stats JSON path (default stdout)")

    args = parser.parse_args(argv)

    def go():
        if args.command == "send":
            config = (
                None
                if args.profile == "none"
                else _segmentation(args.profile, args.prob, args.seed)
            )
            tuning = SocketTuning(
                no_delay=True,
                send_buffer_bytes=args.send_buf,
                receive_buffer_bytes=args.recv_buf,
            )
            runs = []
            for rep in range(args.reps):
                payload = random.Random(derive_seed(args.seed, "payload", rep)).randbytes(
                    args.size
                )
                conn = open_shaped_connection(
                    args.addr, config, tuning, rng=derive_seed(args.seed, "plan", rep)
                )
                with conn:
                    conn.send(payload)
                    stats = conn.finish()
                runs.append(
                    {
                        **stats.to_dict(),
                        "checksum": hashlib.sha256(payload).hexdigest(),
                    }
                )
            _dump_json(
                {"runs": runs, "mean_wall_time": mean_wall_time_dicts(runs)}, args.out
            )
        else:
            runs = []
            for _ in range(args.reps):
                stats = run_receiver(
                    args.port,
                    host=args.host,
                    timeout=args.timeout,
                    recv_buffer=args.recv_buf,
                )
                runs.append(stats.to_dict())
            _dump_json({"runs": runs}, args.out)

    return _run(go)


def mean_wall_time_dicts(runs) -> float:
    return sum(r["wall_time"] for r in runs) / len(runs)


# ---------------------------------------------------------------------------
# tracesim


def main_tracesim(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tracesim", description="Offline trace defenses.")
    sub = parser.add_subparsers(dest="command", required=True)

    ob = sub.add_parser("obfuscate", help="random segmentation over a trace")
    ob.add_argument("--in", dest="infile", required=True)
    ob.add_argument("--profile", default="low-bandwidth")
    ob.add_argument("--prob", type=float, default=None)
    ob.add_argument("--time-overhead", type=float, default=0.2)
    ob.add_argument("--header-bytes", type=int, default=82)
    ob.add_argument("--seed", type=int, default=0)
    ob.add_argument("--out", required=True)

    pad = sub.add_parser("pad", help="random-padding baseline over a trace")
    pad.add_argument("--in", dest="infile", required=True)
    pad.add_argument("--mtu-frame", type=int, default=1582)
    pad.add_argument("--header-bytes", type=int, default=82)
    pad.add_argument("--seed", type=int, default=0)
    pad.add_argument("--out", required=True)

    cover = sub.add_parser("cover", help="rate-matching cover injection")
    cover.add_argument("--target", required=True)
    cover.add_argument("--reference", required=True)
    cover.add_argument("--window", type=float, default=30.0)
    cover.add_argument("--header-bytes", type=int, default=82)
    cover.add_argument("--seed", type=int, default=0)
    cover.add_argument("--out", required=True)

    synth = sub.add_parser("synth", help="synthesize a trace from a device profile")
    synth.add_argument("--profile", required=True, help="preset name or profile JSON path")
    synth.add_argument("--duration", type=float, default=3600.0)
    synth.add_argument("--header-bytes", type=int, default=82)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    def go():
        if args.command == "obfuscate":
            trace = ingest_trace(args.infile, header_bytes=args.header_bytes)
            config = _segmentation(args.profile, args.prob, args.seed)
            out = obfuscate_trace(trace, config, args.time_overhead, args.seed)
            write_trace(out, args.out)
            print(f"{len(trace)} -> {len(out)} records")
        elif args.command == "pad":
            trace = ingest_trace(args.infile, header_bytes=args.header_bytes)
            out = pad_trace(trace, args.mtu_frame, args.seed)
            write_trace(out, args.out)
            print(f"{trace.total_bytes} -> {out.total_bytes} bytes")
        elif args.command == "cover":
            target = ingest_trace(args.target, header_bytes=args.header_bytes)
            reference = ingest_trace(args.reference, header_bytes=args.header_bytes)
            result = inject_cover_traffic(target, reference, args.window, args.seed)
            write_trace(result.trace, args.out)
            print(
                f"cover bytes {result.cover_bytes} "
                f"({result.cover_fraction * 100:.1f}% of original)"
            )
        else:
            profile = _device(args.profile)
            trace = synthesize_trace(
                profile, args.duration, args.seed, header_bytes=args.header_bytes
            )
            write_trace(trace, args.out)
            print(f"{len(trace)} records for {profile.name}")

    return _run(go)


# ---------------------------------------------------------------------------
# attackeval


def main_attackeval(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attackeval", description="Window-based device fingerprinting attack."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="train and evaluate the forest on traces")
    run.add_argument("--traces", nargs="+", required=True, help="one trace file per device")
    run.add_argument("--window", type=float, default=30.0)
    run.add_argument("--veclen", type=int, default=200)
    run.add_argument("--train-fraction", type=float, default=0.7)
    run.add_argument("--trees", type=int, default=100)
    run.add_argument("--max-depth", type=int, default=None)
    run.add_argument("--header-bytes", type=int, default=82)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    args = parser.parse_args(argv)

    def go():
        traces = [ingest_trace(p, header_bytes=args.header_bytes) for p in args.traces]
        metrics = run_attack(
            traces,
            window_s=args.window,
            vector_len=args.veclen,
            train_fraction=args.train_fraction,
            n_trees=args.trees,
            max_depth=args.max_depth,
            seed=args.seed,
        )
        _dump_json(metrics.to_dict(), args.out)

    return _run(go)


if __name__ == "__main__":
    sys.exit(main_segshield())
