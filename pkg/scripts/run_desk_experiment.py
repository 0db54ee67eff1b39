#!/usr/bin/env python3
"""Desk-scale defense evaluation over synthetic device traces.

For each seed: synthesize one trace per device, score the fingerprinting
attack on the raw traces, apply random segmentation, score it again, and
report accuracies plus byte overhead. Prints a per-seed table; optionally
dumps the numbers as JSON.
"""

import argparse
import json
import sys

from segshield.attackeval import run_attack
from segshield.profiles import device_profile, segmentation_profile
from segshield.report import byte_overhead
from segshield.rng import derive_seed
from segshield.tracesim import obfuscate_trace, synthesize_trace


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--devices",
        nargs=2,
        default=["bulb-like", "plug-like"],
        metavar=("A", "B"),
        help="device profile presets to confuse (default: bulb-like plug-like)",
    )
    parser.add_argument("--profile", default="low-bandwidth", help="segmentation preset")
    parser.add_argument("--prob", type=float, default=None, help="override segmentation probability")
    parser.add_argument("--duration", type=float, default=3600.0, help="trace length in seconds")
    parser.add_argument("--time-overhead", type=float, default=0.2, help="timestamp dilation factor")
    parser.add_argument("--seeds", type=int, default=10, help="number of seeds to sweep")
    parser.add_argument("--window", type=float, default=30.0, help="feature window in seconds")
    parser.add_argument("--veclen", type=int, default=200, help="feature vector length")
    parser.add_argument("--trees", type=int, default=100, help="forest size")
    parser.add_argument("--json", default=None, help="write results to this JSON file")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    config = segmentation_profile(args.profile, prob=args.prob)
    profiles = [device_profile(name) for name in args.devices]

    rows = []
    print(f"{'seed':>4}  {'undefended':>10}  {'defended':>8}  {'gap':>6}  {'overhead':>8}")
    for seed in range(args.seeds):
        raw = [
            synthesize_trace(prof, args.duration, derive_seed(seed, "trace", prof.name))
            for prof in profiles
        ]
        defended = [
            obfuscate_trace(tr, config, args.time_overhead, derive_seed(seed, "defend", tr.device))
            for tr in raw
        ]
        before = run_attack(
            raw, window_s=args.window, vector_len=args.veclen, n_trees=args.trees, seed=seed
        ).accuracy
        after = run_attack(
            defended, window_s=args.window, vector_len=args.veclen, n_trees=args.trees, seed=seed
        ).accuracy
        cost = byte_overhead(
            sum(tr.total_bytes for tr in raw), sum(tr.total_bytes for tr in defended)
        )
        rows.append(
            {
                "seed": seed,
                "undefended_accuracy": before,
                "defended_accuracy": after,
                "byte_overhead": float(cost),
            }
        )
        print(
            f"{seed:>4}  {before:>10.3f}  {after:>8.3f}  {before - after:>+6.3f}"
            f"  {float(cost) * 100:>7.1f}%"
        )

    mean_before = sum(r["undefended_accuracy"] for r in rows) / len(rows)
    mean_after = sum(r["defended_accuracy"] for r in rows) / len(rows)
    print(f"mean  {mean_before:>10.3f}  {mean_after:>8.3f}  {mean_before - mean_after:>+6.3f}")

    if args.json:
        payload = {
            "devices": args.devices,
            "profile": args.profile,
            "duration_s": args.duration,
            "rows": rows,
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
