"""Overhead arithmetic and the three-arm experiment orchestrator.

Overheads are kept as exact fractions of raw byte/microsecond counts;
percent values are rounded only when rendered. The orchestrator runs the
none / padding / segmentation comparison over identical inputs and seeds
and writes a reproducible report directory (same config in, same bytes
out).
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .attackeval import Metrics, evaluate, extract_windows, split_dataset, train_forest
from .errors import ConfigurationError, SegShieldError
from .profiles import device_profile, segmentation_profile
from .rng import derive_seed
from .segcore import SegmentationConfig
from .tracesim import (
    DEFAULT_HEADER_BYTES,
    DeviceProfile,
    Trace,
    ingest_trace,
    inject_cover_traffic,
    obfuscate_trace,
    pad_trace,
    synthesize_trace,
    write_trace,
)


def byte_overhead(w_b, d_b) -> Fraction:
    """(defended - baseline) / baseline, exact."""
    w = Fraction(w_b)
    if w <= 0:
        raise ValueError("baseline byte count must be positive")
    return (Fraction(d_b) - w) / w


def time_overhead(w_t, d_t) -> Fraction:
    """(defended - baseline) / baseline, exact; negative means speedup."""
    w = Fraction(w_t)
    if w <= 0:
        raise ValueError("baseline duration must be positive")
    return (Fraction(d_t) - w) / w


@dataclass(frozen=True)
class OverheadResult:
    """Byte and time accounting for one device under one defense arm.

    d_b includes cover bytes as transferred; the headline byte overhead
    deducts them (cover carries no real payload)."""

    w_b: int
    d_b: int
    w_t_us: int
    d_t_us: int
    cover_bytes: int = 0

    @property
    def b(self) -> Fraction:
        return byte_overhead(self.w_b, self.d_b - self.cover_bytes)

    @property
    def b_with_cover(self) -> Fraction:
        return byte_overhead(self.w_b, self.d_b)

    @property
    def t(self) -> Fraction:
        if self.w_t_us == 0:
            return Fraction(0)
        return time_overhead(self.w_t_us, self.d_t_us)

    def to_dict(self) -> dict:
        return {
            "w_b": self.w_b,
            "d_b": self.d_b,
            "cover_bytes": self.cover_bytes,
            "b_exact": str(self.b),
            "b_percent": round(float(self.b) * 100, 6),
            "w_t_us": self.w_t_us,
            "d_t_us": self.d_t_us,
            "t_exact": str(self.t),
            "t_percent": round(float(self.t) * 100, 6),
        }


@dataclass(frozen=True)
class Report:
    config: dict
    seeds: dict
    metrics: dict[str, Metrics]
    overheads: dict[str, dict[str, OverheadResult]]

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "seeds": self.seeds,
            "metrics": {arm: m.to_dict() for arm, m in self.metrics.items()},
            "overheads": {
                arm: {device: o.to_dict() for device, o in rows.items()}
                for arm, rows in self.overheads.items()
            },
        }


_DEFAULTS = {
    "seed": 0,
    "duration_s": 3600.0,
    "window_s": 30.0,
    "vector_len": 200,
    "train_fraction": 0.7,
    "n_trees": 100,
    "max_depth": None,
    "time_overhead": 0.2,
    "header_bytes": DEFAULT_HEADER_BYTES,
    "mtu_frame": 1500 + DEFAULT_HEADER_BYTES,
    "segmentation": {"profile": "low-bandwidth"},
    "cover": {"enabled": False},
}


def _normalize_config(raw: dict) -> dict:
    cfg = dict(_DEFAULTS)
    cfg["cover"] = dict(_DEFAULTS["cover"])
    for key, value in raw.items():
        if key == "cover":
            cfg["cover"].update(value)
        elif key in cfg or key in ("devices", "traces"):
            cfg[key] = value
        else:
            raise ConfigurationError(f"unknown experiment config key {key!r}")
    if ("devices" in cfg) == ("traces" in cfg):
        raise ConfigurationError("config needs exactly one of 'devices' or 'traces'")
    return cfg


def _segmentation_config(entry, seed: int) -> SegmentationConfig:
    if isinstance(entry, str):
        return segmentation_profile(entry, seed=seed)
    if isinstance(entry, dict) and "profile" in entry:
        return segmentation_profile(
            entry["profile"], prob=entry.get("prob"), seed=seed
        )
    return SegmentationConfig.from_dict({**entry, "seed": seed})


def _device_profiles(entries: Sequence) -> list[DeviceProfile]:
    profiles = []
    for entry in entries:
        if isinstance(entry, str):
            profiles.append(device_profile(entry))
        elif isinstance(entry, dict) and set(entry) <= {"profile", "mean_rate"}:
            profiles.append(device_profile(entry["profile"], entry.get("mean_rate")))
        else:
            profiles.append(DeviceProfile.from_dict(entry))
    return profiles


class StageError(SegShieldError):
    """A pipeline stage failed; earlier artifacts are kept on disk."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def run_experiment(config: dict | str | Path, out_dir: str | Path | None = None) -> Report:
    """Run the full comparison and, when out_dir is given, write report.json,
    flat CSVs, and every intermediate trace for audit."""
    if not isinstance(config, dict):
        with open(config) as fh:
            config = json.load(fh)
    cfg = _normalize_config(config)
    master = int(cfg["seed"])
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "traces").mkdir(parents=True, exist_ok=True)

    def save(trace: Trace, device: str, arm: str) -> None:
        if out is not None:
            write_trace(trace, out / "traces" / f"{device}.{arm}.jsonl")

    stage = "inputs"
    try:
        if "devices" in cfg:
            profiles = _device_profiles(cfg["devices"])
            base = {
                p.name: synthesize_trace(
                    p,
                    float(cfg["duration_s"]),
                    derive_seed(master, "synth", p.name),
                    header_bytes=int(cfg["header_bytes"]),
                )
                for p in profiles
            }
        else:
            base = {}
            for path in cfg["traces"]:
                trace = ingest_trace(path, header_bytes=int(cfg["header_bytes"]))
                base[trace.device] = trace
        if len(base) < 2:
            raise ConfigurationError("experiment needs at least two devices")
        for device, trace in base.items():
            save(trace, device, "undefended")

        stage = "padding"
        seg_config = _segmentation_config(cfg["segmentation"], master)
        padded = {
            device: pad_trace(trace, int(cfg["mtu_frame"]), derive_seed(master, "pad", device))
            for device, trace in base.items()
        }
        for device, trace in padded.items():
            save(trace, device, "padded")

        stage = "segmentation"
        segmented = {
            device: obfuscate_trace(
                trace,
                seg_config,
                float(cfg["time_overhead"]),
                derive_seed(master, "seg", device),
            )
            for device, trace in base.items()
        }
        cover_bytes = {device: 0 for device in base}
        cover_cfg = cfg["cover"]
        if cover_cfg.get("enabled"):
            stage = "cover"
            reference = cover_cfg.get("reference")
            if reference not in segmented:
                raise ConfigurationError(f"cover reference {reference!r} is not a device")
            window = float(cover_cfg.get("window_s", cfg["window_s"]))
            for device in sorted(segmented):
                if device == reference:
                    continue
                result = inject_cover_traffic(
                    segmented[device],
                    segmented[reference],
                    window,
                    derive_seed(master, "cover", device),
                )
                segmented[device] = result.trace
                cover_bytes[device] = result.cover_bytes
        for device, trace in segmented.items():
            save(trace, device, "segmented")

        stage = "attack"
        arms = {"undefended": base, "padded": padded, "segmented": segmented}
        metrics: dict[str, Metrics] = {}
        for arm, traces in arms.items():
            vectors = []
            for device in sorted(traces):
                vectors.extend(
                    extract_windows(
                        traces[device], float(cfg["window_s"]), int(cfg["vector_len"])
                    )
                )
            # Split/forest seeds are shared across arms: identical inputs
            # (a no-op defense) then produce identical metric blocks.
            train, test = split_dataset(
                vectors,
                float(cfg["train_fraction"]),
                random.Random(derive_seed(master, "split")),
            )
            model = train_forest(
                train,
                n_trees=int(cfg["n_trees"]),
                max_depth=cfg["max_depth"],
                rng=random.Random(derive_seed(master, "forest")),
            )
            metrics[arm] = evaluate(model, test)

        stage = "overheads"
        overheads: dict[str, dict[str, OverheadResult]] = {}
        for arm in ("padded", "segmented"):
            rows: dict[str, OverheadResult] = {}
            tot_w = tot_d = tot_cov = tot_wt = tot_dt = 0
            for device in sorted(base):
                w, d = base[device], arms[arm][device]
                row = OverheadResult(
                    w_b=w.total_bytes,
                    d_b=d.total_bytes,
                    w_t_us=w.duration_us,
                    d_t_us=d.duration_us,
                    cover_bytes=cover_bytes[device] if arm == "segmented" else 0,
                )
                rows[device] = row
                tot_w += row.w_b
                tot_d += row.d_b
                tot_cov += row.cover_bytes
                tot_wt += row.w_t_us
                tot_dt += row.d_t_us
            # Totals aggregate raw bytes first, then divide.
            rows["total"] = OverheadResult(tot_w, tot_d, tot_wt, tot_dt, tot_cov)
            overheads[arm] = rows
    except SegShieldError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc

    seeds = {"master": master}
    report = Report(config=cfg, seeds=seeds, metrics=metrics, overheads=overheads)
    if out is not None:
        write_report(report, out)
    return report


def write_report(report: Report, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "accuracy", "precision", "recall", "f1"])
        for arm in sorted(report.metrics):
            m = report.metrics[arm]
            writer.writerow([arm, m.accuracy, m.precision, m.recall, m.f1])
    with open(out / "overhead.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["arm", "device", "w_b", "d_b", "cover_bytes", "b_percent", "t_percent"]
        )
        for arm in sorted(report.overheads):
            rows = report.overheads[arm]
            for device in sorted(rows):
                o = rows[device]
                writer.writerow(
                    [
                        arm,
                        device,
                        o.w_b,
                        o.d_b,
                        o.cover_bytes,
                        round(float(o.b) * 100, 6),
                        round(float(o.t) * 100, 6),
                    ]
                )
