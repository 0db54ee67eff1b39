"""Random segmentation of application messages, plus the two baselines it is
measured against: default MSS-sized segmentation and random packet padding.

Everything here is pure and deterministic given the caller's random source,
so traces and live transfers replay exactly from a seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import ConfigurationError

# IPv4 + TCP headers without options; a segment payload larger than
# mtu - this would force IP fragmentation.
TCP_IP_HEADER_BYTES = 40


def payload_capacity(mtu: int) -> int:
    return mtu - TCP_IP_HEADER_BYTES


@dataclass(frozen=True)
class LevelBand:
    """One segmentation level: messages up to ``upper_threshold`` bytes are
    split into chunks drawn uniformly from [min_seg, max_seg].

    ``upper_threshold=None`` marks the catch-all band for larger messages.
    """

    min_seg: int
    max_seg: int
    upper_threshold: int | None = None

    def __post_init__(self):
        if not 0 < self.min_seg <= self.max_seg:
            raise ConfigurationError(
                f"band requires 0 < min_seg <= max_seg, got [{self.min_seg}, {self.max_seg}]"
            )
        if self.upper_threshold is not None and self.upper_threshold < 1:
            raise ConfigurationError("upper_threshold must be positive or None")

    def covers(self, msg_len: int) -> bool:
        return self.upper_threshold is None or msg_len <= self.upper_threshold


@dataclass(frozen=True)
class SegmentationConfig:
    """Tunable knobs of the defense: firing probability, level bands, and the
    transport constants the bands must respect."""

    prob: float
    bands: tuple[LevelBand, ...]
    mss: int = 1460
    mtu: int = 1500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(self.bands))
        if not 0.0 <= self.prob <= 1.0:
            raise ConfigurationError(f"prob must lie in [0, 1], got {self.prob}")
        if not self.bands:
            raise ConfigurationError("at least one band is required")
        capacity = payload_capacity(self.mtu)
        if not 1 <= self.mss <= capacity:
            raise ConfigurationError(
                f"mss {self.mss} exceeds MTU payload capacity {capacity}"
            )
        thresholds = [b.upper_threshold for b in self.bands]
        for i, t in enumerate(thresholds):
            if t is None and i != len(thresholds) - 1:
                raise ConfigurationError("only the final band may be open-ended")
        finite = [t for t in thresholds if t is not None]
        if any(a >= b for a, b in zip(finite, finite[1:])):
            raise ConfigurationError("band thresholds must strictly increase")
        for b in self.bands:
            if b.max_seg > capacity:
                raise ConfigurationError(
                    f"band max_seg {b.max_seg} exceeds MTU payload capacity {capacity}"
                )

    @classmethod
    def from_dict(cls, raw: dict) -> "SegmentationConfig":
        try:
            bands = tuple(
                LevelBand(
                    min_seg=int(b["min_seg"]),
                    max_seg=int(b["max_seg"]),
                    upper_threshold=(
                        None if b.get("upper_threshold") is None else int(b["upper_threshold"])
                    ),
                )
                for b in raw["bands"]
            )
            return cls(
                prob=float(raw["prob"]),
                bands=bands,
                mss=int(raw.get("mss", 1460)),
                mtu=int(raw.get("mtu", 1500)),
                seed=int(raw.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed segmentation config: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "prob": self.prob,
            "mss": self.mss,
            "mtu": self.mtu,
            "seed": self.seed,
            "bands": [
                {
                    "upper_threshold": b.upper_threshold,
                    "min_seg": b.min_seg,
                    "max_seg": b.max_seg,
                }
                for b in self.bands
            ],
        }


def load_config(path: str | Path) -> SegmentationConfig:
    with open(path) as fh:
        return SegmentationConfig.from_dict(json.load(fh))


def save_config(config: SegmentationConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SegmentPlan:
    """Chunk lengths for one message. ``segmented`` records whether the
    random split fired or the message passed through untouched."""

    lengths: tuple[int, ...]
    segmented: bool

    def __post_init__(self):
        if not self.lengths:
            raise ValueError("a plan needs at least one chunk")
        if any(n <= 0 for n in self.lengths):
            raise ValueError("chunk lengths must be positive")

    @property
    def total(self) -> int:
        return sum(self.lengths)


def plan_default_segments(n: int, mss: int) -> SegmentPlan:
    """Undefended transport behaviour: ceil(n/mss) segments, all of size mss
    except a final remainder."""
    if n < 1:
        raise ValueError(f"message length must be >= 1, got {n}")
    if mss < 1:
        raise ValueError(f"mss must be >= 1, got {mss}")
    full, rem = divmod(n, mss)
    lengths = [mss] * full
    if rem:
        lengths.append(rem)
    return SegmentPlan(tuple(lengths), segmented=False)


def select_band(msg_len: int, config: SegmentationConfig) -> LevelBand:
    """Pick the first band whose threshold admits ``msg_len`` (inclusive);
    the final band is the catch-all."""
    if msg_len < 1:
        raise ValueError(f"message length must be >= 1, got {msg_len}")
    for band in config.bands:
        if band.covers(msg_len):
            return band
    return config.bands[-1]


def segment_lengths(n: int, config: SegmentationConfig, rng: random.Random) -> SegmentPlan:
    """Split an ``n``-byte message into randomly sized chunks.

    Messages shorter than the band's min_seg, or losing the probability
    draw, pass through whole. Otherwise chunk lengths are drawn uniformly
    from [min_seg, max_seg]; once the remaining bytes fit inside one draw
    the final chunk takes them all, so only the final chunk may be shorter
    than min_seg (and it never exceeds max_seg).
    """
    if n < 1:
        raise ValueError(f"message length must be >= 1, got {n}")
    band = select_band(n, config)
    # Short-circuit keeps the probability draw unconsumed for ineligible
    # messages, mirroring the send-path behaviour exactly.
    if n < band.min_seg or rng.random() > config.prob:
        return SegmentPlan((n,), segmented=False)
    lengths: list[int] = []
    start = 0
    while start < n:
        rand_len = rng.randint(band.min_seg, band.max_seg)
        index = n if start + rand_len >= n else start + rand_len
        lengths.append(index - start)
        start = index
    return SegmentPlan(tuple(lengths), segmented=True)


def segment_message(
    data: bytes | bytearray | memoryview, config: SegmentationConfig, rng: random.Random
) -> SegmentPlan:
    """Plan the random segmentation of a concrete message."""
    if len(data) == 0:
        raise ValueError("cannot segment an empty message")
    return segment_lengths(len(data), config, rng)


def iter_chunks(data: bytes | bytearray | memoryview, plan: SegmentPlan) -> Iterator[memoryview]:
    """Yield the chunk views a plan prescribes; concatenation == data."""
    view = memoryview(data)
    if len(view) != plan.total:
        raise ValueError(f"plan covers {plan.total} bytes, message has {len(view)}")
    start = 0
    for length in plan.lengths:
        yield view[start : start + length]
        start += length


def pad_packet_random(payload_len: int, mtu_payload: int, rng: random.Random) -> int:
    """Random-padding baseline: grow the payload by a uniform amount of
    filler, up to the packet ceiling. Full packets stay untouched."""
    if payload_len < 1:
        raise ValueError(f"payload length must be >= 1, got {payload_len}")
    if payload_len > mtu_payload:
        raise ValueError(
            f"payload {payload_len} exceeds packet ceiling {mtu_payload}"
        )
    available = mtu_payload - payload_len
    if available == 0:
        return payload_len
    return payload_len + rng.randint(1, available)
