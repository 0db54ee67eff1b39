"""Named presets: segmentation parameter sets and synthetic device profiles.

Segmentation presets
    low-bandwidth   chatty low-rate devices, one band [5, 20]
    high-bandwidth  bulk senders, three bands keyed by message size
    rand-low        benchmark profile, near-MSS chunks [1200, 1400]
    rand-high       benchmark profile, wide chunk spread [100, 1400]

Device profiles are synthetic stand-ins for small-appliance traffic.
bulb-like and plug-like form a confusion pair: same frame sizes with
mirrored weights and different rates, so an undefended classifier
separates them but segmentation leaves little to key on.
"""

from __future__ import annotations

from .segcore import LevelBand, SegmentationConfig
from .tracesim import DeviceProfile

_SEGMENTATION_PRESETS: dict[str, dict] = {
    "low-bandwidth": {
        "prob": 0.8,
        "bands": ((5, 20, None),),
    },
    "high-bandwidth": {
        "prob": 0.8,
        "bands": ((20, 40, 200), (100, 300, 500), (500, 1000, None)),
    },
    # Benchmark profiles: always-on shaping, chunk ceiling at the common
    # 1400-byte application write size.
    "rand-low": {
        "prob": 1.0,
        "bands": ((1200, 1400, None),),
    },
    "rand-high": {
        "prob": 1.0,
        "bands": ((100, 1400, None),),
    },
}


def segmentation_profile(
    name: str,
    prob: float | None = None,
    seed: int = 0,
    mss: int = 1460,
    mtu: int = 1500,
) -> SegmentationConfig:
    """Build a SegmentationConfig from a named preset, with overrides."""
    try:
        preset = _SEGMENTATION_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(_SEGMENTATION_PRESETS))
        raise KeyError(f"unknown segmentation profile {name!r} (known: {known})") from None
    bands = tuple(
        LevelBand(min_seg=lo, max_seg=hi, upper_threshold=thr)
        for lo, hi, thr in preset["bands"]
    )
    return SegmentationConfig(
        prob=preset["prob"] if prob is None else prob,
        bands=bands,
        mss=mss,
        mtu=mtu,
        seed=seed,
    )


def segmentation_profile_names() -> tuple[str, ...]:
    return tuple(sorted(_SEGMENTATION_PRESETS))


def _mixed(sizes: dict[int, float], fraction: float) -> tuple[tuple[int, float], ...]:
    return tuple((length, weight * fraction) for length, weight in sizes.items())


# Confusion pair: identical frame support {102, 116, 130}, mirrored weights,
# rates chosen so one device's 30 s windows stay under the default vector
# length while the other's overflow it.
_PAIR_SIZES_A = {102: 0.45, 116: 0.31, 130: 0.24}
_PAIR_SIZES_B = {102: 0.24, 116: 0.31, 130: 0.45}

_DEVICE_PRESETS: dict[str, dict] = {
    "bulb-like": {
        "mean_rate": 5.0,
        "incoming": _mixed(_PAIR_SIZES_A, 0.7),
        "outgoing": _mixed(_PAIR_SIZES_A, 0.3),
    },
    "plug-like": {
        "mean_rate": 9.0,
        "incoming": _mixed(_PAIR_SIZES_B, 0.7),
        "outgoing": _mixed(_PAIR_SIZES_B, 0.3),
    },
    # Volume extremes for cover-traffic calibration.
    "camera-like": {
        "mean_rate": 40.0,
        "incoming": ((118, 0.35), (182, 0.15), (482, 0.08), (1382, 0.02)),
        "outgoing": ((118, 0.25), (182, 0.05), (482, 0.07), (1382, 0.03)),
    },
    "doorbell-like": {
        "mean_rate": 0.8,
        "incoming": ((134, 0.5), (166, 0.2)),
        "outgoing": ((134, 0.2), (166, 0.1)),
    },
}


def device_profile(name: str, mean_rate: float | None = None) -> DeviceProfile:
    """Build a DeviceProfile from a named preset."""
    try:
        preset = _DEVICE_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(_DEVICE_PRESETS))
        raise KeyError(f"unknown device profile {name!r} (known: {known})") from None
    return DeviceProfile(
        name=name,
        mean_rate=preset["mean_rate"] if mean_rate is None else mean_rate,
        incoming=preset["incoming"],
        outgoing=preset["outgoing"],
        mode_schedule=preset.get("mode_schedule", ()),
    )


def device_profile_names() -> tuple[str, ...]:
    return tuple(sorted(_DEVICE_PRESETS))
