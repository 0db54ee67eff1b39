"""Traffic shaping through random message segmentation, with an offline
trace simulator, a fingerprinting adversary, and overhead reporting."""

from .errors import (
    ConfigurationError,
    IntegrityError,
    SegShieldError,
    TraceFormatError,
    TransportError,
)
from .rng import derive_seed, make_rng
from .segcore import (
    LevelBand,
    SegmentationConfig,
    SegmentPlan,
    iter_chunks,
    load_config,
    pad_packet_random,
    payload_capacity,
    plan_default_segments,
    save_config,
    segment_lengths,
    segment_message,
    select_band,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "IntegrityError",
    "SegShieldError",
    "TraceFormatError",
    "TransportError",
    "LevelBand",
    "SegmentationConfig",
    "SegmentPlan",
    "derive_seed",
    "iter_chunks",
    "load_config",
    "make_rng",
    "pad_packet_random",
    "payload_capacity",
    "plan_default_segments",
    "save_config",
    "segment_lengths",
    "segment_message",
    "select_band",
    "__version__",
]
