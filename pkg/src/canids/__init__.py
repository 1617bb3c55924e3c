"""Protocol-independent graph-based intrusion detection for CAN bus traffic.

The pipeline: decode logged frames (29-bit identifier fields plus transfer
framing), slice the stream into 100-message window graphs with
timestamp-sum edge weights, compute per-node rank and density features,
and train graph classifiers to label nodes benign or attacked.  A
synthetic traffic generator reproduces the ten benchmark attack scenarios
at desk scale.
"""

from .errors import CanidsError
from .features import FeatureConfig, FeatureTable, make_feature_table, pagerank
from .frame_codec import (
    DecodedMessage,
    RawFrame,
    TailByte,
    UavcanId,
    decode_can_id,
    decode_message,
    decode_stream,
    decode_tail_byte,
)
from .graph_stream import FrameSample, WindowGraph, build_windows
from .log_io import CanLog, read_log, write_log
from .traffic_synth import Episode, Publisher, ScenarioSpec, build_scenario, scenario_spec

__version__ = "0.1.0"

__all__ = [
    "CanLog",
    "CanidsError",
    "DecodedMessage",
    "Episode",
    "FeatureConfig",
    "FeatureTable",
    "FrameSample",
    "Publisher",
    "RawFrame",
    "ScenarioSpec",
    "TailByte",
    "UavcanId",
    "WindowGraph",
    "build_scenario",
    "build_windows",
    "decode_can_id",
    "decode_message",
    "decode_stream",
    "decode_tail_byte",
    "make_feature_table",
    "pagerank",
    "read_log",
    "scenario_spec",
    "write_log",
    "__version__",
]
