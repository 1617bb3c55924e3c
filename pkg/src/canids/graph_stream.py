"""Weighted directed window graphs from a decoded message stream.

Every 100 consecutive messages form one window.  Nodes are the distinct
CAN ids seen in the window.  For each adjacent message pair inside the
window an edge from the earlier id to the later id accumulates the
timestamp gap as weight; when the two ids are equal, a self-loop is added
only if the transfer ids differ (an unchanged transfer id means the pair
belongs to one multi-frame message, so no edge).  Pairs straddling a
window boundary contribute nothing.  The trailing short window, if any,
is emitted flagged partial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple

from .errors import GraphBuildError
from .frame_codec import DecodedMessage

WINDOW_SIZE = 100


class FrameSample(NamedTuple):
    """The four per-message fields graph construction consumes."""

    timestamp: float
    can_id: int
    transfer_id: int
    label: int


@dataclass(slots=True)
class WindowGraph:
    index: int
    nodes: frozenset[int]
    edges: dict[tuple[int, int], float]
    node_labels: dict[int, int]
    node_counts: dict[int, int]
    frames: tuple[FrameSample, ...]
    partial: bool = False

    def sorted_nodes(self) -> list[int]:
        return sorted(self.nodes)


def samples_from_messages(messages: Iterable[DecodedMessage]) -> Iterator[FrameSample]:
    for msg in messages:
        yield FrameSample(msg.timestamp, msg.can_id, msg.transfer_id, msg.label)


def node_labels(frames: Iterable[FrameSample]) -> dict[int, int]:
    """A node is attacked iff any of its frames in the window is labeled 1."""
    labels: dict[int, int] = {}
    for f in frames:
        labels[f.can_id] = labels.get(f.can_id, 0) | f.label
    return labels


def _window_graph(index: int, frames: list[FrameSample], partial: bool) -> WindowGraph:
    edges: dict[tuple[int, int], float] = {}
    counts: dict[int, int] = {}
    for f in frames:
        counts[f.can_id] = counts.get(f.can_id, 0) + 1
    for a, b in zip(frames, frames[1:]):
        if a.can_id != b.can_id:
            key = (a.can_id, b.can_id)
        elif a.transfer_id != b.transfer_id:
            key = (a.can_id, a.can_id)
        else:
            continue  # multi-frame continuation
        edges[key] = edges.get(key, 0.0) + (b.timestamp - a.timestamp)
    return WindowGraph(
        index=index,
        nodes=frozenset(counts),
        edges=edges,
        node_labels=node_labels(frames),
        node_counts=counts,
        frames=tuple(frames),
        partial=partial,
    )


def build_windows(
    samples: Iterable[FrameSample | tuple], window_size: int = WINDOW_SIZE
) -> Iterator[WindowGraph]:
    """Slice the stream into consecutive non-overlapping windows.

    Raises :class:`GraphBuildError` on a timestamp regression, naming the
    offending stream position.
    """
    if window_size < 1:
        raise GraphBuildError(f"window size must be >= 1, got {window_size}")
    buffer: list[FrameSample] = []
    index = 0
    prev_ts = None
    position = 0
    for raw in samples:
        sample = raw if isinstance(raw, FrameSample) else FrameSample(*raw)
        if prev_ts is not None and sample.timestamp < prev_ts:
            raise GraphBuildError(
                f"timestamp regression at stream position {position}: "
                f"{sample.timestamp:.6f} after {prev_ts:.6f}"
            )
        prev_ts = sample.timestamp
        position += 1
        buffer.append(sample)
        if len(buffer) == window_size:
            yield _window_graph(index, buffer, partial=False)
            buffer = []
            index += 1
    if buffer:
        yield _window_graph(index, buffer, partial=True)


def format_window(window: WindowGraph) -> str:
    """One-line debug form: ``index; SRC>DST:weight; ...`` (hex ids)."""
    parts = [str(window.index)]
    for (src, dst) in sorted(window.edges):
        parts.append(f"{src:X}>{dst:X}:{window.edges[(src, dst)]:.6f}")
    return "; ".join(parts)


def dump_windows(windows: Iterable[WindowGraph], fh: IO[str]) -> None:
    for window in windows:
        fh.write(format_window(window) + "\n")
