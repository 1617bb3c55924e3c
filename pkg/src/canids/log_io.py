"""Canonical labeled CAN log format.

One frame per line::

    label,timestamp,interface,can_id_hex,dlc,payload_hex

``label`` is 0 (benign) or 1 (attack); ``timestamp`` is fixed-point seconds
with exactly six decimals; ``can_id_hex`` is 1-8 uppercase hex digits with
no prefix; ``payload_hex`` is exactly ``2*dlc`` hex digits (empty when
dlc=0).  Lines starting with ``#`` carry ``key=value`` metadata and are
only written at the top of a file.  Files are UTF-8 with LF endings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import LogFormatError, MalformedFrame
from .frame_codec import CAN_ID_MAX, RawFrame

_TS_RE = re.compile(r"^\d+\.\d{6}$")
_ID_RE = re.compile(r"^[0-9A-F]{1,8}$")
_PAYLOAD_RE = re.compile(r"^[0-9a-fA-F]*$")


@dataclass(slots=True)
class CanLog:
    """Header metadata plus an ordered frame sequence."""

    header: dict[str, str] = field(default_factory=dict)
    frames: list[RawFrame] = field(default_factory=list)

    def validate(self) -> None:
        prev = 0.0
        for i, frame in enumerate(self.frames):
            if frame.timestamp < prev:
                raise LogFormatError(
                    f"timestamp regression at frame {i}: "
                    f"{frame.timestamp:.6f} after {prev:.6f}"
                )
            prev = frame.timestamp

    def benign_ids(self) -> list[int]:
        return sorted({f.can_id for f in self.frames if f.label == 0})


def _parse_frame_line(line: str, line_no: int) -> RawFrame:
    parts = line.split(",")
    if len(parts) != 6:
        raise LogFormatError(f"expected 6 comma-separated fields, got {len(parts)}", line_no)
    label_s, ts_s, interface, id_s, dlc_s, payload_s = parts
    if label_s not in ("0", "1"):
        raise LogFormatError(f"label must be 0 or 1, got {label_s!r}", line_no)
    if not _TS_RE.match(ts_s):
        raise LogFormatError(f"timestamp {ts_s!r} is not fixed-point with 6 decimals", line_no)
    if not _ID_RE.match(id_s):
        raise LogFormatError(f"can_id {id_s!r} is not 1-8 uppercase hex digits", line_no)
    can_id = int(id_s, 16)
    if can_id > CAN_ID_MAX:
        raise LogFormatError(f"can_id {id_s} exceeds 29 bits", line_no)
    if not dlc_s.isdigit():
        raise LogFormatError(f"dlc {dlc_s!r} is not an integer", line_no)
    dlc = int(dlc_s)
    if dlc > 8:
        raise LogFormatError(f"dlc {dlc} exceeds 8", line_no)
    if len(payload_s) != 2 * dlc or not _PAYLOAD_RE.match(payload_s):
        raise LogFormatError(
            f"payload {payload_s!r} is not exactly {2 * dlc} hex digits", line_no
        )
    try:
        return RawFrame(
            label=int(label_s),
            timestamp=float(ts_s),
            interface=interface,
            can_id=can_id,
            dlc=dlc,
            payload=bytes.fromhex(payload_s) if payload_s else b"",
        )
    except MalformedFrame as exc:
        raise LogFormatError(str(exc), line_no) from exc


def iter_frames(path: str | Path) -> Iterator[tuple[int, RawFrame]]:
    """Yield (line_no, frame) lazily; header lines are skipped.

    Timestamp ordering is checked incrementally so a regression is
    reported as soon as it is read, with its line number.
    """
    prev_ts = 0.0
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                continue
            frame = _parse_frame_line(line, line_no)
            if frame.timestamp < prev_ts:
                raise LogFormatError(
                    f"timestamp regression: {frame.timestamp:.6f} after {prev_ts:.6f}",
                    line_no,
                )
            prev_ts = frame.timestamp
            yield line_no, frame


def read_header(path: str | Path) -> dict[str, str]:
    header: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" not in body:
                raise LogFormatError(f"header line without key=value: {line!r}", line_no)
            key, value = body.split("=", 1)
            header[key.strip()] = value.strip()
    return header


def read_log(path: str | Path) -> CanLog:
    """Read a whole log eagerly; raises on the first malformed line."""
    header = read_header(path)
    frames = [frame for _, frame in iter_frames(path)]
    return CanLog(header=header, frames=frames)


def format_frame(frame: RawFrame) -> str:
    return (
        f"{frame.label},{frame.timestamp:.6f},{frame.interface},"
        f"{frame.can_id:X},{frame.dlc},{frame.payload.hex().upper()}"
    )


def write_log(log: CanLog, path: str | Path) -> None:
    """Write a log; timestamps are serialized at microsecond precision.

    Logs whose timestamps sit on the microsecond grid round-trip exactly
    through :func:`read_log`.
    """
    log.validate()
    for key, value in log.header.items():
        if "\n" in key or "\n" in value or "=" in key:
            raise LogFormatError(f"header entry {key!r} cannot be serialized")
    for i, frame in enumerate(log.frames):
        if "," in frame.interface or "\n" in frame.interface:
            raise LogFormatError(f"frame {i}: interface tag {frame.interface!r} contains a delimiter")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in log.header.items():
            fh.write(f"# {key}={value}\n")
        for frame in log.frames:
            fh.write(format_frame(frame) + "\n")
