"""Bit-exact decoding of CAN 2.0B identifiers and UAVCAN v0 transfer framing.

A 29-bit extended identifier packs, from the most significant bit down:
priority (5 bits), message type id (16 bits), service flag (1 bit) and
source node id (7 bits).  The last payload byte of every frame is a tail
byte: start-of-transfer (bit 7), end-of-transfer (bit 6), toggle (bit 5)
and a 5-bit transfer id.  The first frame of a multi-frame transfer starts
with a two-byte transfer CRC that is not application data.

Service frames reuse the same four identifier fields here; their finer
sub-structure is never consumed downstream, so it is not decomposed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import MalformedFrame

CAN_ID_BITS = 29
CAN_ID_MAX = (1 << CAN_ID_BITS) - 1
TRANSFER_ID_MAX = 31


@dataclass(frozen=True, slots=True)
class RawFrame:
    """One logged CAN 2.0B record with its ground-truth label."""

    label: int
    timestamp: float
    interface: str
    can_id: int
    dlc: int
    payload: bytes

    def __post_init__(self):
        if self.label not in (0, 1):
            raise MalformedFrame(f"label must be 0 or 1, got {self.label}")
        if self.timestamp < 0:
            raise MalformedFrame(f"negative timestamp {self.timestamp}")
        if not 0 <= self.can_id <= CAN_ID_MAX:
            raise MalformedFrame(f"can_id {self.can_id:#x} outside 29-bit range")
        if not 0 <= self.dlc <= 8:
            raise MalformedFrame(f"dlc {self.dlc} outside [0, 8]")
        if len(self.payload) != self.dlc:
            raise MalformedFrame(
                f"payload length {len(self.payload)} does not match dlc {self.dlc}"
            )


@dataclass(frozen=True, slots=True)
class UavcanId:
    """Fields of a 29-bit message identifier."""

    priority: int
    message_type_id: int
    service_flag: bool
    source_node_id: int

    def recompose(self) -> int:
        """Pack the fields back into the original 29-bit identifier."""
        return (
            (self.priority << 24)
            | (self.message_type_id << 8)
            | (int(self.service_flag) << 7)
            | self.source_node_id
        )


@dataclass(frozen=True, slots=True)
class TailByte:
    start_of_transfer: bool
    end_of_transfer: bool
    toggle: bool
    transfer_id: int

    def encode(self) -> int:
        return (
            (int(self.start_of_transfer) << 7)
            | (int(self.end_of_transfer) << 6)
            | (int(self.toggle) << 5)
            | self.transfer_id
        )


@dataclass(frozen=True, slots=True)
class DecodedMessage:
    """A raw frame plus its identifier fields, tail byte and app payload."""

    frame: RawFrame
    uavcan_id: UavcanId
    tail: TailByte
    app_payload: bytes
    warnings: tuple[str, ...] = ()

    @property
    def label(self) -> int:
        return self.frame.label

    @property
    def timestamp(self) -> float:
        return self.frame.timestamp

    @property
    def can_id(self) -> int:
        return self.frame.can_id

    @property
    def transfer_id(self) -> int:
        return self.tail.transfer_id


def decode_can_id(can_id: int) -> UavcanId:
    """Slice a 29-bit identifier into its four fields.

    Raises :class:`MalformedFrame` for values outside the 29-bit range,
    which can only come from a corrupt log record.
    """
    if not 0 <= can_id <= CAN_ID_MAX:
        raise MalformedFrame(f"can_id {can_id:#x} outside 29-bit range")
    return UavcanId(
        priority=(can_id >> 24) & 0x1F,
        message_type_id=(can_id >> 8) & 0xFFFF,
        service_flag=bool((can_id >> 7) & 0x1),
        source_node_id=can_id & 0x7F,
    )


def make_can_id(priority: int, message_type_id: int, service_flag: bool, source_node_id: int) -> int:
    """Compose a 29-bit identifier; the inverse of :func:`decode_can_id`."""
    if not 0 <= priority <= 0x1F:
        raise ValueError(f"priority {priority} outside [0, 31]")
    if not 0 <= message_type_id <= 0xFFFF:
        raise ValueError(f"message_type_id {message_type_id} outside [0, 65535]")
    if not 0 <= source_node_id <= 0x7F:
        raise ValueError(f"source_node_id {source_node_id} outside [0, 127]")
    return UavcanId(priority, message_type_id, service_flag, source_node_id).recompose()


def decode_tail_byte(b: int) -> TailByte:
    """Decode any byte as a tail byte; total over 0..255."""
    if not 0 <= b <= 0xFF:
        raise MalformedFrame(f"tail byte {b} outside [0, 255]")
    return TailByte(
        start_of_transfer=bool(b & 0x80),
        end_of_transfer=bool(b & 0x40),
        toggle=bool(b & 0x20),
        transfer_id=b & 0x1F,
    )


def encode_tail_byte(
    start_of_transfer: bool, end_of_transfer: bool, toggle: bool, transfer_id: int
) -> int:
    if not 0 <= transfer_id <= TRANSFER_ID_MAX:
        raise ValueError(f"transfer_id {transfer_id} outside [0, 31]")
    return TailByte(start_of_transfer, end_of_transfer, toggle, transfer_id).encode()


@dataclass(slots=True)
class TransferTracker:
    """Tracks open multi-frame transfers per CAN id to spot toggle faults.

    Violations are reported as warnings, never errors: fuzzed attack
    traffic is protocol-invalid by design and must still be ingested.
    """

    _open: dict[int, tuple[int, bool]] = field(default_factory=dict)

    def observe(self, can_id: int, tail: TailByte) -> list[str]:
        warnings = []
        if tail.start_of_transfer:
            if tail.toggle:
                warnings.append("transfer starts with toggle bit set")
            if tail.end_of_transfer:
                self._open.pop(can_id, None)
            else:
                self._open[can_id] = (tail.transfer_id, tail.toggle)
            return warnings

        state = self._open.get(can_id)
        if state is None or state[0] != tail.transfer_id:
            warnings.append("continuation frame without matching open transfer")
        elif tail.toggle == state[1]:
            warnings.append("toggle bit did not alternate within transfer")
        if tail.end_of_transfer:
            self._open.pop(can_id, None)
        else:
            self._open[can_id] = (tail.transfer_id, tail.toggle)
        return warnings


def decode_message(frame: RawFrame, tracker: TransferTracker | None = None) -> DecodedMessage:
    """Decode one frame: identifier fields, tail byte, application payload.

    The first frame of a multi-frame transfer (start set, end clear) drops
    its leading two transfer-CRC bytes from the application payload.
    """
    if frame.dlc == 0:
        raise MalformedFrame("dlc 0: a frame must carry at least a tail byte")
    tail = decode_tail_byte(frame.payload[-1])
    warnings: list[str] = []
    if tail.start_of_transfer and not tail.end_of_transfer:
        if frame.dlc < 3:
            warnings.append("multi-frame start too short to hold a transfer crc")
        app_payload = frame.payload[2:-1]
    else:
        app_payload = frame.payload[:-1]
    if tracker is not None:
        warnings.extend(tracker.observe(frame.can_id, tail))
    return DecodedMessage(
        frame=frame,
        uavcan_id=decode_can_id(frame.can_id),
        tail=tail,
        app_payload=app_payload,
        warnings=tuple(warnings),
    )


def decode_stream(frames: Iterable[RawFrame]) -> Iterator[DecodedMessage]:
    """Decode a frame stream with a fresh continuation tracker."""
    tracker = TransferTracker()
    for frame in frames:
        yield decode_message(frame, tracker)
