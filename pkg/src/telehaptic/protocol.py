"""Bit-exact binary wire protocol between master and slave endpoints.

Frame layout, all little-endian:

    magic 0x54 0x48 | version u8 = 1 | msg_type u8 | seq u32 |
    sim_timestamp_us u64 | payload_len u16 | payload | crc32 u32

The CRC (IEEE polynomial) covers every byte before it. Quantizations are
chosen so the physical ranges are exactly representable: positions in
micrometers (i32), angles in millidegrees (i32), gripper opening in
permille (u16, 0xFFFF = no contact recorded), tactile cells in
centinewtons (u16), rendered force in millinewtons (u32), liquid deltas in
signed microliters (i64).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Tuple, Union

MAGIC = b"\x54\x48"
VERSION = 1

CONTACT_UNSET = 0xFFFF


class MsgType(IntEnum):
    TCP_COMMAND = 0x01
    GRIPPER_COMMAND = 0x02
    ROBOT_STATE = 0x03
    TACTILE_FRAME = 0x04
    FORCE_FEEDBACK = 0x05
    SCENE_EVENT = 0x06
    CONFIG_SET = 0x07


class ConfigKey(IntEnum):
    SCALE_FACTOR = 0x01
    LOCK_MASK = 0x02


class EventCode(IntEnum):
    GRASPED = 0x01
    DROPPED = 0x02
    LIQUID_DRAWN = 0x03
    LIQUID_DISPENSED = 0x04
    LIQUID_SPILLED = 0x05
    SESSION_CLOSED = 0x06


class LocationCode(IntEnum):
    NONE = 0x00
    BEAKER = 0x01
    SPILL = 0x02
    TUBE_BASE = 0x10  # tube i encodes as TUBE_BASE + i


class ProtocolError(Exception):
    pass


class ProtocolVersionError(ProtocolError):
    """Wrong magic bytes or unsupported version."""


class CorruptionError(ProtocolError):
    """CRC mismatch: the frame was damaged in transit."""


class UnknownTypeError(ProtocolError):
    """Valid frame carrying an unrecognized msg_type."""


class PayloadSizeError(ProtocolError):
    """Valid frame whose payload length does not match its type."""


class NeedMoreData(ProtocolError):
    """The buffer ends before the frame does; feed more bytes."""


# -- payload value types ------------------------------------------------


@dataclass(frozen=True)
class TcpCommandPayload:
    x_um: int
    y_um: int
    z_um: int
    rx_mdeg: int
    ry_mdeg: int
    rz_mdeg: int


@dataclass(frozen=True)
class GripperCommandPayload:
    opening_permille: int


@dataclass(frozen=True)
class RobotStatePayload:
    x_um: int
    y_um: int
    z_um: int
    rx_mdeg: int
    ry_mdeg: int
    rz_mdeg: int
    opening_permille: int
    contact_permille: int = CONTACT_UNSET


@dataclass(frozen=True)
class TactileFramePayload:
    finger: int  # 0 left, 1 right
    cells_cn: Tuple[int, ...]  # 50 centinewton values, row-major

    def __post_init__(self):
        object.__setattr__(self, "cells_cn", tuple(self.cells_cn))
        if len(self.cells_cn) != 50:
            raise ValueError(f"expected 50 cells, got {len(self.cells_cn)}")


@dataclass(frozen=True)
class ForceFeedbackPayload:
    force_mn: int


@dataclass(frozen=True)
class SceneEventPayload:
    event_code: int
    volume_delta_ul: int
    location_code: int


@dataclass(frozen=True)
class ConfigSetPayload:
    key: int
    value: int


Payload = Union[
    TcpCommandPayload,
    GripperCommandPayload,
    RobotStatePayload,
    TactileFramePayload,
    ForceFeedbackPayload,
    SceneEventPayload,
    ConfigSetPayload,
]


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    seq: int
    sim_timestamp_us: int
    payload: Payload


_HEADER = struct.Struct("<2sBBIQH")
_CRC = struct.Struct("<I")

_STRUCTS = {
    MsgType.TCP_COMMAND: struct.Struct("<6i"),
    MsgType.GRIPPER_COMMAND: struct.Struct("<H"),
    MsgType.ROBOT_STATE: struct.Struct("<6i2H"),
    MsgType.TACTILE_FRAME: struct.Struct("<B50H"),
    MsgType.FORCE_FEEDBACK: struct.Struct("<I"),
    MsgType.SCENE_EVENT: struct.Struct("<BqB"),
    MsgType.CONFIG_SET: struct.Struct("<2B"),
}

PAYLOAD_SIZES = {t: s.size for t, s in _STRUCTS.items()}

HEADER_SIZE = _HEADER.size
OVERHEAD = HEADER_SIZE + _CRC.size


def _pack_payload(msg_type: MsgType, payload: Payload) -> bytes:
    s = _STRUCTS[msg_type]
    if msg_type is MsgType.TCP_COMMAND:
        p = payload
        return s.pack(p.x_um, p.y_um, p.z_um, p.rx_mdeg, p.ry_mdeg, p.rz_mdeg)
    if msg_type is MsgType.GRIPPER_COMMAND:
        return s.pack(payload.opening_permille)
    if msg_type is MsgType.ROBOT_STATE:
        p = payload
        return s.pack(p.x_um, p.y_um, p.z_um, p.rx_mdeg, p.ry_mdeg, p.rz_mdeg,
                      p.opening_permille, p.contact_permille)
    if msg_type is MsgType.TACTILE_FRAME:
        return s.pack(payload.finger, *payload.cells_cn)
    if msg_type is MsgType.FORCE_FEEDBACK:
        return s.pack(payload.force_mn)
    if msg_type is MsgType.SCENE_EVENT:
        return s.pack(payload.event_code, payload.volume_delta_ul, payload.location_code)
    if msg_type is MsgType.CONFIG_SET:
        return s.pack(payload.key, payload.value)
    raise UnknownTypeError(f"cannot encode msg_type {msg_type}")


def _unpack_payload(msg_type: MsgType, raw: bytes) -> Payload:
    values = _STRUCTS[msg_type].unpack(raw)
    if msg_type is MsgType.TCP_COMMAND:
        return TcpCommandPayload(*values)
    if msg_type is MsgType.GRIPPER_COMMAND:
        return GripperCommandPayload(*values)
    if msg_type is MsgType.ROBOT_STATE:
        return RobotStatePayload(*values)
    if msg_type is MsgType.TACTILE_FRAME:
        return TactileFramePayload(values[0], values[1:])
    if msg_type is MsgType.FORCE_FEEDBACK:
        return ForceFeedbackPayload(*values)
    if msg_type is MsgType.SCENE_EVENT:
        return SceneEventPayload(*values)
    if msg_type is MsgType.CONFIG_SET:
        return ConfigSetPayload(*values)
    raise UnknownTypeError(f"cannot decode msg_type {msg_type}")


def payload_bytes(msg: WireMessage) -> bytes:
    """The packed payload section of a message, e.g. for digesting."""
    return _pack_payload(msg.msg_type, msg.payload)


def encode(msg: WireMessage) -> bytes:
    """Serialize one message to its wire frame."""
    payload = _pack_payload(msg.msg_type, msg.payload)
    head = _HEADER.pack(MAGIC, VERSION, int(msg.msg_type), msg.seq,
                        msg.sim_timestamp_us, len(payload))
    body = head + payload
    return body + _CRC.pack(zlib.crc32(body))


def decode(buf, offset: int = 0) -> Tuple[WireMessage, int]:
    """Decode one frame starting at offset; returns (message, bytes consumed).

    Raises NeedMoreData when the buffer ends mid-frame,
    ProtocolVersionError on bad magic/version, CorruptionError on CRC
    mismatch, UnknownTypeError / PayloadSizeError on a valid frame with an
    unusable interior.
    """
    if len(buf) - offset < HEADER_SIZE:
        raise NeedMoreData("incomplete header")
    magic, version, raw_type, seq, timestamp, payload_len = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise ProtocolVersionError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolVersionError(f"unsupported version {version}")
    total = HEADER_SIZE + payload_len + _CRC.size
    if len(buf) - offset < total:
        raise NeedMoreData(f"frame needs {total} bytes")
    crc_at = offset + HEADER_SIZE + payload_len
    (crc,) = _CRC.unpack_from(buf, crc_at)
    if zlib.crc32(buf[offset:crc_at]) != crc:
        raise CorruptionError(f"crc mismatch on seq {seq}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise UnknownTypeError(f"unknown msg_type 0x{raw_type:02x}") from None
    if payload_len != PAYLOAD_SIZES[msg_type]:
        raise PayloadSizeError(
            f"{msg_type.name} payload must be {PAYLOAD_SIZES[msg_type]} bytes, got {payload_len}"
        )
    payload = _unpack_payload(msg_type, buf[offset + HEADER_SIZE:crc_at])
    return WireMessage(msg_type, seq, timestamp, payload), total


class FrameDecoder:
    """Streaming reassembler with resynchronization.

    Feed byte chunks in any framing; poll() yields complete messages. A
    damaged frame is reported once (corruption_errors) and the decoder
    rescans for the next magic, suppressing further errors until a frame
    decodes cleanly, so one corrupted frame costs exactly one error.
    """

    def __init__(self):
        self._buf = bytearray()
        self._resyncing = False
        self.corruption_errors = 0
        self.version_errors = 0
        self.unknown_type_count = 0

    def feed(self, data: bytes) -> None:
        self._buf.extend(data)

    def poll(self) -> List[WireMessage]:
        out = []
        while True:
            start = self._buf.find(MAGIC)
            if start < 0:
                # keep a trailing byte in case it is half a magic
                del self._buf[:max(0, len(self._buf) - 1)]
                return out
            if start > 0:
                del self._buf[:start]
            try:
                msg, consumed = decode(self._buf)
            except NeedMoreData:
                return out
            except CorruptionError:
                self._note_bad_frame()
                continue
            except ProtocolVersionError:
                # magic matched but version byte is wrong
                self._note_bad_frame(version=True)
                continue
            except (UnknownTypeError, PayloadSizeError):
                if not self._resyncing:
                    self.unknown_type_count += 1
                del self._buf[:2]
                continue
            del self._buf[:consumed]
            self._resyncing = False
            out.append(msg)

    def _note_bad_frame(self, version: bool = False) -> None:
        if not self._resyncing:
            if version:
                self.version_errors += 1
            else:
                self.corruption_errors += 1
            self._resyncing = True
        del self._buf[:2]  # skip this magic, rescan


# -- quantization helpers -------------------------------------------------


def mm_to_um(v: float) -> int:
    return int(round(v * 1000.0))


def um_to_mm(v: int) -> float:
    return v / 1000.0


def deg_to_mdeg(v: float) -> int:
    return int(round(v * 1000.0))


def mdeg_to_deg(v: int) -> float:
    return v / 1000.0


def opening_to_permille(v: Optional[float]) -> int:
    if v is None:
        return CONTACT_UNSET
    return min(1000, max(0, int(round(v * 1000.0))))


def permille_to_opening(v: int) -> Optional[float]:
    if v == CONTACT_UNSET:
        return None
    return v / 1000.0


def newton_to_cn(v: float) -> int:
    return int(round(v * 100.0))


def cn_to_newton(v: int) -> float:
    return v / 100.0


def newton_to_mn(v: float) -> int:
    return int(round(v * 1000.0))


def mn_to_newton(v: int) -> float:
    return v / 1000.0


def ml_to_ul(v: float) -> int:
    return int(round(v * 1000.0))


def pose_to_wire(position, orientation) -> Tuple[int, int, int, int, int, int]:
    return (
        mm_to_um(position[0]), mm_to_um(position[1]), mm_to_um(position[2]),
        deg_to_mdeg(orientation[0]), deg_to_mdeg(orientation[1]), deg_to_mdeg(orientation[2]),
    )
