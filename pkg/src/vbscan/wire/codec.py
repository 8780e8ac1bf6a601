"""SVBP message codec: a small framed read/write protocol for VB memory.

Frame layout, big-endian throughout::

    magic 0x53 0x56 | version 0x01 | msg_type u8 | payload_len u16 | payload

A frame never exceeds 4096 bytes, so reads larger than the response budget
must be chunked by the client. decode() accepts exactly one well-formed
frame and raises MalformedFrameError for anything else; it never raises any
other exception, whatever the input bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAGIC = b"\x53\x56"
VERSION = 0x01
HEADER = struct.Struct(">2sBBH")
MAX_FRAME = 4096
MAX_PAYLOAD = MAX_FRAME - HEADER.size
MAX_READ_LENGTH = MAX_PAYLOAD - 1  # READRESP carries status u8 + data
MAX_WRITE_LENGTH = MAX_PAYLOAD - 4  # WRITE carries db u16 + start u16 + data
DEFAULT_PORT = 10102


class StatusCode(IntEnum):
    OK = 0
    NO_SUCH_VB = 1
    OUT_OF_RANGE = 2
    ACCESS_DENIED = 3
    BAD_REQUEST = 4
    MODE_ERROR = 5


class MalformedFrameError(ValueError):
    """Bytes that are not exactly one valid frame."""


@dataclass(frozen=True)
class Connect:
    rack: int
    slot: int


@dataclass(frozen=True)
class ConnAck:
    status: StatusCode
    lockstep: bool = False


@dataclass(frozen=True)
class Read:
    db: int
    start: int
    length: int


@dataclass(frozen=True)
class ReadResp:
    status: StatusCode
    data: bytes = b""


@dataclass(frozen=True)
class Write:
    db: int
    start: int
    data: bytes


@dataclass(frozen=True)
class WriteResp:
    status: StatusCode


@dataclass(frozen=True)
class Step:
    count: int


@dataclass(frozen=True)
class StepAck:
    status: StatusCode
    cycle_count: int = 0


@dataclass(frozen=True)
class ListVb:
    pass


@dataclass(frozen=True)
class VbInfo:
    number: int
    size: int
    write_protected: bool


@dataclass(frozen=True)
class ListResp:
    status: StatusCode
    vbs: tuple[VbInfo, ...] = field(default=())


Message = (
    Connect | ConnAck | Read | ReadResp | Write | WriteResp | Step | StepAck | ListVb | ListResp
)

_TYPE_CODES: dict[type, int] = {
    Connect: 0x01,
    ConnAck: 0x02,
    Read: 0x03,
    ReadResp: 0x04,
    Write: 0x05,
    WriteResp: 0x06,
    Step: 0x07,
    StepAck: 0x08,
    ListVb: 0x09,
    ListResp: 0x0A,
}
_CODE_TYPES = {code: cls for cls, code in _TYPE_CODES.items()}


def _check_u8(value: int, what: str) -> int:
    if not 0 <= value <= 0xFF:
        raise ValueError(f"{what} {value} out of u8 range")
    return value


def _check_u16(value: int, what: str) -> int:
    if not 0 <= value <= 0xFFFF:
        raise ValueError(f"{what} {value} out of u16 range")
    return value


def _check_u32(value: int, what: str) -> int:
    if not 0 <= value <= 0xFFFFFFFF:
        raise ValueError(f"{what} {value} out of u32 range")
    return value


def _status_byte(status: StatusCode) -> int:
    return StatusCode(status).value


def _encode_payload(msg: Message) -> bytes:
    if isinstance(msg, Connect):
        return bytes([_check_u8(msg.rack, "rack"), _check_u8(msg.slot, "slot")])
    if isinstance(msg, ConnAck):
        return bytes([_status_byte(msg.status), 1 if msg.lockstep else 0])
    if isinstance(msg, Read):
        return struct.pack(
            ">HHH",
            _check_u16(msg.db, "db"),
            _check_u16(msg.start, "start"),
            _check_u16(msg.length, "length"),
        )
    if isinstance(msg, ReadResp):
        if msg.status is not StatusCode.OK and msg.data:
            raise ValueError("non-OK READRESP must carry no data")
        if len(msg.data) > MAX_READ_LENGTH:
            raise ValueError(f"READRESP data exceeds {MAX_READ_LENGTH} bytes")
        return bytes([_status_byte(msg.status)]) + bytes(msg.data)
    if isinstance(msg, Write):
        if len(msg.data) > MAX_WRITE_LENGTH:
            raise ValueError(f"WRITE data exceeds {MAX_WRITE_LENGTH} bytes")
        return (
            struct.pack(">HH", _check_u16(msg.db, "db"), _check_u16(msg.start, "start"))
            + bytes(msg.data)
        )
    if isinstance(msg, WriteResp):
        return bytes([_status_byte(msg.status)])
    if isinstance(msg, Step):
        return struct.pack(">H", _check_u16(msg.count, "count"))
    if isinstance(msg, StepAck):
        return bytes([_status_byte(msg.status)]) + struct.pack(
            ">I", _check_u32(msg.cycle_count, "cycle count")
        )
    if isinstance(msg, ListVb):
        return b""
    if isinstance(msg, ListResp):
        if msg.status is not StatusCode.OK and msg.vbs:
            raise ValueError("non-OK LISTRESP must carry no entries")
        out = bytes([_status_byte(msg.status)]) + struct.pack(">H", len(msg.vbs))
        for vb in msg.vbs:
            out += struct.pack(
                ">HHB",
                _check_u16(vb.number, "VB number"),
                _check_u16(vb.size, "VB size"),
                1 if vb.write_protected else 0,
            )
        if len(out) > MAX_PAYLOAD:
            raise ValueError("LISTRESP exceeds the frame limit")
        return out
    raise TypeError(f"not a wire message: {msg!r}")


def encode(msg: Message) -> bytes:
    """Encode one message into a complete frame."""
    payload = _encode_payload(msg)
    return HEADER.pack(MAGIC, VERSION, _TYPE_CODES[type(msg)], len(payload)) + payload


def _need(payload: bytes, size: int, what: str) -> None:
    if len(payload) != size:
        raise MalformedFrameError(f"{what} payload must be {size} bytes, got {len(payload)}")


def _status(payload: bytes) -> StatusCode:
    try:
        return StatusCode(payload[0])
    except ValueError:
        raise MalformedFrameError(f"unknown status code {payload[0]}") from None


def _decode_payload(code: int, payload: bytes) -> Message:
    cls = _CODE_TYPES.get(code)
    if cls is None:
        raise MalformedFrameError(f"unknown message type 0x{code:02X}")
    if cls is Connect:
        _need(payload, 2, "CONNECT")
        return Connect(payload[0], payload[1])
    if cls is ConnAck:
        _need(payload, 2, "CONNACK")
        if payload[1] not in (0, 1):
            raise MalformedFrameError("CONNACK mode flag must be 0 or 1")
        return ConnAck(_status(payload), bool(payload[1]))
    if cls is Read:
        _need(payload, 6, "READ")
        db, start, length = struct.unpack(">HHH", payload)
        return Read(db, start, length)
    if cls is ReadResp:
        if len(payload) < 1:
            raise MalformedFrameError("READRESP payload too short")
        status = _status(payload)
        data = payload[1:]
        if status is not StatusCode.OK and data:
            raise MalformedFrameError("non-OK READRESP must carry no data")
        return ReadResp(status, data)
    if cls is Write:
        if len(payload) < 4:
            raise MalformedFrameError("WRITE payload too short")
        db, start = struct.unpack(">HH", payload[:4])
        return Write(db, start, payload[4:])
    if cls is WriteResp:
        _need(payload, 1, "WRITERESP")
        return WriteResp(_status(payload))
    if cls is Step:
        _need(payload, 2, "STEP")
        return Step(struct.unpack(">H", payload)[0])
    if cls is StepAck:
        _need(payload, 5, "STEPACK")
        return StepAck(_status(payload), struct.unpack(">I", payload[1:])[0])
    if cls is ListVb:
        _need(payload, 0, "LISTVB")
        return ListVb()
    if len(payload) < 3:
        raise MalformedFrameError("LISTRESP payload too short")
    status = _status(payload)
    count = struct.unpack(">H", payload[1:3])[0]
    body = payload[3:]
    if len(body) != count * 5:
        raise MalformedFrameError("LISTRESP entry count does not match payload size")
    vbs = []
    for i in range(count):
        number, size, flags = struct.unpack(">HHB", body[i * 5 : i * 5 + 5])
        if flags not in (0, 1):
            raise MalformedFrameError("LISTRESP flags must be 0 or 1")
        vbs.append(VbInfo(number, size, bool(flags)))
    if status is not StatusCode.OK and vbs:
        raise MalformedFrameError("non-OK LISTRESP must carry no entries")
    return ListResp(status, tuple(vbs))


def decode(frame: bytes) -> Message:
    """Decode exactly one frame; raises MalformedFrameError otherwise."""
    if len(frame) < HEADER.size:
        raise MalformedFrameError(f"frame shorter than the {HEADER.size}-byte header")
    if len(frame) > MAX_FRAME:
        raise MalformedFrameError(f"frame exceeds {MAX_FRAME} bytes")
    magic, version, code, payload_len = HEADER.unpack(frame[: HEADER.size])
    if magic != MAGIC:
        raise MalformedFrameError(f"bad magic {magic.hex()}")
    if version != VERSION:
        raise MalformedFrameError(f"unsupported version {version}")
    payload = frame[HEADER.size :]
    if len(payload) != payload_len:
        raise MalformedFrameError(
            f"payload length field {payload_len} does not match {len(payload)} actual bytes"
        )
    return _decode_payload(code, payload)


def read_frame(sock) -> bytes | None:
    """Read one frame from a socket; None on clean EOF at a frame boundary.

    Raises MalformedFrameError when the header announces an oversized frame
    and ConnectionError when the peer vanishes mid-frame.
    """
    header = _recv_exact(sock, HEADER.size)
    if header is None:
        return None
    payload_len = struct.unpack(">H", header[4:6])[0]
    if HEADER.size + payload_len > MAX_FRAME:
        raise MalformedFrameError(f"announced frame exceeds {MAX_FRAME} bytes")
    if payload_len == 0:
        return header
    payload = _recv_exact(sock, payload_len)
    if payload is None:
        raise ConnectionError("connection closed mid-frame")
    return header + payload


def _recv_exact(sock, size: int) -> bytes | None:
    buf = b""
    while len(buf) < size:
        chunk = sock.recv(size - len(buf))
        if not chunk:
            return None if not buf else _raise_midframe()
        buf += chunk
    return buf


def _raise_midframe() -> bytes:
    raise ConnectionError("connection closed mid-frame")
