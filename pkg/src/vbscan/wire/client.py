"""Blocking SVBP client: one connection, one request in flight at a time."""

from __future__ import annotations

import socket

from ..addrmem import ByteSpan
from . import codec
from .codec import (
    ConnAck,
    Connect,
    ListResp,
    ListVb,
    MalformedFrameError,
    Message,
    Read,
    ReadResp,
    StatusCode,
    Step,
    StepAck,
    VbInfo,
    Write,
    WriteResp,
)


class WireError(Exception):
    """Base class for client-side failures."""


class TransportError(WireError):
    """Connection refused, reset, or closed mid-exchange."""


class RequestTimeout(WireError):
    """The peer did not answer within the configured timeout."""


class ProtocolError(WireError):
    """The peer answered with something that is not a valid response."""


class StatusError(WireError):
    """The peer answered with a non-OK status code."""

    def __init__(self, status: StatusCode, context: str):
        super().__init__(f"{context}: {status.name}")
        self.status = status


class PlcClient:
    """Connects to a server and mirrors its request semantics as methods."""

    def __init__(
        self,
        ip: str,
        port: int = codec.DEFAULT_PORT,
        rack: int = 0,
        slot: int = 2,
        timeout: float = 5.0,
    ):
        self.ip = ip
        self.port = port
        try:
            self._sock = socket.create_connection((ip, port), timeout=timeout)
        except socket.timeout as exc:
            raise RequestTimeout(f"connecting to {ip}:{port} timed out") from exc
        except OSError as exc:
            raise TransportError(f"cannot connect to {ip}:{port}: {exc}") from exc
        ack = self._request(Connect(rack, slot), ConnAck, "CONNECT")
        if ack.status is not StatusCode.OK:
            self.close()
            raise StatusError(ack.status, f"CPU at rack {rack} slot {slot} refused the session")
        self.lockstep = ack.lockstep

    def __enter__(self) -> "PlcClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def _request(self, msg: Message, expect: type, what: str):
        try:
            self._sock.sendall(codec.encode(msg))
            frame = codec.read_frame(self._sock)
        except socket.timeout as exc:
            raise RequestTimeout(f"{what}: no response within timeout") from exc
        except (ConnectionError, OSError) as exc:
            raise TransportError(f"{what}: {exc}") from exc
        if frame is None:
            raise TransportError(f"{what}: connection closed by peer")
        try:
            response = codec.decode(frame)
        except MalformedFrameError as exc:
            raise ProtocolError(f"{what}: malformed response: {exc}") from exc
        if not isinstance(response, expect):
            raise ProtocolError(f"{what}: unexpected {type(response).__name__} response")
        return response

    def read(self, span: ByteSpan) -> bytes:
        """Read one span with a single request; span must fit one frame."""
        if span.length > codec.MAX_READ_LENGTH:
            raise ValueError(
                f"read of {span.length} bytes exceeds the per-request limit "
                f"{codec.MAX_READ_LENGTH}; use read_chunked"
            )
        resp: ReadResp = self._request(Read(span.db, span.start, span.length), ReadResp, "READ")
        if resp.status is not StatusCode.OK:
            raise StatusError(resp.status, f"READ {span}")
        if len(resp.data) != span.length:
            raise ProtocolError(f"READ {span}: expected {span.length} bytes, got {len(resp.data)}")
        return resp.data

    def read_chunked(self, span: ByteSpan) -> bytes:
        """Read a span of any size by splitting it into frame-sized requests."""
        out = b""
        offset = 0
        while offset < span.length:
            length = min(codec.MAX_READ_LENGTH, span.length - offset)
            out += self.read(ByteSpan(span.db, span.start + offset, length))
            offset += length
        return out

    def write(self, span: ByteSpan, data: bytes) -> None:
        if len(data) != span.length:
            raise ValueError(f"data length {len(data)} != span length {span.length}")
        if len(data) > codec.MAX_WRITE_LENGTH:
            raise ValueError(f"write of {len(data)} bytes exceeds one frame; split it")
        resp: WriteResp = self._request(Write(span.db, span.start, bytes(data)), WriteResp, "WRITE")
        if resp.status is not StatusCode.OK:
            raise StatusError(resp.status, f"WRITE {span}")

    def step(self, count: int) -> int:
        """Advance the target by ``count`` cycles; returns its cycle counter."""
        resp: StepAck = self._request(Step(count), StepAck, "STEP")
        if resp.status is not StatusCode.OK:
            raise StatusError(resp.status, f"STEP {count}")
        return resp.cycle_count

    def list_vbs(self) -> list[VbInfo]:
        resp: ListResp = self._request(ListVb(), ListResp, "LISTVB")
        if resp.status is not StatusCode.OK:
            raise StatusError(resp.status, "LISTVB")
        return list(resp.vbs)
