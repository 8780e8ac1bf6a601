"""TCP service exposing a runtime's memory store over SVBP.

Each connection gets its own thread and is answered strictly in request
order. A connection must begin with CONNECT carrying the CPU rack/slot the
server was configured with; everything before that, and any rack/slot
mismatch, is refused. Malformed frames close the connection; they never
take the server down.
"""

from __future__ import annotations

import logging
import socket
import threading

from ..addrmem import (
    AccessDeniedError,
    ByteSpan,
    NoSuchBlockError,
    OutOfRangeError,
    StoreError,
)
from ..softplc.runtime import Lockstep, ModeError, Runtime
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

log = logging.getLogger("vbscan.wire")


def _status_for(exc: Exception) -> StatusCode:
    if isinstance(exc, NoSuchBlockError):
        return StatusCode.NO_SUCH_VB
    if isinstance(exc, OutOfRangeError):
        return StatusCode.OUT_OF_RANGE
    if isinstance(exc, AccessDeniedError):
        return StatusCode.ACCESS_DENIED
    if isinstance(exc, ModeError):
        return StatusCode.MODE_ERROR
    return StatusCode.BAD_REQUEST


class PlcServer:
    """Serves one runtime on one listening socket."""

    def __init__(
        self,
        runtime: Runtime,
        host: str = "127.0.0.1",
        port: int = codec.DEFAULT_PORT,
        rack: int = 0,
        slot: int = 2,
    ):
        self.runtime = runtime
        self.rack = rack
        self.slot = slot
        self._listener = socket.create_server((host, port))
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> "PlcServer":
        self.runtime.start()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="vbscan-server", daemon=True
        )
        self._accept_thread.start()
        log.info("serving on %s:%d", *self.address)
        return self

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
            self._accept_thread = None
        self.runtime.stop()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return
            with self._conns_lock:
                self._conns.add(conn)
            threading.Thread(
                target=self._serve_connection, args=(conn, peer), daemon=True
            ).start()

    def _serve_connection(self, conn: socket.socket, peer) -> None:
        connected = False
        try:
            while not self._stop.is_set():
                try:
                    frame = codec.read_frame(conn)
                except (MalformedFrameError, ConnectionError, OSError) as exc:
                    log.debug("%s: dropping connection: %s", peer, exc)
                    return
                if frame is None:
                    return
                try:
                    msg = codec.decode(frame)
                except MalformedFrameError as exc:
                    log.debug("%s: malformed frame: %s", peer, exc)
                    return
                response, connected, keep_open = self._handle(msg, connected)
                if response is None:
                    return
                try:
                    conn.sendall(codec.encode(response))
                except OSError:
                    return
                if not keep_open:
                    return
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _handle(
        self, msg: Message, connected: bool
    ) -> tuple[Message | None, bool, bool]:
        """Returns (response or None to drop, connected, keep connection open)."""
        lockstep = isinstance(self.runtime.clock, Lockstep)
        if isinstance(msg, Connect):
            if (msg.rack, msg.slot) != (self.rack, self.slot):
                return ConnAck(StatusCode.BAD_REQUEST, lockstep), False, False
            return ConnAck(StatusCode.OK, lockstep), True, True

        if not connected:
            refusal = self._refusal_for(msg)
            return refusal, False, refusal is not None

        store = self.runtime.store
        if isinstance(msg, Read):
            if msg.length > codec.MAX_READ_LENGTH:
                return ReadResp(StatusCode.BAD_REQUEST), True, True
            try:
                data = store.read_bytes(ByteSpan(msg.db, msg.start, msg.length))
            except StoreError as exc:
                return ReadResp(_status_for(exc)), True, True
            return ReadResp(StatusCode.OK, data), True, True
        if isinstance(msg, Write):
            try:
                self.runtime.submit_network_write(
                    ByteSpan(msg.db, msg.start, len(msg.data)), msg.data
                )
            except (StoreError, ValueError) as exc:
                return WriteResp(_status_for(exc)), True, True
            return WriteResp(StatusCode.OK), True, True
        if isinstance(msg, Step):
            try:
                self.runtime.step(msg.count)
            except (ModeError, ValueError) as exc:
                return StepAck(_status_for(exc)), True, True
            return StepAck(StatusCode.OK, self.runtime.cycle_count & 0xFFFFFFFF), True, True
        if isinstance(msg, ListVb):
            vbs = tuple(VbInfo(*info) for info in store.vb_infos())
            return ListResp(StatusCode.OK, vbs), True, True
        # Response-typed messages are not requests; drop the connection.
        return None, connected, False

    def _refusal_for(self, msg: Message) -> Message | None:
        if isinstance(msg, Read):
            return ReadResp(StatusCode.BAD_REQUEST)
        if isinstance(msg, Write):
            return WriteResp(StatusCode.BAD_REQUEST)
        if isinstance(msg, Step):
            return StepAck(StatusCode.BAD_REQUEST)
        if isinstance(msg, ListVb):
            return ListResp(StatusCode.BAD_REQUEST)
        return None


def serve(
    runtime: Runtime,
    host: str = "127.0.0.1",
    port: int = codec.DEFAULT_PORT,
    rack: int = 0,
    slot: int = 2,
) -> PlcServer:
    """Create and start a server; caller is responsible for stop()."""
    return PlcServer(runtime, host, port, rack, slot).start()
