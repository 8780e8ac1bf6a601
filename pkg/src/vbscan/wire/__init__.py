"""SVBP wire protocol: codec, TCP server, and blocking client."""

from .client import (
    PlcClient,
    ProtocolError,
    RequestTimeout,
    StatusError,
    TransportError,
    WireError,
)
from .codec import (
    DEFAULT_PORT,
    MAX_FRAME,
    MAX_READ_LENGTH,
    MAX_WRITE_LENGTH,
    MalformedFrameError,
    Message,
    StatusCode,
    VbInfo,
    decode,
    encode,
)
from .server import PlcServer, serve

__all__ = [
    "PlcClient",
    "ProtocolError",
    "RequestTimeout",
    "StatusError",
    "TransportError",
    "WireError",
    "DEFAULT_PORT",
    "MAX_FRAME",
    "MAX_READ_LENGTH",
    "MAX_WRITE_LENGTH",
    "MalformedFrameError",
    "Message",
    "StatusCode",
    "VbInfo",
    "decode",
    "encode",
    "PlcServer",
    "serve",
]
