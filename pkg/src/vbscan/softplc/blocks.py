"""Function-block semantics and their fixed instance-memory layouts.

Each block kind owns a small, byte-aligned layout inside its instance VB
(fVB). Inputs are only ever written by the binding machinery, outputs are
recomputed and rewritten on every cycle, statics are read-modified-written
in place, and all unused padding bits are cleared each cycle. Edge-detect
and latch state lives in a per-instance shadow dict outside the fVB, so it
is not network-addressable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..addrmem import ByteSpan, MemoryStore, Origin, SymbolRow

INT_MIN, INT_MAX = -(1 << 15), (1 << 15) - 1
DINT_MIN, DINT_MAX = -(1 << 31), (1 << 31) - 1

INPUT, OUTPUT, STATIC = "input", "output", "static"


@dataclass(frozen=True)
class Slot:
    """One named variable inside an fVB layout."""

    name: str
    kind: str  # bool | int | dint | ptr
    role: str  # input | output | static
    offset: int
    bit: int = 0  # bool slots only
    ptr_len: int = 0  # ptr slots: bytes read through the pointer each cycle
    csv_type: str = ""  # symbol-map type; empty = not listed in symbol maps

    @property
    def byte_width(self) -> int:
        return {"bool": 1, "int": 2, "dint": 4, "ptr": 6}[self.kind]


@dataclass(frozen=True)
class FbSpec:
    kind: str
    fvb_size: int
    slots: tuple[Slot, ...]
    step: Callable[["FbIo"], None]

    def slot(self, name: str) -> Slot:
        for slot in self.slots:
            if slot.name == name:
                return slot
        raise KeyError(f"{self.kind} has no variable {name!r}")

    def input_names(self) -> list[str]:
        return [s.name for s in self.slots if s.role == INPUT]

    def owned_mask(self) -> bytes:
        """Per-byte bitmask of fVB bits that belong to some slot.

        Bits outside this mask are padding and get cleared every cycle.
        """
        mask = bytearray(self.fvb_size)
        for slot in self.slots:
            if slot.kind == "bool":
                mask[slot.offset] |= 1 << slot.bit
            else:
                for i in range(slot.byte_width):
                    mask[slot.offset + i] = 0xFF
        return bytes(mask)


class FbIo:
    """Typed access to one instance's fVB during a single cycle."""

    def __init__(
        self,
        store: MemoryStore,
        fvb: int,
        spec: FbSpec,
        shadow: dict,
        pointer_values: dict[str, bytes],
    ):
        self._store = store
        self._fvb = fvb
        self._spec = spec
        self.shadow = shadow
        self._pointer_values = pointer_values

    def _span(self, name: str, kind: str) -> ByteSpan:
        slot = self._spec.slot(name)
        if slot.kind != kind:
            raise TypeError(f"{self._spec.kind}.{name} is {slot.kind}, not {kind}")
        return ByteSpan(self._fvb, slot.offset, slot.byte_width)

    def get_bool(self, name: str) -> bool:
        slot = self._spec.slot(name)
        byte = self._store.read_bytes(ByteSpan(self._fvb, slot.offset, 1))[0]
        return bool(byte >> slot.bit & 1)

    def set_bool(self, name: str, value: bool) -> None:
        slot = self._spec.slot(name)
        span = ByteSpan(self._fvb, slot.offset, 1)
        byte = self._store.read_bytes(span)[0]
        byte = byte | 1 << slot.bit if value else byte & ~(1 << slot.bit) & 0xFF
        self._store.write_bytes(span, bytes([byte]), Origin.INTERNAL)

    def get_int(self, name: str) -> int:
        return int.from_bytes(self._store.read_bytes(self._span(name, "int")), "big", signed=True)

    def set_int(self, name: str, value: int) -> None:
        value = max(INT_MIN, min(INT_MAX, value))
        self._store.write_bytes(
            self._span(name, "int"), value.to_bytes(2, "big", signed=True), Origin.INTERNAL
        )

    def get_dint(self, name: str) -> int:
        return int.from_bytes(self._store.read_bytes(self._span(name, "dint")), "big", signed=True)

    def set_dint(self, name: str, value: int) -> None:
        value = max(DINT_MIN, min(DINT_MAX, value))
        self._store.write_bytes(
            self._span(name, "dint"), value.to_bytes(4, "big", signed=True), Origin.INTERNAL
        )

    def pointer_bytes(self, name: str) -> bytes:
        """Value read through a pointer input at the start of this cycle."""
        return self._pointer_values[name]


def ctu_step(io: FbIo) -> None:
    """Count up on rising CU; R forces CV to 0; Q = (CV >= PV)."""
    cu = io.get_bool("CU")
    rising = cu and not io.shadow.get("prev_cu", False)
    io.shadow["prev_cu"] = cu
    cv = io.get_int("CV")
    if rising:
        cv = min(cv + 1, INT_MAX)
    if io.get_bool("R"):
        cv = 0
    io.set_int("CV", cv)
    io.set_bool("Q", cv >= io.get_int("PV"))


def ctd_step(io: FbIo) -> None:
    """Count down on rising CD; LD reloads CV from PV; Q = (CV <= 0)."""
    cd = io.get_bool("CD")
    rising = cd and not io.shadow.get("prev_cd", False)
    io.shadow["prev_cd"] = cd
    cv = io.get_int("CV")
    if rising:
        cv = max(cv - 1, INT_MIN)
    if io.get_bool("LD"):
        cv = io.get_int("PV")
    io.set_int("CV", cv)
    io.set_bool("Q", cv <= 0)


def tp_step(io: FbIo) -> None:
    """One-shot pulse: rising IN starts it, Q stays high for PT cycles.

    ET counts elapsed cycles while the pulse runs and reads 0 when idle.
    A rising edge during an active pulse does not retrigger it.
    """
    pulse_in = io.get_bool("IN")
    rising = pulse_in and not io.shadow.get("prev_in", False)
    io.shadow["prev_in"] = pulse_in
    active = io.shadow.get("active", False)
    elapsed = io.shadow.get("elapsed", 0)
    pt = io.get_dint("PT")
    if rising and not active:
        active, elapsed = True, 0
    if active:
        elapsed += 1
        if elapsed >= pt:
            active = False
    else:
        elapsed = 0
    io.shadow["active"] = active
    io.shadow["elapsed"] = elapsed
    io.set_dint("ET", elapsed)
    io.set_bool("Q", 0 < elapsed <= pt)


def alert_step(io: FbIo) -> None:
    """Message-send stub: rising TRIG with BUSY clear sends one message.

    SENT counts completed sends. BUSY is held for exactly one cycle per
    send and is recomputed every cycle, so an externally forced BUSY=1
    blocks the trigger for that cycle only. CHECK mirrors a checksum of
    the bytes read through the USER pointer, making pointer redirection
    observable in the fVB without copying the pointed-to value into it.
    """
    trig = io.get_bool("TRIG")
    rising = trig and not io.shadow.get("prev_trig", False)
    io.shadow["prev_trig"] = trig
    busy = io.get_bool("BUSY")
    if io.shadow.get("pending", False):
        io.shadow["pending"] = False
        io.set_bool("BUSY", False)
    elif rising and not busy:
        io.shadow["pending"] = True
        io.set_int("SENT", min(io.get_int("SENT") + 1, INT_MAX))
        io.set_bool("BUSY", True)
    else:
        io.set_bool("BUSY", False)
    io.set_int("CHECK", sum(io.pointer_bytes("USER")) & 0x7FFF)


def tconn_step(io: FbIo) -> None:
    """Connection stub: rising REQ with BUSY clear connects after one cycle."""
    req = io.get_bool("REQ")
    rising = req and not io.shadow.get("prev_req", False)
    io.shadow["prev_req"] = req
    busy = io.get_bool("BUSY")
    if io.shadow.get("pending", False):
        io.shadow["pending"] = False
        io.shadow["connected"] = True
        io.set_bool("BUSY", False)
    elif rising and not busy:
        io.shadow["pending"] = True
        io.set_bool("BUSY", True)
    else:
        io.set_bool("BUSY", False)
    io.set_bool("CONNECTED", io.shadow.get("connected", False))


FB_SPECS: dict[str, FbSpec] = {
    "CTU": FbSpec(
        "CTU",
        8,
        (
            Slot("CU", "bool", INPUT, 0, bit=0, csv_type="BOOL"),
            Slot("R", "bool", INPUT, 0, bit=1, csv_type="BOOL"),
            Slot("PV", "int", INPUT, 2, csv_type="INT"),
            Slot("Q", "bool", OUTPUT, 4, bit=0, csv_type="BOOL"),
            Slot("CV", "int", STATIC, 6, csv_type="INT"),
        ),
        ctu_step,
    ),
    "CTD": FbSpec(
        "CTD",
        8,
        (
            Slot("CD", "bool", INPUT, 0, bit=0, csv_type="BOOL"),
            Slot("LD", "bool", INPUT, 0, bit=1, csv_type="BOOL"),
            Slot("PV", "int", INPUT, 2, csv_type="INT"),
            Slot("Q", "bool", OUTPUT, 4, bit=0, csv_type="BOOL"),
            Slot("CV", "int", STATIC, 6, csv_type="INT"),
        ),
        ctd_step,
    ),
    "TP": FbSpec(
        "TP",
        12,
        (
            Slot("IN", "bool", INPUT, 0, bit=0, csv_type="BOOL"),
            Slot("PT", "dint", INPUT, 2, csv_type="TIME"),
            Slot("Q", "bool", OUTPUT, 6, bit=0, csv_type="BOOL"),
            Slot("ET", "dint", OUTPUT, 8, csv_type="TIME"),
        ),
        tp_step,
    ),
    "ALERT": FbSpec(
        "ALERT",
        12,
        (
            Slot("TRIG", "bool", INPUT, 0, bit=0, csv_type="BOOL"),
            Slot("BUSY", "bool", OUTPUT, 0, bit=1, csv_type="BOOL"),
            Slot("SENT", "int", STATIC, 2, csv_type="INT"),
            Slot("USER", "ptr", INPUT, 4, ptr_len=4),
            Slot("CHECK", "int", OUTPUT, 10, csv_type="INT"),
        ),
        alert_step,
    ),
    "TCONN": FbSpec(
        "TCONN",
        4,
        (
            Slot("REQ", "bool", INPUT, 0, bit=0, csv_type="BOOL"),
            Slot("BUSY", "bool", OUTPUT, 0, bit=1, csv_type="BOOL"),
            Slot("CONNECTED", "bool", OUTPUT, 0, bit=2, csv_type="BOOL"),
            Slot("ID", "int", INPUT, 2, csv_type="INT"),
        ),
        tconn_step,
    ),
}


def symbol_rows(kind: str, db: int) -> list[SymbolRow]:
    """Symbol-map rows for one block kind's fVB layout at VB ``db``.

    Pointer slots carry no symbol type and are omitted; the pointer probe
    inspects them separately.
    """
    spec = FB_SPECS[kind]
    rows = []
    for slot in spec.slots:
        if not slot.csv_type:
            continue
        bit = slot.bit if slot.kind == "bool" else None
        rows.append(SymbolRow(db, slot.offset, bit, slot.name, slot.csv_type))
    return rows
