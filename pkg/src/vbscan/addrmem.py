"""Bit-granular addressing and the variable-block memory store.

Variable blocks (VBs) are numbered, fixed-size, byte-addressable memory
regions. Addresses use DB notation: ``DB5.DBX2.3`` names bit 3 of byte 2
inside VB 5, ``DB5.DBB2`` / ``DBW2`` / ``DBD2`` name 1/2/4-byte spans, and
``P#DB5.DBX2.3`` is the text form of a 6-byte encoded pointer. All
multi-byte integers in memory and in pointer encodings are big-endian.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass
from enum import Enum

POINTER_AREA_DB = 0x84
POINTER_SIZE = 6


class AddressError(ValueError):
    """Base class for address parsing/validation failures."""


class AddressSyntaxError(AddressError):
    """Malformed address text. ``column`` is the 0-based offset of the fault."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class AddressRangeError(AddressError):
    """Structurally valid address with a field outside its permitted range."""

    def __init__(self, message: str, column: int | None = None):
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)
        self.column = column


class PointerFormatError(AddressError):
    """6-byte pointer encoding that cannot be decoded."""


class StoreError(Exception):
    """Base class for memory-store access failures."""


class NoSuchBlockError(StoreError):
    pass


class OutOfRangeError(StoreError):
    pass


class AccessDeniedError(StoreError):
    pass


class DuplicateBlockError(StoreError):
    pass


class SnapshotMismatchError(StoreError):
    pass


class Origin(Enum):
    """Who is performing a write. Write protection only blocks NETWORK."""

    NETWORK = "network"
    INTERNAL = "internal"


@dataclass(frozen=True, order=True)
class BitAddress:
    """A single bit: (VB number, byte offset, bit 0-7). Ordering is lexicographic."""

    db: int
    byte_offset: int
    bit: int

    def __post_init__(self) -> None:
        if self.db < 0 or self.byte_offset < 0:
            raise AddressRangeError("VB number and byte offset must be non-negative")
        if not 0 <= self.bit <= 7:
            raise AddressRangeError(f"bit index {self.bit} out of range 0-7")

    def __str__(self) -> str:
        return f"DB{self.db}.DBX{self.byte_offset}.{self.bit}"


@dataclass(frozen=True)
class ByteSpan:
    """A run of ``length`` bytes starting at ``start`` inside VB ``db``."""

    db: int
    start: int
    length: int

    def __post_init__(self) -> None:
        if self.db < 0 or self.start < 0:
            raise AddressRangeError("VB number and start offset must be non-negative")
        if self.length < 0:
            raise AddressRangeError("span length must be >= 0")

    def __str__(self) -> str:
        tag = _SPAN_TAGS.get(self.length)
        if tag is None:
            return f"DB{self.db}+{self.start}[{self.length}]"
        return f"DB{self.db}.{tag}{self.start}"


_SPAN_TAGS = {1: "DBB", 2: "DBW", 4: "DBD"}


@dataclass(frozen=True)
class PointerValue:
    """A pointer into DB memory: VB number plus a 24-bit packed bit address.

    ``bit_address`` equals ``byte_offset * 8 + bit``. The wire/memory encoding
    is 6 bytes: area u8 (0x84 = DB), db u16, bit_address u24, big-endian.
    """

    db: int
    bit_address: int
    area: int = POINTER_AREA_DB

    def __post_init__(self) -> None:
        if self.area != POINTER_AREA_DB:
            raise AddressRangeError(f"unsupported pointer area 0x{self.area:02X}")
        if not 0 <= self.db <= 0xFFFF:
            raise AddressRangeError(f"pointer VB number {self.db} exceeds 16-bit range")
        if not 0 <= self.bit_address <= 0xFFFFFF:
            raise AddressRangeError(f"pointer bit address {self.bit_address} exceeds 24-bit range")

    @property
    def byte_offset(self) -> int:
        return self.bit_address // 8

    @property
    def bit(self) -> int:
        return self.bit_address % 8

    def encode(self) -> bytes:
        return bytes([self.area]) + self.db.to_bytes(2, "big") + self.bit_address.to_bytes(3, "big")

    @classmethod
    def decode(cls, raw: bytes) -> "PointerValue":
        if len(raw) != POINTER_SIZE:
            raise PointerFormatError(f"pointer encoding must be {POINTER_SIZE} bytes, got {len(raw)}")
        if raw[0] != POINTER_AREA_DB:
            raise PointerFormatError(f"unsupported pointer area 0x{raw[0]:02X}")
        return cls(db=int.from_bytes(raw[1:3], "big"), bit_address=int.from_bytes(raw[3:6], "big"))

    def __str__(self) -> str:
        return f"P#DB{self.db}.DBX{self.byte_offset}.{self.bit}"


Address = BitAddress | ByteSpan | PointerValue


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def take(self, literal: str) -> bool:
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str, what: str) -> None:
        if not self.take(literal):
            raise AddressSyntaxError(f"expected {what}", self.pos)

    def digits(self, what: str) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise AddressSyntaxError(f"expected {what}", start)
        return int(self.text[start:self.pos])

    def expect_end(self) -> None:
        if self.pos != len(self.text):
            raise AddressSyntaxError("unexpected trailing characters", self.pos)


def parse_address(text: str) -> Address:
    """Parse one address string into its typed form.

    Accepted forms: ``DB<n>.DBX<b>.<i>``, ``DB<n>.DBB<b>``, ``DB<n>.DBW<b>``,
    ``DB<n>.DBD<b>``, ``P#DB<n>.DBX<b>.<i>``. Decimal integers, no whitespace.
    Raises AddressSyntaxError (with a column) on malformed text and
    AddressRangeError for out-of-range fields such as a bit index above 7.
    """
    c = _Cursor(text)
    is_pointer = c.take("P#")
    c.expect("DB", "'DB' prefix")
    db = c.digits("VB number")
    c.expect(".", "'.' after VB number")
    if c.take("DBX"):
        byte_offset = c.digits("byte offset")
        c.expect(".", "'.' before bit index")
        bit_col = c.pos
        bit = c.digits("bit index")
        c.expect_end()
        if bit > 7:
            raise AddressRangeError(f"bit index {bit} out of range 0-7", bit_col)
        if is_pointer:
            return PointerValue(db=db, bit_address=byte_offset * 8 + bit)
        return BitAddress(db, byte_offset, bit)
    if is_pointer:
        raise AddressSyntaxError("pointer addresses require the DBX form", c.pos)
    for tag, length in (("DBB", 1), ("DBW", 2), ("DBD", 4)):
        if c.take(tag):
            start = c.digits("byte offset")
            c.expect_end()
            return ByteSpan(db, start, length)
    raise AddressSyntaxError("expected DBX, DBB, DBW or DBD", c.pos)


def format_address(addr: Address) -> str:
    """Render an address in its canonical text form; inverse of parse_address."""
    if isinstance(addr, ByteSpan) and addr.length not in _SPAN_TAGS:
        raise ValueError(f"no canonical text form for a {addr.length}-byte span")
    return str(addr)


def invert_byte(value: int) -> int:
    """Bitwise complement of one byte."""
    if not 0 <= value <= 0xFF:
        raise ValueError(f"byte value {value} out of range 0-255")
    return value ^ 0xFF


@dataclass
class VariableBlock:
    """One VB: fixed-size byte storage plus a network write-protection flag."""

    number: int
    data: bytearray
    write_protected: bool = False

    @property
    def size(self) -> int:
        return len(self.data)


class MemoryStore:
    """All VBs of one controller, shareable between runtime and server threads.

    Every read/write of one request happens under ``lock``, so a concurrent
    reader never observes a torn span. The runtime may hold ``lock`` across a
    whole scan cycle to make cycle boundaries the only observable states.
    """

    def __init__(self) -> None:
        self._blocks: dict[int, VariableBlock] = {}
        self.lock = threading.RLock()

    def add_block(
        self,
        number: int,
        size: int,
        *,
        write_protected: bool = False,
        initial: bytes | None = None,
    ) -> VariableBlock:
        with self.lock:
            if number in self._blocks:
                raise DuplicateBlockError(f"VB {number} already exists")
            data = bytearray(size)
            if initial is not None:
                if len(initial) > size:
                    raise OutOfRangeError(f"initial bytes exceed VB {number} size {size}")
                data[: len(initial)] = initial
            block = VariableBlock(number, data, write_protected)
            self._blocks[number] = block
            return block

    def block(self, number: int) -> VariableBlock:
        with self.lock:
            try:
                return self._blocks[number]
            except KeyError:
                raise NoSuchBlockError(f"no VB {number}") from None

    def _resolve(self, span: ByteSpan) -> VariableBlock:
        block = self.block(span.db)
        if span.start + span.length > block.size:
            raise OutOfRangeError(
                f"span {span.start}+{span.length} exceeds VB {span.db} size {block.size}"
            )
        return block

    def read_bytes(self, span: ByteSpan) -> bytes:
        with self.lock:
            block = self._resolve(span)
            return bytes(block.data[span.start : span.start + span.length])

    def write_bytes(self, span: ByteSpan, data: bytes, origin: Origin) -> None:
        if len(data) != span.length:
            raise ValueError(f"data length {len(data)} != span length {span.length}")
        with self.lock:
            block = self._resolve(span)
            if origin is Origin.NETWORK and block.write_protected:
                raise AccessDeniedError(f"VB {span.db} is write-protected")
            block.data[span.start : span.start + span.length] = data

    def read_bit(self, addr: BitAddress) -> bool:
        byte = self.read_bytes(ByteSpan(addr.db, addr.byte_offset, 1))[0]
        return bool(byte >> addr.bit & 1)

    def write_bit(self, addr: BitAddress, value: bool, origin: Origin) -> None:
        with self.lock:
            span = ByteSpan(addr.db, addr.byte_offset, 1)
            byte = self.read_bytes(span)[0]
            if value:
                byte |= 1 << addr.bit
            else:
                byte &= ~(1 << addr.bit) & 0xFF
            self.write_bytes(span, bytes([byte]), origin)

    def snapshot(self) -> dict[int, bytes]:
        with self.lock:
            return {number: bytes(block.data) for number, block in self._blocks.items()}

    def restore(self, snap: dict[int, bytes]) -> None:
        with self.lock:
            if set(snap) != set(self._blocks):
                raise SnapshotMismatchError("snapshot and store hold different VB numbers")
            for number, data in snap.items():
                block = self._blocks[number]
                if len(data) != block.size:
                    raise SnapshotMismatchError(f"snapshot size mismatch for VB {number}")
            for number, data in snap.items():
                self._blocks[number].data[:] = data

    def vb_infos(self) -> list[tuple[int, int, bool]]:
        """(number, size, write_protected) for every VB, ordered by number."""
        with self.lock:
            return [
                (block.number, block.size, block.write_protected)
                for block in sorted(self._blocks.values(), key=lambda b: b.number)
            ]


SYMBOL_TYPES = ("BOOL", "INT", "DINT", "TIME")
_TYPE_WIDTHS = {"BOOL": 1, "INT": 2, "DINT": 4, "TIME": 4}


class SymbolMapError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolRow:
    """One symbol-map entry: a named variable at a bit or byte-aligned offset."""

    db: int
    byte_offset: int
    bit: int | None
    name: str
    type: str

    def covered_bits(self) -> list[tuple[int, int]]:
        """(byte_offset, bit) pairs occupied by this variable."""
        if self.type == "BOOL":
            return [(self.byte_offset, self.bit or 0)]
        width = _TYPE_WIDTHS[self.type]
        return [(self.byte_offset + i, b) for i in range(width) for b in range(8)]


def parse_symbols(text: str) -> list[SymbolRow]:
    """Parse symbol-map CSV: lines ``db,byte_offset,bit_or_dash,name,type``.

    ``-`` in the bit column marks a byte-aligned multi-byte variable. Blank
    lines and ``#`` comment lines are skipped.
    """
    rows: list[SymbolRow] = []
    reader = csv.reader(io.StringIO(text))
    for lineno, fields in enumerate(reader, start=1):
        if not fields or (len(fields) == 1 and not fields[0].strip()):
            continue
        if fields[0].lstrip().startswith("#"):
            continue
        if len(fields) != 5:
            raise SymbolMapError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        raw_db, raw_off, raw_bit, name, sym_type = (f.strip() for f in fields)
        sym_type = sym_type.upper()
        if sym_type not in SYMBOL_TYPES:
            raise SymbolMapError(f"line {lineno}: unknown type {sym_type!r}")
        try:
            db = int(raw_db)
            byte_offset = int(raw_off)
        except ValueError:
            raise SymbolMapError(f"line {lineno}: db and byte_offset must be integers") from None
        if raw_bit == "-":
            bit = None
            if sym_type == "BOOL":
                raise SymbolMapError(f"line {lineno}: BOOL symbols need a bit index")
        else:
            try:
                bit = int(raw_bit)
            except ValueError:
                raise SymbolMapError(f"line {lineno}: bit must be 0-7 or '-'") from None
            if not 0 <= bit <= 7:
                raise SymbolMapError(f"line {lineno}: bit {bit} out of range 0-7")
            if sym_type != "BOOL":
                raise SymbolMapError(f"line {lineno}: {sym_type} symbols must use '-' for bit")
        if not name:
            raise SymbolMapError(f"line {lineno}: empty symbol name")
        rows.append(SymbolRow(db, byte_offset, bit, name, sym_type))
    return rows


def load_symbols(path: str) -> list[SymbolRow]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_symbols(fh.read())


def dump_symbols(rows: list[SymbolRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for row in rows:
        bit = "-" if row.bit is None else str(row.bit)
        writer.writerow([row.db, row.byte_offset, bit, row.name, row.type])
    return out.getvalue()
