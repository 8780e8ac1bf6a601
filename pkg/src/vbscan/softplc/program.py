"""Program files: VB declarations, block instances, input bindings, wiring.

A program is a YAML document:

.. code-block:: yaml

    name: ctu_direct
    vbs:
      - {number: 100, size: 8}              # optional: write_protected, initial ("hex bytes")
    instances:
      - kind: CTU
        fvb: 100
        bindings:
          PV: {mode: direct, value: 10}     # omitted inputs default to {mode: default}
    wiring:
      - {from: DB101.DBX6.0, to: DB100.DBX0.1}

Binding modes: ``default`` (the value the VB was initialized with, never
rewritten), ``direct`` (a literal copied into the input slot every cycle),
``gvb`` (a source address copied in every cycle; bit address for bool
inputs, DBW/DBD span for int/dint), and ``pointer`` (a P# address pasted
into the slot every cycle and dereferenced, value read through). Pointer
inputs accept only pointer bindings and vice versa.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

import yaml

from ..addrmem import (
    POINTER_SIZE,
    AddressError,
    BitAddress,
    ByteSpan,
    MemoryStore,
    Origin,
    PointerValue,
    parse_address,
)
from .blocks import DINT_MAX, DINT_MIN, FB_SPECS, INT_MAX, INT_MIN, FbSpec, Slot


class ProgramError(Exception):
    """Program file violates the schema or references unresolvable addresses."""


@dataclass(frozen=True)
class Default:
    pass


@dataclass(frozen=True)
class Direct:
    value: int


@dataclass(frozen=True)
class Gvb:
    source: BitAddress | ByteSpan


@dataclass(frozen=True)
class Pointer:
    target: PointerValue


Binding = Default | Direct | Gvb | Pointer


@dataclass(frozen=True)
class VbDecl:
    number: int
    size: int
    write_protected: bool = False
    initial: bytes = b""


@dataclass(frozen=True)
class Wire:
    source: BitAddress
    dest: BitAddress


@dataclass
class FbInstance:
    kind: str
    fvb: int
    bindings: dict[str, Binding]

    @property
    def spec(self) -> FbSpec:
        return FB_SPECS[self.kind]

    @property
    def label(self) -> str:
        return f"{self.kind}@DB{self.fvb}"


@dataclass
class Program:
    name: str
    vbs: list[VbDecl] = field(default_factory=list)
    instances: list[FbInstance] = field(default_factory=list)
    wiring: list[Wire] = field(default_factory=list)

    def vb(self, number: int) -> VbDecl:
        for decl in self.vbs:
            if decl.number == number:
                return decl
        raise ProgramError(f"VB {number} is not declared")


def _parse_initial(text: str, where: str) -> bytes:
    try:
        return bytes.fromhex(text.replace(" ", ""))
    except ValueError:
        raise ProgramError(f"{where}: initial bytes must be a hex string") from None


def _parse_vbs(doc: dict) -> list[VbDecl]:
    decls: list[VbDecl] = []
    seen: set[int] = set()
    for i, entry in enumerate(doc.get("vbs") or []):
        where = f"vbs[{i}]"
        if not isinstance(entry, dict):
            raise ProgramError(f"{where}: expected a mapping")
        try:
            number = int(entry["number"])
            size = int(entry["size"])
        except (KeyError, TypeError, ValueError):
            raise ProgramError(f"{where}: needs integer 'number' and 'size'") from None
        if number < 0 or size < 0:
            raise ProgramError(f"{where}: number and size must be non-negative")
        if number in seen:
            raise ProgramError(f"{where}: duplicate VB number {number}")
        seen.add(number)
        initial = b""
        if entry.get("initial") is not None:
            initial = _parse_initial(str(entry["initial"]), where)
            if len(initial) > size:
                raise ProgramError(f"{where}: initial bytes exceed size {size}")
        decls.append(VbDecl(number, size, bool(entry.get("write_protected", False)), initial))
    return decls


def _parse_source_address(text: str, where: str) -> BitAddress | ByteSpan:
    try:
        addr = parse_address(str(text))
    except AddressError as exc:
        raise ProgramError(f"{where}: {exc}") from None
    if isinstance(addr, PointerValue):
        raise ProgramError(f"{where}: gvb sources cannot be P# pointers")
    return addr


def _parse_binding(slot: Slot, raw: object, where: str) -> Binding:
    if not isinstance(raw, dict) or "mode" not in raw:
        raise ProgramError(f"{where}: binding must be a mapping with a 'mode'")
    mode = raw["mode"]
    if mode == "default":
        if slot.kind == "ptr":
            raise ProgramError(f"{where}: pointer inputs need an explicit pointer binding")
        return Default()
    if mode == "direct":
        if slot.kind == "ptr":
            raise ProgramError(f"{where}: pointer inputs accept only pointer bindings")
        if "value" not in raw:
            raise ProgramError(f"{where}: direct binding needs a 'value'")
        value = raw["value"]
        if isinstance(value, bool):
            value = int(value)
        if not isinstance(value, int):
            raise ProgramError(f"{where}: direct value must be an integer or boolean")
        limits = {"bool": (0, 1), "int": (INT_MIN, INT_MAX), "dint": (DINT_MIN, DINT_MAX)}[slot.kind]
        if not limits[0] <= value <= limits[1]:
            raise ProgramError(f"{where}: value {value} out of range for {slot.kind}")
        return Direct(value)
    if mode == "gvb":
        if slot.kind == "ptr":
            raise ProgramError(f"{where}: pointer inputs accept only pointer bindings")
        if "source" not in raw:
            raise ProgramError(f"{where}: gvb binding needs a 'source' address")
        source = _parse_source_address(raw["source"], where)
        if slot.kind == "bool" and not isinstance(source, BitAddress):
            raise ProgramError(f"{where}: bool inputs need a DBX bit source")
        if slot.kind in ("int", "dint"):
            want = slot.byte_width
            if not isinstance(source, ByteSpan) or source.length != want:
                raise ProgramError(f"{where}: {slot.kind} inputs need a {want}-byte span source")
        return Gvb(source)
    if mode == "pointer":
        if slot.kind != "ptr":
            raise ProgramError(f"{where}: only pointer inputs accept pointer bindings")
        if "target" not in raw:
            raise ProgramError(f"{where}: pointer binding needs a 'target' P# address")
        try:
            target = parse_address(str(raw["target"]))
        except AddressError as exc:
            raise ProgramError(f"{where}: {exc}") from None
        if not isinstance(target, PointerValue):
            raise ProgramError(f"{where}: pointer target must use the P# form")
        return Pointer(target)
    raise ProgramError(f"{where}: unknown binding mode {mode!r}")


def _parse_instances(doc: dict) -> list[FbInstance]:
    instances: list[FbInstance] = []
    for i, entry in enumerate(doc.get("instances") or []):
        where = f"instances[{i}]"
        if not isinstance(entry, dict):
            raise ProgramError(f"{where}: expected a mapping")
        kind = entry.get("kind")
        if kind not in FB_SPECS:
            raise ProgramError(f"{where}: unknown block kind {kind!r}")
        spec = FB_SPECS[kind]
        try:
            fvb = int(entry["fvb"])
        except (KeyError, TypeError, ValueError):
            raise ProgramError(f"{where}: needs an integer 'fvb'") from None
        raw_bindings = entry.get("bindings") or {}
        if not isinstance(raw_bindings, dict):
            raise ProgramError(f"{where}: bindings must be a mapping")
        unknown = set(raw_bindings) - set(spec.input_names())
        if unknown:
            raise ProgramError(f"{where}: {kind} has no inputs named {sorted(unknown)}")
        bindings: dict[str, Binding] = {}
        for name in spec.input_names():
            slot = spec.slot(name)
            if name in raw_bindings:
                bindings[name] = _parse_binding(slot, raw_bindings[name], f"{where}.{name}")
            elif slot.kind == "ptr":
                raise ProgramError(f"{where}: pointer input {name} needs an explicit binding")
            else:
                bindings[name] = Default()
        instances.append(FbInstance(kind, fvb, bindings))
    return instances


def _parse_wiring(doc: dict) -> list[Wire]:
    wires: list[Wire] = []
    for i, entry in enumerate(doc.get("wiring") or []):
        where = f"wiring[{i}]"
        if not isinstance(entry, dict) or "from" not in entry or "to" not in entry:
            raise ProgramError(f"{where}: needs 'from' and 'to' bit addresses")
        ends = []
        for key in ("from", "to"):
            try:
                addr = parse_address(str(entry[key]))
            except AddressError as exc:
                raise ProgramError(f"{where}.{key}: {exc}") from None
            if not isinstance(addr, BitAddress):
                raise ProgramError(f"{where}.{key}: wiring endpoints must be DBX bit addresses")
            ends.append(addr)
        wires.append(Wire(ends[0], ends[1]))
    return wires


def _check_resolves(program: Program) -> None:
    def check_bit(addr: BitAddress, where: str) -> None:
        decl = _decl_or_error(program, addr.db, where)
        if addr.byte_offset >= decl.size:
            raise ProgramError(f"{where}: {addr} is outside VB {addr.db} (size {decl.size})")

    def check_span(span: ByteSpan, where: str) -> None:
        decl = _decl_or_error(program, span.db, where)
        if span.start + span.length > decl.size:
            raise ProgramError(f"{where}: {span} is outside VB {span.db} (size {decl.size})")

    for inst in program.instances:
        decl = _decl_or_error(program, inst.fvb, inst.label)
        if decl.size < inst.spec.fvb_size:
            raise ProgramError(
                f"{inst.label}: fVB needs {inst.spec.fvb_size} bytes, VB {inst.fvb} has {decl.size}"
            )
        for name, binding in inst.bindings.items():
            where = f"{inst.label}.{name}"
            if isinstance(binding, Gvb):
                if isinstance(binding.source, BitAddress):
                    check_bit(binding.source, where)
                else:
                    check_span(binding.source, where)
            elif isinstance(binding, Pointer):
                slot = inst.spec.slot(name)
                check_span(
                    ByteSpan(binding.target.db, binding.target.byte_offset, slot.ptr_len), where
                )
    for i, wire in enumerate(program.wiring):
        check_bit(wire.source, f"wiring[{i}].from")
        check_bit(wire.dest, f"wiring[{i}].to")


def _decl_or_error(program: Program, number: int, where: str) -> VbDecl:
    try:
        return program.vb(number)
    except ProgramError:
        raise ProgramError(f"{where}: references undeclared VB {number}") from None


def parse_program(text: str, name: str = "") -> Program:
    """Parse and validate a program document from YAML text."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ProgramError(f"invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ProgramError("program document must be a mapping")
    program = Program(
        name=str(doc.get("name") or name or "unnamed"),
        vbs=_parse_vbs(doc),
        instances=_parse_instances(doc),
        wiring=_parse_wiring(doc),
    )
    fvbs = [inst.fvb for inst in program.instances]
    if len(fvbs) != len(set(fvbs)):
        raise ProgramError("two instances share one fVB")
    _check_resolves(program)
    return program


def bundled_programs() -> list[str]:
    """Names of the programs shipped with the package."""
    root = resources.files(__package__) / "programs"
    return sorted(
        entry.name[: -len(".yaml")]
        for entry in root.iterdir()
        if entry.name.endswith(".yaml")
    )


def load_program(source: str | os.PathLike) -> Program:
    """Load a program from a file path or a bundled program name."""
    path = os.fspath(source)
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            return parse_program(fh.read(), name=os.path.splitext(os.path.basename(path))[0])
    if isinstance(source, str) and os.sep not in source:
        candidate = resources.files(__package__) / "programs" / f"{source}.yaml"
        if candidate.is_file():
            return parse_program(candidate.read_text(encoding="utf-8"), name=source)
    raise ProgramError(f"program file not found: {source}")


def build_store(program: Program) -> MemoryStore:
    """Allocate and initialize all VBs for a program.

    VB initial bytes double as the default values of default-bound inputs;
    nothing rewrites those slots after this point. Pointer slots are pasted
    here and re-pasted by the runtime on every cycle.
    """
    store = MemoryStore()
    for decl in program.vbs:
        store.add_block(
            decl.number,
            decl.size,
            write_protected=decl.write_protected,
            initial=decl.initial,
        )
    for inst in program.instances:
        for name, binding in inst.bindings.items():
            if isinstance(binding, Pointer):
                slot = inst.spec.slot(name)
                store.write_bytes(
                    ByteSpan(inst.fvb, slot.offset, POINTER_SIZE),
                    binding.target.encode(),
                    Origin.INTERNAL,
                )
    return store
