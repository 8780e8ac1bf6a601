"""Deterministic scan-cycle execution over a program and its memory store.

One cycle processes the instances in program order. For each instance:
direct/gvb-bound inputs are copied into their fVB slots, pointer inputs are
dereferenced into transient values from whatever the slot holds right now
and the canonical pointer is then pasted back over the slot, the block
logic runs (or is skipped and flagged if a dereference faulted), padding
bits are cleared, and all wiring copies are applied. Copies-then-execute
ordering means a network write into a refreshed input slot never survives
into the block logic of the following cycle.

In LOCKSTEP mode cycles run only on explicit step() calls and network
writes apply immediately between them. In WALLCLOCK mode a background
thread runs cycles on a fixed period and network writes are queued, landing
only at cycle boundaries; the submitting thread blocks until its write has
been applied so write-then-read stays coherent.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

from ..addrmem import (
    POINTER_SIZE,
    ByteSpan,
    MemoryStore,
    Origin,
    PointerFormatError,
    PointerValue,
    StoreError,
)
from .blocks import FbIo
from .program import Direct, FbInstance, Gvb, Pointer, Program, build_store

log = logging.getLogger("vbscan.softplc")


@dataclass(frozen=True)
class Lockstep:
    pass


@dataclass(frozen=True)
class Wallclock:
    cycle_ms: int


ClockMode = Lockstep | Wallclock


class ModeError(Exception):
    """Operation not valid in the current clock mode."""


@dataclass
class _PendingWrite:
    span: ByteSpan
    data: bytes
    done: threading.Event = field(default_factory=threading.Event)
    error: Exception | None = None


class Runtime:
    """Executes a loaded program against a memory store."""

    def __init__(
        self,
        program: Program,
        store: MemoryStore | None = None,
        clock: ClockMode = Lockstep(),
    ):
        self.program = program
        self.store = store if store is not None else build_store(program)
        self.clock = clock
        self.cycle_count = 0
        self.faulted: dict[int, str] = {}
        self._shadows: list[dict] = [{} for _ in program.instances]
        self._owned_masks = {
            inst.fvb: inst.spec.owned_mask() for inst in program.instances
        }
        self._writes: queue.Queue[_PendingWrite] = queue.Queue()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- cycle execution ---------------------------------------------------

    def run_cycle(self) -> None:
        """Execute exactly one scan cycle."""
        with self.store.lock:
            self.faulted = {}
            for index, inst in enumerate(self.program.instances):
                self._run_instance(index, inst)
                self._apply_wiring()
            self.cycle_count += 1

    def _run_instance(self, index: int, inst: FbInstance) -> None:
        spec = inst.spec
        for name, binding in inst.bindings.items():
            slot = spec.slot(name)
            if isinstance(binding, Direct):
                self._write_slot(inst.fvb, slot, binding.value)
            elif isinstance(binding, Gvb):
                self._copy_gvb(inst.fvb, slot, binding)

        pointer_values: dict[str, bytes] = {}
        fault: str | None = None
        for name, binding in inst.bindings.items():
            if not isinstance(binding, Pointer):
                continue
            slot = spec.slot(name)
            slot_span = ByteSpan(inst.fvb, slot.offset, POINTER_SIZE)
            raw = self.store.read_bytes(slot_span)
            try:
                ptr = PointerValue.decode(raw)
                pointer_values[name] = self.store.read_bytes(
                    ByteSpan(ptr.db, ptr.byte_offset, slot.ptr_len)
                )
            except (PointerFormatError, StoreError) as exc:
                fault = f"{name}: {exc}"
            # The configured pointer is pasted back every cycle, even after a
            # bad dereference, mirroring how inputs are refreshed.
            self.store.write_bytes(slot_span, binding.target.encode(), Origin.INTERNAL)

        if fault is not None:
            self.faulted[index] = fault
            log.debug("cycle %d: %s faulted: %s", self.cycle_count, inst.label, fault)
            return

        io = FbIo(self.store, inst.fvb, spec, self._shadows[index], pointer_values)
        spec.step(io)
        self._clear_padding(inst)

    def _write_slot(self, fvb: int, slot, value: int) -> None:
        if slot.kind == "bool":
            span = ByteSpan(fvb, slot.offset, 1)
            byte = self.store.read_bytes(span)[0]
            byte = byte | 1 << slot.bit if value else byte & ~(1 << slot.bit) & 0xFF
            self.store.write_bytes(span, bytes([byte]), Origin.INTERNAL)
        else:
            width = slot.byte_width
            self.store.write_bytes(
                ByteSpan(fvb, slot.offset, width),
                value.to_bytes(width, "big", signed=True),
                Origin.INTERNAL,
            )

    def _copy_gvb(self, fvb: int, slot, binding: Gvb) -> None:
        if slot.kind == "bool":
            value = self.store.read_bit(binding.source)
            self._write_slot(fvb, slot, int(value))
        else:
            data = self.store.read_bytes(binding.source)
            self.store.write_bytes(
                ByteSpan(fvb, slot.offset, slot.byte_width), data, Origin.INTERNAL
            )

    def _clear_padding(self, inst: FbInstance) -> None:
        mask = self._owned_masks[inst.fvb]
        for offset in range(inst.spec.fvb_size):
            if mask[offset] == 0xFF:
                continue
            span = ByteSpan(inst.fvb, offset, 1)
            byte = self.store.read_bytes(span)[0]
            cleared = byte & mask[offset]
            if cleared != byte:
                self.store.write_bytes(span, bytes([cleared]), Origin.INTERNAL)

    def _apply_wiring(self) -> None:
        for wire in self.program.wiring:
            value = self.store.read_bit(wire.source)
            self.store.write_bit(wire.dest, value, Origin.INTERNAL)

    # -- lockstep ------------------------------------------------------------

    def step(self, count: int) -> None:
        """Run ``count`` cycles; only valid in LOCKSTEP mode."""
        if not isinstance(self.clock, Lockstep):
            raise ModeError("step requests are only valid in LOCKSTEP mode")
        if count < 0:
            raise ValueError("cycle count must be >= 0")
        for _ in range(count):
            self.run_cycle()

    # -- wallclock -----------------------------------------------------------

    def start(self) -> None:
        """Start the free-running cycle thread (WALLCLOCK mode only)."""
        if isinstance(self.clock, Lockstep):
            return
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, name="vbscan-runtime", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self._fail_pending("runtime stopped")

    def _loop(self) -> None:
        period = self.clock.cycle_ms / 1000.0
        next_log = time.monotonic() + 5.0
        while not self._stop.is_set():
            started = time.monotonic()
            self._drain_writes()
            self.run_cycle()
            if started >= next_log:
                log.info("cycles=%d", self.cycle_count)
                next_log = started + 5.0
            remaining = period - (time.monotonic() - started)
            if remaining > 0:
                self._stop.wait(remaining)
        self._drain_writes()

    def _drain_writes(self) -> None:
        while True:
            try:
                pending = self._writes.get_nowait()
            except queue.Empty:
                return
            try:
                self.store.write_bytes(pending.span, pending.data, Origin.NETWORK)
            except (StoreError, ValueError) as exc:
                pending.error = exc
            pending.done.set()

    def _fail_pending(self, reason: str) -> None:
        while True:
            try:
                pending = self._writes.get_nowait()
            except queue.Empty:
                return
            pending.error = StoreError(reason)
            pending.done.set()

    def submit_network_write(self, span: ByteSpan, data: bytes) -> None:
        """Apply a network-origin write under the current clock discipline.

        LOCKSTEP applies immediately (cycles only run on request, so every
        moment is a cycle boundary). WALLCLOCK queues the write for the next
        boundary and blocks until the runtime has applied it.
        """
        if isinstance(self.clock, Lockstep):
            self.store.write_bytes(span, data, Origin.NETWORK)
            return
        pending = _PendingWrite(span, bytes(data))
        self._writes.put(pending)
        timeout = max(1.0, self.clock.cycle_ms / 1000.0 * 5)
        if not pending.done.wait(timeout):
            raise StoreError("runtime did not apply the write in time")
        if pending.error is not None:
            raise pending.error
