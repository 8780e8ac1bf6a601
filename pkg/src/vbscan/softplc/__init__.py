"""Soft-PLC: function blocks, program files, and the scan-cycle runtime."""

from .blocks import FB_SPECS, FbSpec, Slot, symbol_rows
from .program import (
    Binding,
    Default,
    Direct,
    FbInstance,
    Gvb,
    Pointer,
    Program,
    ProgramError,
    VbDecl,
    Wire,
    build_store,
    bundled_programs,
    load_program,
    parse_program,
)
from .runtime import ClockMode, Lockstep, ModeError, Runtime, Wallclock

__all__ = [
    "FB_SPECS",
    "FbSpec",
    "Slot",
    "symbol_rows",
    "Binding",
    "Default",
    "Direct",
    "FbInstance",
    "Gvb",
    "Pointer",
    "Program",
    "ProgramError",
    "VbDecl",
    "Wire",
    "build_store",
    "bundled_programs",
    "load_program",
    "parse_program",
    "ClockMode",
    "Lockstep",
    "ModeError",
    "Runtime",
    "Wallclock",
]
