"""vbscan: bit-inversion vulnerability scanning for PLC variable-block memory.

Ships a scanner speaking a small framed read/write protocol (SVBP), a
deterministic soft-PLC target reproducing common input-binding styles, an
in-process brute-force oracle, and report rendering/diffing.
"""

__version__ = "0.1.0"
