"""Bit-toggle accounting for compressed transfers, the energy-control
send-compressed decision, and metadata consolidation layouts."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from campsim.compression import CompressedBlock, Encoding


class ToggleError(ValueError):
    pass


@dataclass(frozen=True)
class FlitStream:
    """A packet split into fixed-width flits (last one zero-padded)."""

    flit_bits: int
    flits: Tuple[int, ...]

    def __post_init__(self):
        limit = 1 << self.flit_bits
        for flit in self.flits:
            if not 0 <= flit < limit:
                raise ToggleError(f"flit wider than {self.flit_bits} bits")

    @classmethod
    def from_bytes(cls, payload: bytes, flit_bits: int = 256) -> "FlitStream":
        if flit_bits % 8:
            raise ToggleError("flit width must be whole bytes")
        step = flit_bits // 8
        flits = tuple(
            int.from_bytes(payload[i : i + step], "little")
            for i in range(0, max(len(payload), 1), step)
        )
        return cls(flit_bits, flits)


def toggle_count_onchip(stream: FlitStream, prev_flit: int = 0) -> int:
    """Wire transitions: summed hamming distance between successive flits,
    including the transition from prev_flit into the first flit."""
    if not 0 <= prev_flit < (1 << stream.flit_bits):
        raise ToggleError("previous flit width mismatch")
    total = 0
    prev = prev_flit
    for flit in stream.flits:
        total += (prev ^ flit).bit_count()
        prev = flit
    return total


def toggle_count_dram(payload: bytes) -> int:
    """Bus convention: driven zero bits per transfer."""
    return len(payload) * 8 - int.from_bytes(payload, "little").bit_count()


def transfer_toggles(payload: bytes, flit_bits: int = 256, prev_flit: int = 0,
                     channel: str = "onchip") -> int:
    """Toggles for transmitting payload on the actual flits it occupies."""
    if channel == "dram":
        return toggle_count_dram(payload)
    return toggle_count_onchip(FlitStream.from_bytes(payload, flit_bits), prev_flit)


# ------------------------------------------------------------ energy control

class EcDecision(enum.Enum):
    SEND_COMPRESSED = "compressed"
    SEND_UNCOMPRESSED = "uncompressed"


@dataclass(frozen=True)
class EcInputs:
    t0: int          # toggle count, original data
    t1: int          # toggle count, compressed form
    cr: float        # compression ratio (uncompressed/compressed size)
    bu: float = 0.0  # current bandwidth utilization

    def __post_init__(self):
        if self.t0 < 0 or self.t1 < 0:
            raise ToggleError("toggle counts must be non-negative")
        if self.cr < 1.0:
            raise ToggleError("compression ratio below 1 is not a candidate")
        if not 0.0 <= self.bu <= 1.0:
            raise ToggleError("bandwidth utilization must be within [0, 1]")


def ec_decide(inputs: EcInputs, metric: str = "ed", bu_threshold: float = 0.5,
              weight: float = 1.0) -> EcDecision:
    """Send compressed iff A x B > 1 (or A x B^2 > 1 for the quadratic
    metric), where A is the compression ratio boosted by 1/(1-BU) under high
    utilization and B is the toggle ratio T0/T1.

    weight scales the toggle-ratio exponent; 1 gives the plain metrics.
    """
    if metric not in ("ed", "ed2"):
        raise ToggleError(f"unknown metric {metric!r}")
    if inputs.t1 == 0:
        return EcDecision.SEND_COMPRESSED
    a = inputs.cr
    if inputs.bu > bu_threshold:
        a = a * (1.0 / (1.0 - inputs.bu)) if inputs.bu < 1.0 else float("inf")
    b = inputs.t0 / inputs.t1
    exponent = weight * (1 if metric == "ed" else 2)
    if a * b ** exponent > 1.0:
        return EcDecision.SEND_COMPRESSED
    return EcDecision.SEND_UNCOMPRESSED


# ---------------------------------------------------- metadata consolidation

def _mask_bytes(block: CompressedBlock) -> bytes:
    n = block.line_size // block.encoding.base_width
    return block.zero_base_mask.to_bytes(-(-n // 8), "little")


def mc_transform(block: CompressedBlock, consolidated: bool = True) -> bytes:
    """Serialize a block for transfer.

    Consolidated layout groups all metadata (encoding code, zero-base mask)
    at the head with every data field byte-aligned after it. The scattered
    layout interleaves each element's base-selector bit with its delta at
    bit granularity, losing byte alignment.
    """
    code = bytes([block.encoding.code])
    if block.encoding is Encoding.ZEROS:
        return code
    if block.encoding is Encoding.NO_COMPR:
        return code + block.raw
    if block.encoding is Encoding.REP_VALUES:
        return code + block.base.to_bytes(8, "little")

    k = block.encoding.base_width
    d = block.encoding.delta_width
    n = block.line_size // k
    base = block.base.to_bytes(k, "little")
    dmask = (1 << (8 * d)) - 1
    if consolidated:
        deltas = b"".join((delta & dmask).to_bytes(d, "little")
                          for delta in block.deltas)
        return code + _mask_bytes(block) + base + deltas
    acc = 0
    bits = 0
    for i, delta in enumerate(block.deltas):
        unit = ((block.zero_base_mask >> i) & 1) | ((delta & dmask) << 1)
        acc |= unit << bits
        bits += 1 + 8 * d
    return code + base + acc.to_bytes(-(-bits // 8), "little")


def stream_toggles(blocks: Sequence[CompressedBlock], flit_bits: int = 32,
                   consolidated: bool = True) -> int:
    """Toggles for a stream of transformed blocks sent as one packet each.

    Each packet occupies whole flits (the positive effect of compression is
    already in the flit count); the wire state carries across packets.
    """
    total = 0
    prev = 0
    for block in blocks:
        stream = FlitStream.from_bytes(mc_transform(block, consolidated), flit_bits)
        total += toggle_count_onchip(stream, prev)
        prev = stream.flits[-1]
    return total
