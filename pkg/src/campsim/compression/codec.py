"""Line codec: delta compression with an implicit zero base, plus the
size-bucket function used by value-based eviction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from campsim.compression import _backend
from campsim.compression.encodings import (
    ENCODING_BY_CODE,
    LINE_SIZES,
    UNIT_CODE_BY_KD,
    Encoding,
    compressed_size,
)


class BlockFormatError(ValueError):
    """A compressed block violates its structural invariants."""


@dataclass(frozen=True, slots=True)
class CacheLineData:
    """Raw uncompressed line payload; the unit of compression."""

    data: bytes

    def __post_init__(self):
        if len(self.data) not in LINE_SIZES:
            raise ValueError(f"line must be one of {LINE_SIZES} bytes, got {len(self.data)}")

    @property
    def line_size(self) -> int:
        return len(self.data)

    def __bytes__(self) -> bytes:
        return self.data


@dataclass(frozen=True, slots=True)
class CompressedBlock:
    """Encoded line: encoding id plus base/mask/delta payload.

    base is the unsigned base value (the repeated value for REP_VALUES),
    zero_base_mask has bit i set when element i is encoded against the
    implicit zero base, and deltas holds the signed per-element differences.
    raw carries the original bytes for NO_COMPR blocks only.
    """

    encoding: Encoding
    line_size: int
    base: int = 0
    zero_base_mask: int = 0
    deltas: tuple = ()
    raw: Optional[bytes] = None
    size_bytes: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "size_bytes", compressed_size(self.encoding, self.line_size))
        d = self.encoding.delta_width
        if d:
            n = self.line_size // self.encoding.base_width
            if len(self.deltas) != n:
                raise BlockFormatError(f"expected {n} deltas, got {len(self.deltas)}")
            half = 1 << (8 * d - 1)
            for delta in self.deltas:
                if not -half <= delta < half:
                    raise BlockFormatError(f"delta {delta} does not fit in {d} byte(s)")
        elif self.deltas:
            raise BlockFormatError(f"{self.encoding} carries no deltas")
        if self.encoding is Encoding.NO_COMPR:
            if self.raw is None or len(self.raw) != self.line_size:
                raise BlockFormatError("NO_COMPR block must carry the raw line")
        elif self.raw is not None:
            raise BlockFormatError(f"{self.encoding} must not carry raw bytes")

    def segments(self, segment_bytes: int = 8) -> int:
        return -(-self.size_bytes // segment_bytes)


def _block_from_raw(code, base, mask, deltas, line: bytes) -> CompressedBlock:
    encoding = ENCODING_BY_CODE[code]
    if encoding is Encoding.NO_COMPR:
        return CompressedBlock(encoding, len(line), raw=bytes(line))
    return CompressedBlock(encoding, len(line), base=base, zero_base_mask=mask, deltas=deltas)


def _line_bytes(line) -> bytes:
    return line.data if isinstance(line, CacheLineData) else bytes(line)


def compress_line(line) -> CompressedBlock:
    """Compress with the encoding of minimal table size; ties resolve in
    table order. Never fails: NO_COMPR is the total fallback."""
    data = _line_bytes(line)
    if len(data) not in LINE_SIZES:
        raise ValueError(f"line must be one of {LINE_SIZES} bytes")
    code, base, mask, deltas = _backend.compress_line_raw(data)
    return _block_from_raw(code, base, mask, deltas, data)


def compress_unit(line, k: int, d: int, implicit_zero_first_pass: bool = True) -> Optional[CompressedBlock]:
    """Single (k, d) compressor unit.

    With implicit_zero_first_pass, elements that sign-extend from d bytes are
    encoded against a zero base first and the first remaining element becomes
    the base; without it, the first element is the base for everything.
    Returns None when the line is not compressible with this unit.
    """
    data = _line_bytes(line)
    code = UNIT_CODE_BY_KD.get((k, d))
    if code is None:
        raise ValueError(f"invalid compressor unit ({k}, {d})")
    if len(data) % k:
        raise ValueError(f"line size {len(data)} not divisible by element width {k}")
    result = _backend.compress_unit_raw(data, k, d, implicit_zero_first_pass)
    if result is None:
        return None
    base, mask, deltas = result
    return CompressedBlock(ENCODING_BY_CODE[code], len(data), base=base,
                           zero_base_mask=mask, deltas=deltas)


def decompress_line(block: CompressedBlock, line_size: Optional[int] = None) -> CacheLineData:
    """Reconstruct the exact original bytes of a compressed block."""
    if line_size is None:
        line_size = block.line_size
    elif line_size != block.line_size:
        raise BlockFormatError(f"block was encoded for {block.line_size}-byte lines")
    if block.encoding is Encoding.NO_COMPR:
        return CacheLineData(block.raw)
    data = _backend.decompress_raw(
        block.encoding.code, block.base, block.zero_base_mask, tuple(block.deltas), line_size
    )
    return CacheLineData(data)


def size_bucket(size_bytes: int, line_size: int = 64) -> int:
    """Power-of-two size bucket: 0-7B -> 2, 8-15B -> 4, 16-31B -> 8, and so on
    (s = max(2, 2^(floor(log2 size) - 1)))."""
    if not 0 <= size_bytes <= line_size:
        raise ValueError(f"size {size_bytes} outside [0, {line_size}]")
    if size_bytes < 8:
        return 2
    return 1 << (size_bytes.bit_length() - 2)
