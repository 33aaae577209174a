"""Pure-Python codec kernels.

Reference implementation of the hot compression/decompression loops.  The
compiled extension (_kernels.pyx) mirrors these semantics bit for bit; the
active backend is chosen at import time in campsim.compression.

Raw value protocol shared by both backends:

    compress_line_raw(line)  -> (code, base, mask, deltas)
    compress_unit_raw(...)   -> (base, mask, deltas) or None
    decompress_raw(...)      -> bytes

where base is the unsigned base value, mask is the per-element zero-base
bitmask (bit i set = element i uses the implicit zero base), and deltas is a
tuple of signed per-element differences.
"""

import struct

# (code, base width, delta width) for the six delta units, in table order.
_UNITS = (
    (0b0010, 8, 1),
    (0b0011, 8, 2),
    (0b0100, 8, 4),
    (0b0101, 4, 1),
    (0b0110, 4, 2),
    (0b0111, 2, 1),
)

_UNIT_BY_CODE = {code: (k, d) for code, k, d in _UNITS}

_STRUCTS: dict = {}
_ZERO_LINES: dict = {}


def _packer(k: int, n: int) -> struct.Struct:
    key = (k, n)
    s = _STRUCTS.get(key)
    if s is None:
        s = struct.Struct("<%d%s" % (n, {2: "H", 4: "I", 8: "Q"}[k]))
        _STRUCTS[key] = s
    return s


def compress_unit_raw(line: bytes, k: int, d: int, two_step: bool):
    """Single (k, d) compressor unit; returns (base, mask, deltas) or None."""
    n = len(line) // k
    kmod = 1 << (8 * k)
    khalf = kmod >> 1
    dhalf = 1 << (8 * d - 1)
    values = _packer(k, n).unpack(line)
    deltas = [0] * n
    mask = 0
    base = None
    if two_step:
        for i, v in enumerate(values):
            s = v - kmod if v >= khalf else v
            if -dhalf <= s < dhalf:
                mask |= 1 << i
                deltas[i] = s
            elif base is None:
                base = v
            else:
                s = (v - base) & (kmod - 1)
                if s >= khalf:
                    s -= kmod
                if not -dhalf <= s < dhalf:
                    return None
                deltas[i] = s
        if base is None:
            base = 0
    else:
        base = values[0]
        for i, v in enumerate(values):
            s = (v - base) & (kmod - 1)
            if s >= khalf:
                s -= kmod
            if not -dhalf <= s < dhalf:
                return None
            deltas[i] = s
    return base, mask, tuple(deltas)


def compress_line_raw(line: bytes):
    """Full compressor: returns (code, base, mask, deltas)."""
    size = len(line)
    zero = _ZERO_LINES.get(size)
    if zero is None:
        zero = _ZERO_LINES[size] = bytes(size)
    if line == zero:
        return 0b0000, 0, 0, ()
    if line == line[:8] * (size // 8):
        return 0b0001, int.from_bytes(line[:8], "little"), 0, ()
    best = None
    best_size = size
    for code, k, d in _UNITS:
        unit = compress_unit_raw(line, k, d, True)
        if unit is not None:
            unit_size = k + (size // k) * d
            if unit_size < best_size:
                best_size = unit_size
                best = (code, unit[0], unit[1], unit[2])
    if best is None:
        return 0b1111, 0, 0, ()
    return best


def decompress_raw(code: int, base: int, mask: int, deltas, line_size: int) -> bytes:
    if code == 0b0000:
        return bytes(line_size)
    if code == 0b0001:
        return base.to_bytes(8, "little") * (line_size // 8)
    k, _ = _UNIT_BY_CODE[code]
    kmod = 1 << (8 * k)
    n = line_size // k
    values = [
        ((0 if (mask >> i) & 1 else base) + deltas[i]) % kmod for i in range(n)
    ]
    return _packer(k, n).pack(*values)
