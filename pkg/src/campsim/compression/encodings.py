"""Encoding identifiers and the fixed size table for the line codec."""

import enum


class Encoding(enum.Enum):
    ZEROS = "zeros"
    REP_VALUES = "rep_values"
    B8D1 = "b8d1"
    B8D2 = "b8d2"
    B8D4 = "b8d4"
    B4D1 = "b4d1"
    B4D2 = "b4d2"
    B2D1 = "b2d1"
    NO_COMPR = "no_compr"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def base_width(self):
        return _WIDTHS[self][0]

    @property
    def delta_width(self):
        return _WIDTHS[self][1]

    def compressed_size(self, line_size: int) -> int:
        return compressed_size(self, line_size)


# 4-bit codes stored per tag.
_CODES = {
    Encoding.ZEROS: 0b0000,
    Encoding.REP_VALUES: 0b0001,
    Encoding.B8D1: 0b0010,
    Encoding.B8D2: 0b0011,
    Encoding.B8D4: 0b0100,
    Encoding.B4D1: 0b0101,
    Encoding.B4D2: 0b0110,
    Encoding.B2D1: 0b0111,
    Encoding.NO_COMPR: 0b1111,
}

ENCODING_BY_CODE = {code: enc for enc, code in _CODES.items()}

# (base width, delta width) in bytes; None where the field has no meaning.
_WIDTHS = {
    Encoding.ZEROS: (1, 0),
    Encoding.REP_VALUES: (8, 0),
    Encoding.B8D1: (8, 1),
    Encoding.B8D2: (8, 2),
    Encoding.B8D4: (8, 4),
    Encoding.B4D1: (4, 1),
    Encoding.B4D2: (4, 2),
    Encoding.B2D1: (2, 1),
    Encoding.NO_COMPR: (None, None),
}

# Compressed sizes in bytes for 32- and 64-byte lines.  For the delta
# encodings this equals base_width + (line_size/base_width) * delta_width.
SIZE_TABLE = {
    Encoding.ZEROS: {32: 1, 64: 1},
    Encoding.REP_VALUES: {32: 8, 64: 8},
    Encoding.B8D1: {32: 12, 64: 16},
    Encoding.B8D2: {32: 16, 64: 24},
    Encoding.B8D4: {32: 24, 64: 40},
    Encoding.B4D1: {32: 12, 64: 20},
    Encoding.B4D2: {32: 20, 64: 36},
    Encoding.B2D1: {32: 18, 64: 34},
    Encoding.NO_COMPR: {32: 32, 64: 64},
}

LINE_SIZES = (32, 64)

# Evaluation order for compress_line: ties on size resolve to the earlier row.
TABLE_ORDER = (
    Encoding.ZEROS,
    Encoding.REP_VALUES,
    Encoding.B8D1,
    Encoding.B8D2,
    Encoding.B8D4,
    Encoding.B4D1,
    Encoding.B4D2,
    Encoding.B2D1,
    Encoding.NO_COMPR,
)

# Valid (base width, delta width) pairs for the delta compressor units,
# in table order, keyed by encoding code.
UNIT_PARAMS = {
    0b0010: (8, 1),
    0b0011: (8, 2),
    0b0100: (8, 4),
    0b0101: (4, 1),
    0b0110: (4, 2),
    0b0111: (2, 1),
}

UNIT_CODE_BY_KD = {kd: code for code, kd in UNIT_PARAMS.items()}


def compressed_size(encoding: Encoding, line_size: int) -> int:
    if line_size not in LINE_SIZES:
        raise ValueError(f"unsupported line size {line_size}")
    return SIZE_TABLE[encoding][line_size]
