"""Golden-vector files for cross-implementation codec checks.

Format: one vector per line, three whitespace-separated fields:

    <hex line payload> <encoding-name> <size-bytes>

The payload is 2*line_size hex characters (128 for 64-byte lines).
"""

from __future__ import annotations

from typing import Iterable, List, Tuple

from campsim.compression.codec import compress_line
from campsim.compression.encodings import Encoding


def write_golden_vectors(path, lines: Iterable[bytes]) -> int:
    """Compress each line and append `<hex> <name> <size>` records."""
    count = 0
    with open(path, "w", encoding="ascii") as fh:
        for line in lines:
            block = compress_line(line)
            fh.write(f"{bytes(line).hex()} {block.encoding.value} {block.size_bytes}\n")
            count += 1
    return count


def read_golden_vectors(path) -> List[Tuple[bytes, Encoding, int]]:
    vectors = []
    with open(path, encoding="ascii") as fh:
        for lineno, row in enumerate(fh, 1):
            row = row.strip()
            if not row:
                continue
            try:
                hexline, name, size = row.split()
                vectors.append((bytes.fromhex(hexline), Encoding(name), int(size)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad golden vector: {row!r}") from exc
    return vectors


def check_golden_vectors(path) -> List[str]:
    """Recompress every vector; returns a list of mismatch descriptions."""
    failures = []
    for i, (line, encoding, size) in enumerate(read_golden_vectors(path)):
        block = compress_line(line)
        if block.encoding is not encoding or block.size_bytes != size:
            failures.append(
                f"vector {i}: expected {encoding.value}/{size}, "
                f"got {block.encoding.value}/{block.size_bytes}"
            )
    return failures
