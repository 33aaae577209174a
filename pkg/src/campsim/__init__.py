"""campsim: trace-driven simulation toolkit for compressed memory hierarchies."""

from campsim.compression import (
    CacheLineData,
    CompressedBlock,
    Encoding,
    active_backend,
    compress_line,
    compress_unit,
    decompress_line,
    size_bucket,
)

__version__ = "0.1.0"

__all__ = [
    "CacheLineData",
    "CompressedBlock",
    "Encoding",
    "active_backend",
    "compress_line",
    "compress_unit",
    "decompress_line",
    "size_bucket",
    "__version__",
]
