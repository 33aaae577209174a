"""Line compression: kernels plus the typed codec API.

The hot kernels have two interchangeable backends: a compiled Cython
extension and a pure-Python fallback.  Selection happens here at import
time; set CAMPSIM_PURE_PYTHON=1 to force the fallback.
"""

import os

if os.environ.get("CAMPSIM_PURE_PYTHON"):
    from campsim.compression import kernels_py as _backend
else:
    try:
        from campsim.compression import _kernels as _backend  # type: ignore[no-redef]
    except ImportError:
        from campsim.compression import kernels_py as _backend  # type: ignore[no-redef]


def active_backend() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return "python" if _backend.__name__.endswith("kernels_py") else "compiled"


from campsim.compression.codec import (  # noqa: E402
    BlockFormatError,
    CacheLineData,
    CompressedBlock,
    compress_line,
    compress_unit,
    decompress_line,
    size_bucket,
)
from campsim.compression.encodings import (  # noqa: E402
    ENCODING_BY_CODE,
    SIZE_TABLE,
    TABLE_ORDER,
    Encoding,
    compressed_size,
)

__all__ = [
    "BlockFormatError",
    "CacheLineData",
    "CompressedBlock",
    "Encoding",
    "ENCODING_BY_CODE",
    "SIZE_TABLE",
    "TABLE_ORDER",
    "active_backend",
    "compress_line",
    "compress_unit",
    "compressed_size",
    "decompress_line",
    "size_bucket",
]
