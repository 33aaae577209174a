# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled codec kernels.

Mirrors kernels_py exactly; see that module for the value protocol.
"""

from libc.stdint cimport uint64_t, int64_t


cdef inline uint64_t _load(const unsigned char *p, int k) nogil:
    cdef uint64_t v = 0
    cdef int j
    for j in range(k - 1, -1, -1):
        v = (v << 8) | p[j]
    return v


cdef int _unit(const unsigned char *buf, int size, int k, int d, bint two_step,
               uint64_t *base_out, uint64_t *mask_out, int64_t *deltas) nogil:
    """Returns 1 and fills outputs on success, 0 if not compressible."""
    cdef int n = size // k
    cdef int64_t dhalf = (<int64_t>1) << (8 * d - 1)
    cdef uint64_t kmask = 0xFFFFFFFFFFFFFFFFULL if k == 8 else ((<uint64_t>1 << (8 * k)) - 1)
    cdef uint64_t khalf = (<uint64_t>1) << (8 * k - 1)
    cdef uint64_t mask = 0
    cdef uint64_t base = 0
    cdef bint have_base = False
    cdef int i
    cdef uint64_t v, raw
    cdef int64_t s
    if two_step:
        for i in range(n):
            v = _load(buf + i * k, k)
            # sign-extend the k-byte value
            s = <int64_t>(v | ~kmask) if v >= khalf else <int64_t>v
            if -dhalf <= s < dhalf:
                mask |= (<uint64_t>1) << i
                deltas[i] = s
            elif not have_base:
                base = v
                have_base = True
                deltas[i] = 0
            else:
                raw = (v - base) & kmask
                s = <int64_t>(raw | ~kmask) if raw >= khalf else <int64_t>raw
                if not (-dhalf <= s < dhalf):
                    return 0
                deltas[i] = s
    else:
        base = _load(buf, k)
        for i in range(n):
            v = _load(buf + i * k, k)
            raw = (v - base) & kmask
            s = <int64_t>(raw | ~kmask) if raw >= khalf else <int64_t>raw
            if not (-dhalf <= s < dhalf):
                return 0
            deltas[i] = s
    base_out[0] = base
    mask_out[0] = mask
    return 1


cdef tuple _deltas_tuple(const int64_t *deltas, int n):
    cdef int i
    return tuple([deltas[i] for i in range(n)])


def compress_unit_raw(const unsigned char[::1] line, int k, int d, bint two_step):
    cdef int size = line.shape[0]
    cdef uint64_t base = 0, mask = 0
    cdef int64_t deltas[32]
    if not _unit(&line[0], size, k, d, two_step, &base, &mask, deltas):
        return None
    return base, mask, _deltas_tuple(deltas, size // k)


def compress_line_raw(const unsigned char[::1] line):
    cdef int size = line.shape[0]
    cdef const unsigned char *buf = &line[0]
    cdef int i
    cdef bint all_zero = True
    for i in range(size):
        if buf[i] != 0:
            all_zero = False
            break
    if all_zero:
        return 0b0000, 0, 0, ()
    cdef bint rep = True
    for i in range(8, size):
        if buf[i] != buf[i & 7]:
            rep = False
            break
    if rep:
        return 0b0001, _load(buf, 8), 0, ()

    cdef int codes[6]
    cdef int ks[6]
    cdef int ds[6]
    codes[0] = 0b0010; ks[0] = 8; ds[0] = 1
    codes[1] = 0b0011; ks[1] = 8; ds[1] = 2
    codes[2] = 0b0100; ks[2] = 8; ds[2] = 4
    codes[3] = 0b0101; ks[3] = 4; ds[3] = 1
    codes[4] = 0b0110; ks[4] = 4; ds[4] = 2
    codes[5] = 0b0111; ks[5] = 2; ds[5] = 1

    cdef int64_t deltas[32]
    cdef int64_t best_deltas[32]
    cdef uint64_t base = 0, mask = 0
    cdef uint64_t best_base = 0, best_mask = 0
    cdef int best_code = -1, best_n = 0
    cdef int best_size = size
    cdef int unit_size, j, n
    for i in range(6):
        if _unit(buf, size, ks[i], ds[i], True, &base, &mask, deltas):
            unit_size = ks[i] + (size // ks[i]) * ds[i]
            if unit_size < best_size:
                best_size = unit_size
                best_code = codes[i]
                best_base = base
                best_mask = mask
                best_n = size // ks[i]
                for j in range(best_n):
                    best_deltas[j] = deltas[j]
    if best_code < 0:
        return 0b1111, 0, 0, ()
    return best_code, best_base, best_mask, _deltas_tuple(best_deltas, best_n)


def decompress_raw(int code, object base, object mask, tuple deltas, int line_size):
    if code == 0b0000:
        return bytes(line_size)
    if code == 0b0001:
        return (<object>base).to_bytes(8, "little") * (line_size // 8)
    cdef int k
    if code == 0b0010 or code == 0b0011 or code == 0b0100:
        k = 8
    elif code == 0b0101 or code == 0b0110:
        k = 4
    else:
        k = 2
    cdef uint64_t kmask = 0xFFFFFFFFFFFFFFFFULL if k == 8 else ((<uint64_t>1 << (8 * k)) - 1)
    cdef int n = line_size // k
    cdef uint64_t b = <uint64_t>base
    cdef uint64_t m = <uint64_t>mask
    cdef bytearray out = bytearray(line_size)
    cdef int i, j
    cdef uint64_t v
    cdef int64_t delta
    for i in range(n):
        delta = deltas[i]
        v = ((0 if (m >> i) & 1 else b) + <uint64_t>delta) & kmask
        for j in range(k):
            out[i * k + j] = v & 0xFF
            v >>= 8
    return bytes(out)
