import random
import struct

import pytest

from campsim.lcp import (
    BdiLcpCodec,
    FetchedLine,
    LcpError,
    LcpGeometry,
    LcpPage,
    MetadataCache,
    PageKind,
    PteExtension,
    WritebackOutcome,
    batched_fetch,
    compress_page,
    exception_address,
    line_slot_address,
    n_avail,
    read_accesses,
    read_page_image,
    write_page_image,
    writeback_transition,
)

GEO = LcpGeometry()
CODEC = BdiLcpCodec()


def narrow_line(base, rng=None, spread=100):
    """64B line the single-base (8,1) unit compresses to 16 bytes."""
    rng = rng or random.Random(0)
    values = [base] + [(base + rng.randrange(-spread, spread)) % (1 << 64)
                       for _ in range(7)]
    return struct.pack("<8Q", *values)


def random_line(rng):
    return bytes(rng.getrandbits(8) for _ in range(64))


# --------------------------------------------------------------- addresses

def test_line_slot_address_linear_scaling():
    pte = PteExtension(p_base=0)
    assert line_slot_address(pte, 2, 16, GEO) == 32
    assert line_slot_address(pte, 0, 16, GEO) == 0
    pte = PteExtension(p_base=0, c_base=1)
    assert line_slot_address(pte, 3, 16, GEO) == 512 + 48
    assert line_slot_address(PteExtension(p_base=1 << 20), 0, 16, GEO) == (1 << 20)
    with pytest.raises(LcpError):
        line_slot_address(pte, 64, 16, GEO)


def test_exception_address():
    pte = PteExtension(p_base=0)
    # past 64 slots of 16B and the 64B metadata region
    assert exception_address(pte, 0, 16, GEO) == 1024 + 64
    assert exception_address(pte, 1, 16, GEO) == 1024 + 64 + 64
    shifted = PteExtension(p_base=0, c_base=2)
    assert exception_address(shifted, 0, 16, GEO) == 1024 + 64 + 1024


def test_n_avail_examples():
    assert n_avail(2048, 16, GEO) == 15
    assert n_avail(4096, 64, GEO) == 0   # negative interior
    assert n_avail(1088, 16, GEO) == 0   # exactly no room


def test_n_avail_against_arithmetic_oracle():
    rng = random.Random(42)
    for _ in range(20):
        p = rng.choice(GEO.page_sizes)
        c_star = rng.choice([8, 16, 20, 24, 34, 36, 40])
        interior = p - (64 * c_star + 64)
        expected = interior // 64 if interior >= 0 else 0
        assert n_avail(p, c_star, GEO) == expected


def test_metadata_size_formula():
    import math
    for n in (16, 32, 64, 128):
        geo = LcpGeometry(virtual_page_size=n * 64)
        manual_bits = n * (1 + math.ceil(math.log2(n))) + n
        assert geo.metadata_bits == manual_bits
        geo_z = LcpGeometry(virtual_page_size=n * 64, z_bits=True)
        assert geo_z.metadata_bits == manual_bits + n
    assert LcpGeometry().metadata_bytes == 64  # 512 bits for n=64


# ------------------------------------------------------------ compression

def test_zero_page_occupies_nothing():
    page = compress_page([bytes(64)] * 64, CODEC)
    assert page.kind is PageKind.ZERO
    assert page.physical_size == 0


def test_incompressible_page_stays_uncompressed():
    rng = random.Random(7)
    lines = [random_line(rng) for _ in range(64)]
    page = compress_page(lines, CODEC)
    assert page.kind is PageKind.UNCOMPRESSED
    assert page.physical_size == 4096
    assert page.lines() == lines


def test_do_not_compress_flag_honored():
    page = compress_page([bytes(64)] * 64, CODEC, do_not_compress=True)
    assert page.kind is PageKind.UNCOMPRESSED


def test_sixty_narrow_plus_four_exceptions():
    rng = random.Random(3)
    lines = [narrow_line(0x1000 + 4096 * i, rng) for i in range(60)]
    lines += [random_line(rng) for _ in range(4)]
    page = compress_page(lines, CODEC)
    assert page.kind is PageKind.COMPRESSED
    assert page.c_star == 16
    assert page.physical_size == 2048
    assert page.metadata.exceptions_in_use() == 4
    assert page.n_avail == 15
    assert page.lines() == lines


def oracle_best_pair(lines, codec, geo):
    """Brute force over every (c_type, page size) pair."""
    best = None
    for c_type, c_star in codec.candidates:
        exc = sum(codec.try_compress(line, c_type) is None for line in lines)
        required = 64 * c_star + geo.metadata_bytes + exc * 64
        for p in geo.page_sizes:
            if p >= required and p < geo.virtual_page_size:
                if best is None or (p, c_star) < best:
                    best = (p, c_star)
                break
    return best


def test_compress_page_minimality_bruteforce():
    rng = random.Random(11)
    for _ in range(30):
        lines = []
        for _ in range(64):
            kind = rng.randrange(4)
            if kind == 0:
                lines.append(bytes(64))
            elif kind == 1:
                lines.append(narrow_line(rng.getrandbits(63), rng))
            elif kind == 2:
                lines.append(struct.pack("<32H", *(rng.randrange(50, 80)
                                                   for _ in range(32))))
            else:
                lines.append(random_line(rng))
        page = compress_page(lines, CODEC)
        best = oracle_best_pair(lines, CODEC, GEO)
        if best is None:
            assert page.kind is not PageKind.COMPRESSED
        else:
            assert page.kind is PageKind.COMPRESSED
            assert (page.physical_size, page.c_star) == best
        assert page.lines() == lines  # roundtrip through the layout


def test_fpc_style_plugin_candidates_respected():
    class StubCodec:
        name = "fpc-stub"
        line_size = 64
        candidates = ((1, 16), (2, 21), (3, 32), (4, 44))

        def try_compress(self, line, c_type):
            sizes = dict(self.candidates)
            return bytes(sizes[c_type]) if line[0] == 0 else None

        def decompress(self, payload, c_type):
            return bytes(64)

    lines = [bytes(64)] * 63 + [bytes([1]) + bytes(63)]
    page = compress_page(lines, StubCodec())
    # 64*16 + 64 + 1*64 = 1152 -> 2KB page with the 16B target
    assert (page.physical_size, page.c_star, page.c_type) == (2048, 16, 1)


# ----------------------------------------------------------- page images

def test_page_image_roundtrip_and_address_math():
    rng = random.Random(5)
    lines = [narrow_line(0x2000 + 640 * i, rng) for i in range(61)]
    lines += [random_line(rng) for _ in range(3)]
    page = compress_page(lines, CODEC)
    blob = write_page_image(page)
    assert len(blob) == 16 + page.physical_size

    again = read_page_image(blob)
    assert again.kind is PageKind.COMPRESSED
    assert (again.c_type, again.c_star, again.physical_size) == (
        page.c_type, page.c_star, page.physical_size)
    assert again.lines() == lines

    # read every line straight out of the raw image via the address math
    body = blob[16:]
    pte = PteExtension(p_base=0, c_bit=True)
    for i in range(64):
        if page.metadata.e_bit[i]:
            addr = exception_address(pte, page.metadata.e_index[i],
                                     page.c_star, GEO)
            assert body[addr : addr + 64] == lines[i]
        else:
            addr = line_slot_address(pte, i, page.c_star, GEO)
            payload = body[addr : addr + page.c_star]
            assert CODEC.decompress(payload, page.c_type) == lines[i]


def test_zero_and_uncompressed_images():
    zero = compress_page([bytes(64)] * 64, CODEC)
    assert read_page_image(write_page_image(zero)).kind is PageKind.ZERO
    rng = random.Random(9)
    lines = [random_line(rng) for _ in range(64)]
    raw = compress_page(lines, CODEC)
    back = read_page_image(write_page_image(raw))
    assert back.kind is PageKind.UNCOMPRESSED
    assert back.lines() == lines


def test_address_regions_disjoint():
    pte = PteExtension(p_base=0, c_base=1)
    c_star = 16
    slot_ends = line_slot_address(pte, 63, c_star, GEO) + c_star
    meta_start = 512 + 64 * c_star
    assert slot_ends == meta_start
    first_exc = exception_address(pte, 0, c_star, GEO)
    assert first_exc == meta_start + GEO.metadata_bytes
    last_exc_end = exception_address(pte, 14, c_star, GEO) + 64
    assert last_exc_end <= 512 + 2048


# -------------------------------------------------------------- writebacks

def fresh_page():
    rng = random.Random(21)
    lines = [narrow_line(0x9000 + 4096 * i, rng) for i in range(62)]
    lines += [random_line(rng) for _ in range(2)]
    return compress_page(lines, CODEC), lines


def test_writeback_in_place_compressed():
    page, lines = fresh_page()
    new_line = narrow_line(0x9000, random.Random(1))
    outcome, page = writeback_transition(page, 0, new_line, CODEC)
    assert outcome is WritebackOutcome.IN_PLACE
    assert page.read_line(0) == new_line


def test_writeback_exception_alloc_and_free():
    page, lines = fresh_page()
    rng = random.Random(31)
    incompressible = random_line(rng)
    outcome, page = writeback_transition(page, 5, incompressible, CODEC)
    assert outcome is WritebackOutcome.EXCEPTION_ALLOC
    assert page.metadata.e_bit[5]
    assert page.read_line(5) == incompressible

    back_to_narrow = narrow_line(0x4242, rng)
    outcome, page = writeback_transition(page, 5, back_to_narrow, CODEC)
    assert outcome is WritebackOutcome.EXCEPTION_FREE
    assert not page.metadata.e_bit[5]
    assert page.read_line(5) == back_to_narrow


def test_writeback_uncompressed_in_place():
    rng = random.Random(41)
    lines = [random_line(rng) for _ in range(64)]
    page = compress_page(lines, CODEC)
    new = random_line(rng)
    outcome, page = writeback_transition(page, 7, new, CODEC)
    assert outcome is WritebackOutcome.IN_PLACE
    assert page.read_line(7) == new


def test_type1_overflow_migrates_without_recompression():
    page, lines = fresh_page()
    assert page.physical_size == 2048 and page.n_avail == 15
    rng = random.Random(51)
    outcome = None
    filled = page.metadata.exceptions_in_use()
    i = 0
    while filled < page.n_avail:
        outcome, page = writeback_transition(page, i, random_line(rng), CODEC)
        filled = page.metadata.exceptions_in_use()
        i += 1
    # all 15 slots used; the next incompressible write must overflow
    outcome, page = writeback_transition(page, 20, random_line(rng), CODEC)
    assert outcome is WritebackOutcome.TYPE1_OVERFLOW
    assert page.kind is PageKind.COMPRESSED
    assert page.c_star == 16           # same scheme, bigger page
    assert page.physical_size == 4096
    assert page.metadata.exceptions_in_use() == 16


def test_type2_overflow_when_even_largest_pool_insufficient():
    page, lines = fresh_page()
    rng = random.Random(61)
    # 16B target: 1024 + 64 + 47*64 = 4096 fits; the 48th exception cannot
    outcomes = []
    i = 0
    while True:
        outcome, page = writeback_transition(page, i % 64, random_line(rng), CODEC)
        outcomes.append(outcome)
        i += 1
        if outcome in (WritebackOutcome.TYPE2_OVERFLOW,):
            break
        if page.kind is not PageKind.COMPRESSED:
            break
        if i > 200:
            pytest.fail("no overflow reached")
    assert outcomes[-1] is WritebackOutcome.TYPE2_OVERFLOW
    assert page.kind is PageKind.UNCOMPRESSED  # nothing else fit


def test_gradual_dirtying_compressible_data_never_type2():
    # realistic compressibility: writebacks stay compressible
    rng = random.Random(71)
    page, lines = fresh_page()
    for step in range(500):
        i = rng.randrange(64)
        new_line = narrow_line(rng.getrandbits(62), rng)
        outcome, page = writeback_transition(page, i, new_line, CODEC)
        assert outcome is not WritebackOutcome.TYPE2_OVERFLOW
    assert page.kind is PageKind.COMPRESSED


# --------------------------------------------------------------- md cache

def test_md_cache_repeated_page_hits():
    md = MetadataCache(entries=512)
    md.access(1)
    for _ in range(100):
        assert md.access(1)
    assert md.hit_rate > 0.99


def test_md_cache_lru_eviction_513_pages():
    md = MetadataCache(entries=512)
    for round_ in range(3):
        for page in range(513):
            hit = md.access(page)
            if round_ > 0:
                assert not hit  # round-robin over 513 pages never hits
    assert md.hits == 0


def test_read_access_accounting():
    page, lines = fresh_page()
    exc_index = next(i for i in range(64) if page.metadata.e_bit[i])
    comp_index = next(i for i in range(64) if not page.metadata.e_bit[i])
    assert read_accesses(page, comp_index, md_hit=True) == 1
    assert read_accesses(page, comp_index, md_hit=False) == 1
    assert read_accesses(page, exc_index, md_hit=True) == 1
    assert read_accesses(page, exc_index, md_hit=False) == 2

    zero = compress_page([bytes(64)] * 64, CODEC)
    assert read_accesses(zero, 0, md_hit=False) == 0

    geo_z = LcpGeometry(z_bits=True)
    codec = BdiLcpCodec()
    lines = [bytes(64)] * 32 + [narrow_line(0x7000 + i, random.Random(i)) for i in range(32)]
    page_z = compress_page(lines, codec, geo_z)
    assert page_z.metadata.z_bit[0]
    assert read_accesses(page_z, 0, md_hit=True) == 0
    assert read_accesses(page_z, 0, md_hit=False) == 1


# ------------------------------------------------------------ batched fetch

def test_batched_fetch_four_lines_at_16b():
    page, lines = fresh_page()
    assert page.c_star == 16
    fetched = batched_fetch(page, 5)
    assert [f.index for f in fetched] == [4, 5, 6, 7]
    assert all(f.valid for f in fetched)


def test_batched_fetch_exception_slot_invalid():
    page, lines = fresh_page()
    exc_index = next(i for i in range(64) if page.metadata.e_bit[i])
    group = (exc_index // 4) * 4
    fetched = batched_fetch(page, group)
    flags = {f.index: f.valid for f in fetched}
    assert flags[exc_index] is False


def test_batched_fetch_uncompressed_single_line():
    rng = random.Random(81)
    lines = [random_line(rng) for _ in range(64)]
    page = compress_page(lines, CODEC)
    assert batched_fetch(page, 9) == [FetchedLine(9, True, True)]


def test_batched_fetch_install_hints():
    page, lines = fresh_page()
    fetched = batched_fetch(page, 5, install_hints={6})
    installed = {f.index for f in fetched if f.installed}
    assert 5 in installed and 6 in installed and 4 not in installed
