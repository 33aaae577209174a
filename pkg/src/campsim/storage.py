"""Storage-cost accounting for the cache organizations in this package.

Every figure is derived from the geometry (capacity, associativity, line
size, address width, segment size); nothing is hard-coded.  Two unit
conventions appear because the reference tables use both: the doubled-tag
table reports binary kibibytes, the policy-overhead table metric kilobytes.
"""

from __future__ import annotations

from dataclasses import dataclass


def _log2_exact(value: int, what: str) -> int:
    bits = value.bit_length() - 1
    if value <= 0 or (1 << bits) != value:
        raise ValueError(f"{what} must be a power of two, got {value}")
    return bits


@dataclass(frozen=True)
class StorageRow:
    """Bit-level cost of one cache organization."""

    name: str
    tag_entry_bits: int
    data_entry_bits: int
    num_tag_entries: int
    num_data_entries: int
    other_bits: int = 0

    @property
    def tag_store_bytes(self) -> float:
        return self.tag_entry_bits * self.num_tag_entries / 8

    @property
    def data_store_bytes(self) -> float:
        return self.data_entry_bits * self.num_data_entries / 8

    @property
    def total_bytes(self) -> float:
        return self.tag_store_bytes + self.data_store_bytes + self.other_bits / 8

    def tag_store_kb(self, unit: int = 1024) -> int:
        return round(self.tag_store_bytes / unit)

    def data_store_kb(self, unit: int = 1024) -> int:
        return round(self.data_store_bytes / unit)

    def total_kb(self, unit: int = 1024) -> int:
        return round(self.total_bytes / unit)


def baseline_tag_entry_bits(capacity_bytes: int, line_size: int, assoc: int,
                            address_bits: int, state_bits: int = 2) -> int:
    """Address tag plus valid/dirty state for a conventional cache entry."""
    num_sets = capacity_bytes // (line_size * assoc)
    tag_bits = address_bits - _log2_exact(num_sets, "num_sets") - _log2_exact(line_size, "line_size")
    return tag_bits + state_bits


def segment_pointer_bits(line_size: int, assoc: int, segment_bytes: int) -> int:
    return _log2_exact(assoc * line_size // segment_bytes, "segments per set")


def compressed_cache_storage(capacity_bytes: int = 2 * 1024 * 1024,
                             line_size: int = 64,
                             assoc: int = 16,
                             address_bits: int = 36,
                             tag_factor: int = 2,
                             segment_bytes: int = 8,
                             encoding_bits: int = 4) -> tuple[StorageRow, StorageRow]:
    """Baseline vs doubled-tag compressed organization (binary-kiB table)."""
    num_lines = capacity_bytes // line_size
    base_bits = baseline_tag_entry_bits(capacity_bytes, line_size, assoc, address_bits)
    comp_bits = base_bits + encoding_bits + segment_pointer_bits(line_size, assoc, segment_bytes)
    baseline = StorageRow("baseline", base_bits, line_size * 8, num_lines, num_lines)
    compressed = StorageRow("compressed", comp_bits, line_size * 8,
                            tag_factor * num_lines, num_lines)
    return baseline, compressed


def policy_storage_table(capacity_bytes: int = 2 * 1024 * 1024,
                         line_size: int = 64,
                         assoc: int = 16,
                         address_bits: int = 36,
                         tag_factor: int = 2,
                         local_segment_bytes: int = 1,
                         vway_segment_bytes: int = 8,
                         num_regions: int = 8,
                         sampling_fraction: int = 8,
                         encoding_bits: int = 4,
                         reuse_ctr_bits: int = 2,
                         dueling_ctr_bits: int = 16) -> dict[str, StorageRow]:
    """Storage of the six designs in the policy-overhead table (metric kB).

    Local compressed designs charge a byte-granular segment pointer; the
    decoupled-tag designs charge forward/reverse pointers, with 3 bits saved
    on each pointer by region-local addressing, and a 3-bit size+validity
    field per reverse pointer.
    """
    num_lines = capacity_bytes // line_size
    base_bits = baseline_tag_entry_bits(capacity_bytes, line_size, assoc, address_bits)
    local_ptr = segment_pointer_bits(line_size, assoc, local_segment_bytes)
    bdi_bits = base_bits + encoding_bits + local_ptr

    fptr_bits = _log2_exact(num_lines, "data entries")
    rptr_bits = _log2_exact(tag_factor * num_lines, "tag entries")
    region_save = _log2_exact(num_regions, "regions")
    fptr_compressed = fptr_bits + _log2_exact(line_size // vway_segment_bytes,
                                              "segments per line") - region_save
    rptr_compressed = rptr_bits - region_save
    vsize_bits = 3  # validity plus compressed size in segments
    rptrs = 2

    line_bits = line_size * 8
    dueling_bits = num_regions * dueling_ctr_bits
    sampled_tags = tag_factor * num_lines * (sampling_fraction + 1) // sampling_fraction

    rows = {
        "base": StorageRow("base", base_bits, line_bits, num_lines, num_lines),
        "bdi": StorageRow("bdi", bdi_bits, line_bits, tag_factor * num_lines, num_lines),
        "camp": StorageRow("camp", bdi_bits, line_bits, sampled_tags, num_lines,
                           other_bits=dueling_bits),
        "vway": StorageRow("vway", base_bits + fptr_bits, line_bits + rptr_bits,
                           tag_factor * num_lines, num_lines),
        "vway_c": StorageRow("vway_c", base_bits + fptr_compressed + encoding_bits,
                             line_bits + rptrs * (rptr_compressed + vsize_bits),
                             tag_factor * num_lines, num_lines),
    }
    rows["gcamp"] = StorageRow(
        "gcamp", rows["vway_c"].tag_entry_bits, rows["vway_c"].data_entry_bits,
        tag_factor * num_lines, num_lines, other_bits=dueling_bits)
    return rows
