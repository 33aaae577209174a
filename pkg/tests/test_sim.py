import json
import random

import pytest

from campsim.belady import (
    OfflineCache,
    belady_counterexample,
    belady_victim,
    next_use_indices,
    size_aware_victims,
)
from campsim.sim import (
    ConfigError,
    ReuseTracker,
    SimConfig,
    build_model,
    effective_compression_ratio,
    empty_histogram,
    run_simulation,
    toggle_analysis,
)
from campsim.trace import TraceRecord, gen_synthetic

from test_cache import ClassicLru, ClassicSrrip


def make_config(**overrides):
    base = {"geometry": {"capacity_bytes": 64 * 4 * 16, "assoc": 4}}
    base.update(overrides)
    return SimConfig.from_dict(base)


def read_trace(addr_sequence, payload=None):
    payload = payload or (lambda addr: bytes(64))
    return [TraceRecord(i + 1, "R", a, payload(a))
            for i, a in enumerate(addr_sequence)]


# ------------------------------------------------------------------- belady

def test_belady_victim_examples():
    future = ["a"] * 5 + ["x"] + ["b"]  # x at 5, b at 6
    assert belady_victim(future, ["x", "b"]) == "b"
    assert belady_victim(["a", "b"], ["a", "never", "b"]) == "never"


def test_next_use_indices():
    assert next_use_indices(["a", "b", "a"]) == [2, float("inf"), float("inf")]


def test_size_aware_prefers_smallest_loss():
    future = ["A", "Y", "B", "C", "B", "Y", "A"]
    residents = ["A", "B", "C", "Y"]
    sizes = {"A": 32, "B": 32, "C": 32, "X": 64, "Y": 64}
    assert size_aware_victims(future, residents, sizes, 64) == ["Y"]


def test_belady_counterexample_scenario():
    results = belady_counterexample()
    assert results["belady"] == {
        "hits": 2, "misses": 2,
        "all_outcomes": [False, True, True, False, False, True, True, True],
        "final_contents": ["A", "B", "C", "Y"],
    }
    assert results["size_aware"]["hits"] == 3
    assert results["size_aware"]["misses"] == 1
    # the loop returns to the starting state under both policies
    assert results["size_aware"]["final_contents"] == ["A", "B", "C", "Y"]


# ------------------------------------------------------------------- config

def test_unknown_config_keys_rejected():
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"geometry": {}, "bogus": 1})
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"geometry": {"capacity": 1}})
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"policy": "clairvoyant"})
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"toggles": {"metricx": "ed"}})


def test_trace_line_size_mismatch_rejected():
    cfg = make_config()
    trace = [TraceRecord(1, "R", 0, bytes(32))]
    with pytest.raises(ConfigError):
        run_simulation(cfg, trace)


# ---------------------------------------------------------------- reporting

def test_empty_trace_zeroed_report():
    report = run_simulation(make_config(), [])
    assert report.accesses == report.misses == report.hits == 0
    assert report.mpki == 0.0 and report.bpki == 0.0
    assert report.effective_compression_ratio == 0.0
    assert sum(report.size_histogram.values()) == 0


def test_histogram_conservation_and_bins():
    trace = gen_synthetic("size_reuse_correlated",
                          {"streams": [{"bin": 1, "reuse_distance": 30},
                                       {"bin": 8, "reuse_distance": 3000}],
                           "accesses": 5000}, seed=2)
    report = run_simulation(make_config(), trace)
    assert sum(report.size_histogram.values()) == report.misses
    assert set(report.size_histogram) == set(empty_histogram())
    assert report.size_histogram["0-8"] > 0
    assert report.size_histogram["64"] > 0


def test_mpki_definition():
    trace = read_trace([i * 64 for i in range(100)])
    report = run_simulation(make_config(), trace)
    assert report.misses == 100
    assert report.mpki == 100 * 1000.0 / trace[-1].icount


def test_determinism_byte_identical_reports():
    trace = gen_synthetic("narrow", {"lines": 128, "accesses": 3000}, seed=5)
    cfg = make_config(policy="camp",
                      sip={"m_sets_per_bin": 2, "train_period_accesses": 500})
    a = run_simulation(cfg, trace).to_json()
    b = run_simulation(cfg, trace).to_json()
    assert a == b


# ------------------------------------------------------- oracle equivalence

def test_lru_rrip_match_textbook_through_driver():
    rng = random.Random(0xD1)
    addrs = [rng.randrange(300) * 64 for _ in range(20_000)]
    payload = {}
    def data_of(addr):
        if addr not in payload:
            payload[addr] = bytes([rng.randrange(256)]) * 64  # incompressible? no: rep
        return payload[addr]
    # force incompressible lines via codec "none"
    trace = read_trace(addrs, lambda a: bytes(64))
    for policy, oracle_cls in (("lru", ClassicLru), ("rrip", ClassicSrrip)):
        cfg = SimConfig.from_dict({
            "geometry": {"capacity_bytes": 64 * 4 * 16, "assoc": 4,
                         "tag_factor": 1},
            "policy": policy, "codec": "none"})
        report = run_simulation(cfg, trace)
        oracle = oracle_cls(16, 4, 64)
        oracle_misses = sum(0 if oracle.access(a) else 1 for a in addrs)
        assert report.misses == oracle_misses


def test_camp_beats_rrip_on_correlated_trace():
    streams = [{"bin": 1, "reuse_distance": 40, "weight": 1.0},
               {"bin": 8, "reuse_distance": 50_000, "weight": 20.0}]
    trace = gen_synthetic("size_reuse_correlated",
                          {"streams": streams, "accesses": 60_000}, seed=9)
    sip = {"m_sets_per_bin": 4, "train_period_accesses": 10_000}
    camp = run_simulation(make_config(policy="camp", sip=sip), trace)
    rrip = run_simulation(make_config(policy="rrip"), trace)
    assert camp.misses < rrip.misses


# --------------------------------------------------- effective compression

def test_effective_ratio_all_zero_lines_tag_limited():
    trace = read_trace([(i % 16) * 64 for i in range(600)])
    report = run_simulation(make_config(), trace)
    assert report.effective_compression_ratio == 2.0
    assert effective_compression_ratio(report) == 2.0


def test_effective_ratio_incompressible_is_one():
    cfg = SimConfig.from_dict({
        "geometry": {"capacity_bytes": 64 * 4 * 16, "assoc": 4},
        "codec": "none"})
    trace = read_trace([(i % 16) * 64 for i in range(600)])
    report = run_simulation(cfg, trace)
    assert report.effective_compression_ratio == 1.0


def test_effective_ratio_mid_size_matches_occupancy_oracle():
    import struct
    def payload(addr):
        if (addr // 64) % 2:
            return struct.pack("<8Q", *(0x10000 + 300 * i for i in range(8)))  # 24B
        return bytes(range(64))  # incompressible
    addrs = [(i % 32) * 64 for i in range(2000)]
    trace = read_trace(addrs, payload)
    cfg = make_config()
    report = run_simulation(cfg, trace)
    assert 1.0 < report.effective_compression_ratio < 2.0

    # replay manually, sampling the model's resident byte counts
    model = build_model(cfg)
    total = 0.0
    samples = 0
    for r in trace:
        model.access(r.op, r.addr, r.data)
        unc, comp = model.resident_bytes()
        if unc:
            total += min(2.0, unc / comp)
            samples += 1
    assert report.effective_compression_ratio == pytest.approx(total / samples)


# ------------------------------------------------------------ reuse tracking

def oracle_stack_distance(addrs):
    out = []
    last = {}
    for i, a in enumerate(addrs):
        if a in last:
            out.append(len(set(addrs[last[a] + 1 : i])))
        else:
            out.append(None)
        last[a] = i
    return out


def test_reuse_tracker_matches_bruteforce():
    rng = random.Random(0x5D)
    addrs = [rng.randrange(60) for _ in range(5000)]
    tracker = ReuseTracker(len(addrs))
    expected = oracle_stack_distance(addrs)
    for i, a in enumerate(addrs):
        got = tracker.observe(a, i)
        if expected[i] is None:
            assert got is None
        else:
            prev = max(j for j in range(i) if addrs[j] == a)
            assert got == (i - prev - 1, expected[i])


def test_report_reuse_by_size_labels():
    streams = [{"bin": 1, "reuse_distance": 5},
               {"bin": 8, "reuse_distance": 40}]
    trace = gen_synthetic("size_reuse_correlated",
                          {"streams": streams, "accesses": 2000}, seed=3)
    report = run_simulation(make_config(), trace)
    for stats in report.reuse_by_size.values():
        assert {"request_mean", "stack_mean", "count"} <= set(stats)
    # distances are global (interleaving inflates both), order is preserved
    assert report.reuse_by_size["1"]["stack_mean"] < report.reuse_by_size["8"]["stack_mean"]
    assert report.reuse_by_size["1"]["request_mean"] < report.reuse_by_size["8"]["request_mean"]


# ------------------------------------------------------------------ toggles

def test_toggle_analysis_rows():
    trace = gen_synthetic("narrow", {"lines": 8, "accesses": 20}, seed=1)
    rows = toggle_analysis(trace, flit_bytes=32, metric="ed", bu=0.0)
    assert len(rows) == 20
    assert set(rows[0]) == {"line", "T0", "T1", "CR", "decision"}
    assert all(r["decision"] in ("compressed", "uncompressed") for r in rows)


def test_sim_with_toggles_and_bus_accounting():
    trace = gen_synthetic("zero", {"lines": 64, "accesses": 500}, seed=0)
    cfg = make_config(toggles={"enabled": True})
    report = run_simulation(cfg, trace)
    assert report.toggles["transfers"] >= report.misses
    assert report.toggles["sent_compressed"] > 0
    # zero lines: 1-byte payload rounds to one 8-byte bus granule per miss
    assert report.bpki == report.misses * 8 * 1000 / 500


# ---------------------------------------------------------------------- lcp

def test_sim_with_lcp_backend():
    trace = gen_synthetic("size_reuse_correlated",
                          {"streams": [{"bin": 1, "reuse_distance": 200},
                                       {"bin": 2, "reuse_distance": 100}],
                           "accesses": 3000}, seed=6)
    cfg = make_config(lcp={"enabled": True})
    report = run_simulation(cfg, trace)
    assert report.lcp["pages"] > 0
    assert report.lcp["memory_accesses"] > 0
    assert 0.0 <= report.lcp["md_cache_hit_rate"] <= 1.0
    assert report.lcp["type2_overflows"] == 0


def test_vway_policies_run_through_driver():
    trace = gen_synthetic("size_reuse_correlated",
                          {"streams": [{"bin": 1, "reuse_distance": 30},
                                       {"bin": 8, "reuse_distance": 2000}],
                           "accesses": 4000}, seed=8)
    for policy in ("vway", "gmve", "gsip", "gcamp"):
        cfg = SimConfig.from_dict({
            "geometry": {"capacity_bytes": 64 * 16 * 8, "assoc": 16},
            "policy": policy,
            "sip": {"train_period_accesses": 1000},
            "vway": {"num_regions": 8}})
        report = run_simulation(cfg, trace)
        assert report.accesses == 4000
        assert report.misses > 0
