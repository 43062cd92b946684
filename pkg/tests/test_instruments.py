"""Probes, bit-error-rate checks, bandwidth assertions, and file transfer."""

import json
import random

import pytest

import helpers
from procgrid import engine
from procgrid.errors import (
    BadSpec,
    FileFormatError,
    MissingFile,
    NoReserveError,
    TypeMismatch,
    UnknownSignal,
)
from procgrid.fabric import expand_occupancy
from procgrid.instruments import (
    ProbeSpec,
    ber,
    bind_file,
    check_bandwidth_assertion,
    grid_for,
    insert_probe,
    load_value_file,
    probe_ber,
    probe_bandwidth,
    probe_report,
    write_value_file,
)
from procgrid.netlist import ValueType

U16 = ValueType("unsigned", 16, "unsigned")
U32 = ValueType("unsigned", 32, "unsigned")


def probe_paths(art):
    return {p.path for p in art.probes}


def filtered(trace, drop):
    out = []
    for line in trace:
        ev = json.loads(line)
        if ev.get("instance") in drop:
            continue
        out.append(line)
    return out


def dump_sans_probes(state, drop):
    doc = engine.state_dump(state)
    doc["instances"] = {
        path: rec for path, rec in doc["instances"].items() if path not in drop
    }
    return json.dumps(doc, sort_keys=True)


# --- probe insertion --------------------------------------------------------

def test_insert_trace_probe_preserves_design():
    art = helpers.build(helpers.pair_src(period=4), 4, 4)
    probed = insert_probe(art, ProbeSpec("trace", ("top/s",)))
    assert len(probed.probes) == 1
    # the original cells and offsets survive; the probe occupies a new cell
    assert art.placement.cells.items() <= probed.placement.cells.items()
    assert set(probed.placement.cells) - set(art.placement.cells) == {"probe/p0"}
    assert probed.schedule.offsets["top/s"] == art.schedule.offsets["top/s"]
    sig = probed.flat.signal("top/s")
    assert [d.path for d in sig.dests] == ["top/c"]
    assert len(sig.taps) == 1


def test_probe_takes_reserve_cell():
    art = helpers.build(helpers.pair_src(), 4, 4)
    probed = insert_probe(art, ProbeSpec("trace", ("top/s",)))
    taken = probed.probes[0].coord
    assert taken in art.placement.reserve
    assert taken not in probed.placement.reserve


def test_probe_reserve_exhaustion():
    art = helpers.build(helpers.pair_src(), 2, 2)
    probed = art
    for _ in art.placement.reserve:
        probed = insert_probe(probed, ProbeSpec("trace", ("top/s",)))
    assert probed.placement.reserve == ()
    with pytest.raises(NoReserveError):
        insert_probe(probed, ProbeSpec("trace", ("top/s",)))


def test_probe_unknown_signal():
    art = helpers.build(helpers.pair_src(), 4, 4)
    with pytest.raises(UnknownSignal):
        insert_probe(art, ProbeSpec("trace", ("top/nope",)))


def test_probed_schedule_still_conflict_free():
    art = helpers.build(helpers.mixed_src(6), 5, 5)
    probed = art
    for sid in ("top/s0", "top/s3", "top/s5"):
        probed = insert_probe(probed, ProbeSpec("trace", (sid,)))
    expand_occupancy(probed.flat, probed.routes, probed.schedule, probed.grid)


def test_trace_probe_non_intrusive():
    art = helpers.build(helpers.pair_src(period=2), 4, 4)
    probed = insert_probe(art, ProbeSpec("trace", ("top/s",)))
    plain_state, _ = helpers.run_cycles(art, 400)
    probe_state, _ = helpers.run_cycles(probed, 400)
    assert filtered(probe_state.trace, probe_paths(probed)) == plain_state.trace
    drop = probe_paths(probed)
    assert dump_sans_probes(plain_state, drop) == dump_sans_probes(probe_state, drop)


def test_trace_probe_sees_every_transfer():
    art = helpers.build(helpers.pair_src(period=2), 4, 4)
    probed = insert_probe(art, ProbeSpec("trace", ("top/s",)))
    state, _ = helpers.run_cycles(probed, 300)
    path = probed.probes[0].path
    observed = state.probe_values[(path, "i")]
    transfers = [(e["cycle"], e["value"])
                 for e in helpers.events(state, kind="transfer", signal="top/s")]
    assert observed == transfers
    assert len(observed) > 50


def test_non_intrusive_over_random_fixtures():
    rng = random.Random(12)
    for _ in range(10):
        src = helpers.random_runnable_src(rng)
        art = helpers.build(src, 5, 5)
        sid = rng.choice([s.id for s in art.flat.signals])
        probed = insert_probe(art, ProbeSpec("trace", (sid,)))
        plain, _ = helpers.run_cycles(art, 600)
        with_probe, _ = helpers.run_cycles(probed, 600)
        assert filtered(with_probe.trace, probe_paths(probed)) == plain.trace


# --- bit error rate ---------------------------------------------------------

def test_ber_equal_streams():
    r = ber([5, 6, 7], [5, 6, 7], 32)
    assert (r.errors, r.total_bits, r.rate) == (0, 96, 0.0)


def test_ber_complement_streams():
    vals = [0, 0, 0, 0]
    comp = [0xFFFF] * 4
    r = ber(comp, vals, 16)
    assert r.rate == 1.0
    assert r.errors == 64


def test_ber_single_flipped_bit():
    ref = [0] * 10
    test = [0] * 9 + [1]
    r = ber(test, ref, 32)
    assert r.errors == 1
    assert r.total_bits == 320
    assert r.rate == 1 / 320


def test_ber_symmetry():
    rng = random.Random(3)
    a = [rng.getrandbits(32) for _ in range(20)]
    b = [rng.getrandbits(32) for _ in range(20)]
    assert ber(a, b, 32) == ber(b, a, 32)


def test_ber_masks_to_width():
    assert ber([0x1FF], [0x0FF], 8).errors == 0
    assert ber([0x1FF], [0x0FF], 16).errors == 1


def ber_design(last_b_value):
    return f"""design berpipe

process emit_a {{
  out o : unsigned(32)
  program {{
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    HALT
  }}
}}

process emit_b {{
  out o : unsigned(32)
  program {{
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    PUT r0, o
    CONST r0, {last_b_value}
    PUT r0, o
    HALT
  }}
}}

process eat {{
  in i : unsigned(32)
  program {{
  loop:
    GET r2, i
    BR loop
  }}
}}

process sys {{
  inst a : emit_a
  inst b : emit_b
  inst ca : eat
  inst cb : eat
  signal sa : unsigned(32) @every 2 sync from a.o to ca.i
  signal sb : unsigned(32) @every 2 sync from b.o to cb.i
}}

top sys
"""


def test_probe_ber_through_fabric():
    art = helpers.build(ber_design(1), 4, 4)
    probed = insert_probe(art, ProbeSpec("ber", ("top/sa", "top/sb")))
    state, _ = helpers.run_cycles(probed, 200)
    r = probe_ber(state, probed.probes[0].path)
    assert (r.errors, r.total_bits) == (1, 320)
    assert r.rate == 1 / 320


def test_probe_ber_zero_through_fabric():
    art = helpers.build(ber_design(0), 4, 4)
    probed = insert_probe(art, ProbeSpec("ber", ("top/sa", "top/sb")))
    state, _ = helpers.run_cycles(probed, 200)
    assert probe_ber(state, probed.probes[0].path).rate == 0.0


def test_ber_probe_type_mismatch():
    src = """design unequal

process p8 {
  out o : unsigned(8)
  program {
  loop:
    PUT r0, o
    BR loop
  }
}

process p16 {
  out o : unsigned(16)
  program {
  loop:
    PUT r0, o
    BR loop
  }
}

process c8 {
  in i : unsigned(8)
  program {
  loop:
    GET r2, i
    BR loop
  }
}

process c16 {
  in i : unsigned(16)
  program {
  loop:
    GET r2, i
    BR loop
  }
}

process sys {
  inst a : p8
  inst b : p16
  inst ca : c8
  inst cb : c16
  signal sa : unsigned(8) @every 2 sync from a.o to ca.i
  signal sb : unsigned(16) @every 2 sync from b.o to cb.i
}

top sys
"""
    art = helpers.build(src, 4, 4)
    with pytest.raises(TypeMismatch):
        insert_probe(art, ProbeSpec("ber", ("top/sa", "top/sb")))


# --- bandwidth assertions ---------------------------------------------------

def synthetic_trace(cycles_fired, sid="top/s"):
    return [json.dumps({"cycle": c, "kind": "transfer", "signal": sid, "value": 0})
            for c in cycles_fired]


def test_bandwidth_pass_and_fail_thresholds():
    """Exactly half the slots fire: floor 0.5 passes, floor 0.51 fails."""
    art = helpers.build(helpers.pair_src(period=4), 3, 3)
    trace = synthetic_trace(range(0, 64, 8))
    ok = check_bandwidth_assertion(trace, "top/s", 0.5, 16, art, total_cycles=64)
    assert ok["ok"] and ok["windows_checked"] == 4
    bad = check_bandwidth_assertion(trace, "top/s", 0.51, 16, art, total_cycles=64)
    assert not bad["ok"]
    assert bad["at_cycle"] == 16
    assert bad["utilization"] == 0.5


def test_bandwidth_fails_at_first_idle_window():
    art = helpers.build(helpers.pair_src(period=4), 3, 3)
    # fires every slot for 32 cycles, then goes quiet
    trace = synthetic_trace(range(0, 32, 4))
    res = check_bandwidth_assertion(trace, "top/s", 0.1, 16, art, total_cycles=64)
    assert not res["ok"]
    assert res["window_start"] == 32
    assert res["at_cycle"] == 48
    assert res["transfers"] == 0


def test_bandwidth_window_must_cover_frame():
    art = helpers.build(helpers.pair_src(period=4), 3, 3)
    with pytest.raises(BadSpec):
        check_bandwidth_assertion([], "top/s", 0.5, 2, art, total_cycles=16)


def test_bandwidth_unknown_signal():
    art = helpers.build(helpers.pair_src(), 3, 3)
    with pytest.raises(UnknownSignal):
        check_bandwidth_assertion([], "top/x", 0.5, 16, art, total_cycles=16)


def test_online_assert_matches_offline_check():
    """The woven assert_bandwidth probe and the trace replay agree."""
    art = helpers.build(helpers.SATURATED_SRC, 4, 4)
    probed = insert_probe(
        art, ProbeSpec("assert_bandwidth", ("top/s",),
                       {"floor": 0.9, "window": 16}))
    state, _ = helpers.run_cycles(probed, 160)
    assert not state.assert_failures
    offline = check_bandwidth_assertion(
        state.trace, "top/s", 0.9, 16, probed, total_cycles=160)
    assert offline["ok"]


def test_online_assert_fires_on_starved_signal():
    # the producer sends twice and then idles forever without halting, so the
    # run keeps going and later windows really are empty
    src = helpers.SATURATED_SRC.replace(
        "  loop:\n    PUT r0, o\n    BR loop",
        "    PUT r0, o\n    PUT r0, o\n  idle:\n    NOP\n    BR idle",
    )
    art = helpers.build(src, 4, 4)
    probed = insert_probe(
        art, ProbeSpec("assert_bandwidth", ("top/s",),
                       {"floor": 0.1, "window": 16}))
    state, _ = helpers.run_cycles(probed, 160)
    path = probed.probes[0].path
    assert state.assert_failures.get(path, 0) >= 1
    fails = helpers.events(state, kind="assert_fail", instance=path)
    offline = check_bandwidth_assertion(
        filtered(state.trace, probe_paths(probed)), "top/s", 0.1, 16, probed,
        total_cycles=160)
    assert not offline["ok"]
    assert fails[0]["cycle"] + 1 == offline["at_cycle"]


def test_probe_report_lists_each_kind():
    art = helpers.build(ber_design(0), 4, 4)
    probed = insert_probe(art, ProbeSpec("ber", ("top/sa", "top/sb")))
    probed = insert_probe(probed, ProbeSpec("trace", ("top/sa",)))
    state, _ = helpers.run_cycles(probed, 120)
    report = probe_report(state)
    kinds = {r["kind"] for r in report}
    assert kinds == {"ber", "trace"}
    ber_entry = next(r for r in report if r["kind"] == "ber")
    assert ber_entry["ber"]["rate"] == 0.0


# --- file transfer ----------------------------------------------------------

def test_value_file_round_trip(tmp_path):
    path = str(tmp_path / "vals.txt")
    values = [0, 1, 65535, 123]
    write_value_file(path, values, U16)
    assert load_value_file(path, U16) == values


def test_value_file_hex_and_comments(tmp_path):
    path = tmp_path / "vals.txt"
    path.write_text("# header\n0x10\n42 # trailing\n\n0xFFFF\n")
    assert load_value_file(str(path), U16) == [16, 42, 65535]


def test_value_file_range_error_names_line(tmp_path):
    path = tmp_path / "vals.txt"
    path.write_text("1\n2\n70000\n")
    with pytest.raises(FileFormatError) as exc:
        load_value_file(str(path), U16)
    assert ":3:" in str(exc.value)
    assert "70000" in str(exc.value)


def test_value_file_garbage_line(tmp_path):
    path = tmp_path / "vals.txt"
    path.write_text("1\nbanana\n")
    with pytest.raises(FileFormatError) as exc:
        load_value_file(str(path), U16)
    assert ":2:" in str(exc.value)


def test_value_file_missing():
    with pytest.raises(MissingFile):
        load_value_file("/no/such/file.txt", U16)


def test_signed_values_round_trip(tmp_path):
    s16 = ValueType("signed", 16, "signed")
    path = str(tmp_path / "vals.txt")
    write_value_file(path, [0xFFFF, 5, 0x8000], s16)
    assert load_value_file(path, s16) == [0xFFFF, 5, 0x8000]
    text = (tmp_path / "vals.txt").read_text()
    assert "-1" in text  # canonical signed rendering


def test_bind_rejects_bad_file_at_bind_time(tmp_path):
    path = tmp_path / "vals.txt"
    path.write_text("99999999999\n")
    art = helpers.build(helpers.IDENTITY_PIPE_SRC, 4, 4)
    with pytest.raises(FileFormatError):
        bind_file(art, "top/a", "input", str(path))


def test_identity_pipeline_round_trip(tmp_path):
    rng = random.Random(17)
    values = [rng.getrandbits(32) for _ in range(300)]
    infile = str(tmp_path / "in.txt")
    outfile = str(tmp_path / "out.txt")
    write_value_file(infile, values, U32)

    art = helpers.build(helpers.IDENTITY_PIPE_SRC, 4, 4)
    art = bind_file(art, "top/a", "input", infile)
    art = bind_file(art, "top/b", "output", outfile)
    state = engine.SystemState(art)
    engine.run(state, max_cycles=5000)
    engine.flush_sinks(state)

    assert load_value_file(outfile, U32) == values
    with open(infile, "rb") as a, open(outfile, "rb") as b:
        assert a.read() == b.read()


def test_empty_input_file_parks_pipeline(tmp_path):
    infile = tmp_path / "in.txt"
    infile.write_text("")
    art = helpers.build(helpers.IDENTITY_PIPE_SRC, 4, 4)
    art = bind_file(art, "top/a", "input", str(infile))
    state, stop = helpers.run_cycles(art, 50)
    assert not helpers.events(state, kind="transfer")
    cp = state.aes["top/cp"]
    # the copier blocked on its first GET and never woke
    assert cp.status == "sleeping_on_get"
    assert cp.sleep_cycles == state.cycle


def test_grid_for_sizes_square():
    from procgrid.netlist import elaborate, parse_design, typecheck

    flat = elaborate(typecheck(parse_design(helpers.mixed_src(10))))
    grid = grid_for(flat)
    usable = grid.rows * grid.cols
    import math

    assert usable - math.ceil(0.05 * usable) >= 20
