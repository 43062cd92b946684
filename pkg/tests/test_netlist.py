"""Parsing, type checking, elaboration, and the canonical printer."""

import pytest
from hypothesis import given, settings, strategies as st

import helpers
from procgrid.errors import ParseError, TypeCheckFailure
from procgrid.netlist import (
    elaborate,
    export_flat_json,
    parse_design,
    print_design,
    typecheck,
)


def test_parse_basic_shape():
    d = parse_design(helpers.pair_src())
    assert d.name == "pair"
    assert d.top == "sys"
    names = [p.name for p in d.declarations]
    assert names == ["prod", "cons", "sys"]
    sys_decl = d.decls_by_name()["sys"]
    assert [i.name for i in sys_decl.insts] == ["p", "c"]
    sig = sys_decl.signals[0]
    assert (sig.id, sig.mode, sig.period) == ("s", "sync", 4)
    assert sig.source.render() == "p.o"
    assert [e.render() for e in sig.dests] == ["c.i"]


def test_parse_reports_line_numbers():
    src = helpers.pair_src().replace("signal s :", "signal s ;")
    with pytest.raises(ParseError) as exc:
        parse_design(src)
    assert exc.value.line is not None


def test_print_parse_round_trip():
    d = parse_design(helpers.THREE_LEVEL_SRC)
    again = parse_design(print_design(d))
    assert again == d
    # canonical form is a fixpoint
    assert print_design(again) == print_design(d)


def test_typecheck_accepts_fixtures():
    for src in (helpers.pair_src(), helpers.RING3_SRC, helpers.THREE_LEVEL_SRC,
                helpers.IDENTITY_PIPE_SRC):
        typecheck(parse_design(src))


def test_typecheck_width_mismatch():
    src = helpers.pair_src().replace("in i : unsigned(32)", "in i : unsigned(16)")
    with pytest.raises(TypeCheckFailure) as exc:
        typecheck(parse_design(src))
    assert any("does not match" in str(i) for i in exc.value.errors)


def test_typecheck_direction_mismatch():
    src = helpers.pair_src().replace("from p.o to c.i", "from c.i to p.o")
    with pytest.raises(TypeCheckFailure):
        typecheck(parse_design(src))


def test_typecheck_period_must_be_power_of_two():
    src = helpers.pair_src().replace("@every 4", "@every 3")
    with pytest.raises(TypeCheckFailure) as exc:
        typecheck(parse_design(src))
    assert any("power of two" in str(i) for i in exc.value.errors)


def test_typecheck_period_cap():
    src = helpers.pair_src().replace("@every 4", "@every 8192")
    with pytest.raises(TypeCheckFailure):
        typecheck(parse_design(src))


def test_typecheck_unknown_port():
    src = helpers.pair_src().replace("from p.o to c.i", "from p.o to c.nope")
    with pytest.raises(TypeCheckFailure) as exc:
        typecheck(parse_design(src))
    assert any("does not resolve" in str(i) for i in exc.value.errors)


def test_typecheck_rejects_fanin():
    src = helpers.pair_src().replace(
        "  signal s : unsigned(32) @every 4 sync from p.o to c.i",
        "  signal s : unsigned(32) @every 4 sync from p.o to c.i\n"
        "  signal t : unsigned(32) @every 4 sync from p.o to c.i",
    )
    with pytest.raises(TypeCheckFailure) as exc:
        typecheck(parse_design(src))
    assert any("more than one signal" in str(i) for i in exc.value.errors)


def test_typecheck_recursion():
    src = """design loopy

process a {
  in i : unsigned(32)
  inst child : a
  signal s : unsigned(32) @every 2 sync from i to child.i
}

top a
"""
    with pytest.raises(TypeCheckFailure) as exc:
        typecheck(parse_design(src))
    assert any("recursive" in str(i) for i in exc.value.errors)


def test_elaborate_paths_and_prefixes():
    flat = elaborate(typecheck(parse_design(helpers.pair_src())))
    assert [i.path for i in flat.instances] == ["top/c", "top/p"]
    assert [s.id for s in flat.signals] == ["top/s"]
    sig = flat.signals[0]
    assert sig.source.path == "top/p"
    assert sig.dests[0].path == "top/c"


def test_elaborate_three_levels():
    flat = elaborate(typecheck(parse_design(helpers.THREE_LEVEL_SRC)))
    paths = [i.path for i in flat.instances]
    assert "top/s1/w1" in paths and "top/s2/w2" in paths
    assert len(paths) == 6
    # boundary-crossing chains merge into one leaf-to-leaf signal named
    # after the segment that owns the driving leaf
    link = flat.signal("top/s1/tail")
    assert link.source.path == "top/s1/w2"
    assert link.dests[0].path == "top/s2/w1"
    assert flat.signal("top/link") is None
    assert len(flat.signals) == 5
    # hierarchy covers composites and leaves
    kinds = {n.path: n.kind for n in flat.hierarchy}
    assert kinds["top"] == "composite"
    assert kinds["top/s1"] == "composite"
    assert kinds["top/s1/w1"] == "leaf"


def test_elaborate_multipoint():
    src = """design fanout

process prod {
  out o : unsigned(32)
  program {
  loop:
    PUT r0, o
    BR loop
  }
}

process cons {
  in i : unsigned(32)
  program {
  loop:
    GET r2, i
    BR loop
  }
}

process sys {
  inst p : prod
  inst c1 : cons
  inst c2 : cons
  signal s : unsigned(32) @every 4 sync from p.o to c1.i, c2.i
}

top sys
"""
    flat = elaborate(typecheck(parse_design(src)))
    sig = flat.signal("top/s")
    assert sorted(d.path for d in sig.dests) == ["top/c1", "top/c2"]


def test_export_flat_json_round_trips_names():
    import json

    flat = elaborate(typecheck(parse_design(helpers.pair_src())))
    doc = json.loads(export_flat_json(flat))
    assert doc["name"] == "pair"
    assert [i["path"] for i in doc["instances"]] == ["top/c", "top/p"]


@st.composite
def design_sources(draw):
    pairs = draw(st.integers(min_value=1, max_value=3))
    period = draw(st.sampled_from([1, 2, 4, 8]))
    mode = draw(st.sampled_from(["sync", "async"]))
    prod_pad = draw(st.integers(min_value=0, max_value=2))
    cons_pad = draw(st.integers(min_value=0, max_value=2))
    if pairs == 1:
        return helpers.pair_src(period, mode, prod_pad, cons_pad)
    import random

    return helpers.mixed_like(random.Random(draw(st.integers(0, 10_000))), pairs)


@given(design_sources())
@settings(max_examples=40, deadline=None)
def test_canonical_print_is_stable(src):
    d = parse_design(src)
    typecheck(d)
    printed = print_design(d)
    assert parse_design(printed) == d
    assert print_design(parse_design(printed)) == printed
