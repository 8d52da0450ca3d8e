import random

import pytest

import generators
from polydawg.canonical import (
    CanonicalTable, CIFError, bag_equal, load_cif, parse_cif, save_cif,
    write_cif,
)
from polydawg.errors import SchemaError


def test_schema_conformance_checked_on_construction():
    with pytest.raises(SchemaError):
        CanonicalTable([("a", "int")], [("text",)])
    with pytest.raises(SchemaError):
        CanonicalTable([("a", "int")], [(1, 2)])
    with pytest.raises(SchemaError):
        CanonicalTable([("a", "bogus")], [(1,)])


def test_bag_equal_ignores_order_and_names():
    a = CanonicalTable([("x", "int")], [(1,), (2,), (2,)])
    b = CanonicalTable([("y", "int")], [(2,), (1,), (2,)])
    c = CanonicalTable([("x", "int")], [(1,), (2,)])
    assert bag_equal(a, b)
    assert not bag_equal(a, c)


def test_bag_equal_float_tolerance():
    a = CanonicalTable([("v", "real")], [(1.0,)])
    b = CanonicalTable([("v", "real")], [(1.0 + 1e-12,)])
    assert bag_equal(a, b, rel_tol=1e-9)
    c = CanonicalTable([("v", "real")], [(1.01,)])
    assert not bag_equal(a, c, rel_tol=1e-9)


def test_cif_round_trip_random_tables():
    rng = random.Random(3)
    for _ in range(100):
        table, _ = generators.random_relation(rng)
        again = parse_cif(write_cif(table))
        assert again.schema == table.schema
        assert again.rows == table.rows


def test_cif_quoting_edge_cases():
    table = CanonicalTable(
        [("t", "text"), ("v", "real")],
        [('say "hi"', 1.5), ("comma, colon", -0.25), ("", None)],
    )
    again = parse_cif(write_cif(table))
    assert again.rows == table.rows


def test_cif_errors_carry_line_numbers():
    with pytest.raises(CIFError) as err:
        parse_cif("not a header\n")
    assert "1" in str(err.value)
    with pytest.raises(CIFError) as err:
        parse_cif('#schema:a:int\n"text"\n')
    assert "2" in str(err.value)


def test_save_and_load(tmp_path):
    table = CanonicalTable([("a", "int"), ("b", "text")],
                           [(1, "x"), (None, "y")])
    path = tmp_path / "t.cif"
    save_cif(table, str(path))
    assert bag_equal(load_cif(str(path)), table)
