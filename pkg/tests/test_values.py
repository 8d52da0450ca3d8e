import random

import pytest

from polydawg.errors import SchemaError, TypeMismatchError
from polydawg.values import (
    INT, REAL, TEXT, check_value, compare, row_sort_key, tag_of,
    values_equal,
)


def test_tag_of():
    assert tag_of(3) == INT
    assert tag_of(3.5) == REAL
    assert tag_of("x") == TEXT
    assert tag_of(None) is None


def test_compare_total_order_within_tag():
    assert compare(1, 2) < 0
    assert compare(2.5, 2.5) == 0
    assert compare("b", "a") > 0


def test_null_sorts_below_everything_and_equals_itself():
    assert compare(None, None) == 0
    assert compare(None, -10) < 0
    assert compare("", None) > 0


def test_cross_tag_comparison_raises():
    with pytest.raises(TypeMismatchError):
        compare(1, "1")
    with pytest.raises(TypeMismatchError):
        compare(1, 1.0)


def test_check_value_widens_int_into_real_columns():
    assert check_value(REAL, 3) == 3.0
    assert isinstance(check_value(REAL, 3), float)
    with pytest.raises(SchemaError):
        check_value(INT, 3.5)
    with pytest.raises(SchemaError):
        check_value(INT, True)
    with pytest.raises(SchemaError):
        check_value(REAL, float("nan"))


def test_values_equal_mixes_null_and_tags():
    assert values_equal(None, None)
    assert not values_equal(None, 0)
    assert values_equal("a", "a")


def test_row_sort_key_is_a_total_order_property():
    rng = random.Random(5)
    pools = ([None, -3, 0, 7], [None, -1.5, 2.25], [None, "a", "zz", ""])
    for _ in range(200):
        rows = [tuple(rng.choice(pool) for pool in pools) for _ in range(20)]
        ordered = sorted(rows, key=row_sort_key)
        assert sorted(ordered, key=row_sort_key) == ordered
        assert sorted(rows, key=row_sort_key) == ordered
