"""Tagged scalar values.

A value is one of: 64-bit int, finite float, str, or None (null).
Tags are the strings "int", "real", "text". Null carries no tag and
compares less than everything; any other cross-tag comparison is an
error.
"""

import math
from functools import cmp_to_key

from .errors import SchemaError, TypeMismatchError

INT = "int"
REAL = "real"
TEXT = "text"
TAGS = (INT, REAL, TEXT)

_PY_FOR_TAG = {INT: int, REAL: float, TEXT: str}


def tag_of(v):
    """Tag of a non-null value, or None for null."""
    if v is None:
        return None
    if isinstance(v, bool):
        raise SchemaError("bool is not a storable value")
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return REAL
    if isinstance(v, str):
        return TEXT
    raise SchemaError(f"unstorable value of type {type(v).__name__}")


def check_value(tag, v):
    """Validate v against tag (null always allowed); returns v."""
    if tag not in TAGS:
        raise SchemaError(f"unknown tag {tag!r}")
    if v is None:
        return v
    if isinstance(v, bool) or not isinstance(v, _PY_FOR_TAG[tag]):
        # ints are accepted into real columns and widened
        if tag == REAL and isinstance(v, int) and not isinstance(v, bool):
            return float(v)
        raise SchemaError(f"value {v!r} does not match tag {tag!r}")
    if tag == REAL and not math.isfinite(v):
        raise SchemaError("non-finite real values are rejected")
    return v


def compare(a, b):
    """Total order: null < everything; same-tag values use native order.

    Cross-tag comparison between non-null values raises.
    """
    if a is None and b is None:
        return 0
    if a is None:
        return -1
    if b is None:
        return 1
    ta, tb = tag_of(a), tag_of(b)
    if ta != tb:
        raise TypeMismatchError(f"cross-tag comparison: {ta} vs {tb}")
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def compare_rows(ra, rb):
    for a, b in zip(ra, rb):
        c = compare(a, b)
        if c != 0:
            return c
    return len(ra) - len(rb)


row_sort_key = cmp_to_key(compare_rows)


def values_equal(a, b):
    return compare(a, b) == 0


def is_numeric_tag(tag):
    return tag in (INT, REAL)
