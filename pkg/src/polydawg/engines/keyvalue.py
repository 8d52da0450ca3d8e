"""Key-value engine over the associative-array data model.

Objects are maps from (row-key, col-key) string pairs to values, kept
in row-major lexicographic order. The native language covers range
scans, value grep, and the D4M-style semiring matmul / elementwise ops.
"""

from dataclasses import dataclass, field

from .. import sql
from ..canonical import CanonicalTable
from ..errors import NativeSyntaxError, QuerySyntaxError, SchemaError, TypeMismatchError
from ..values import INT, REAL, TEXT, is_numeric_tag, tag_of
from .base import Engine

SEMIRINGS = {
    "plus.times": (lambda a, b: a + b, lambda a, b: a * b),
    "min.plus": (min, lambda a, b: a + b),
    "max.times": (max, lambda a, b: a * b),
}


@dataclass
class AssociativeArray:
    name: str
    entries: dict  # (row-key, col-key) -> value
    val_tag: str = REAL

    def sorted_entries(self):
        return sorted(self.entries.items())


def entries_to_table(entries, val_tag):
    rows = [(r, c, v) for (r, c), v in sorted(entries.items())]
    return CanonicalTable(
        [("row", TEXT), ("col", TEXT), ("val", val_tag)], rows
    )


def _require_numeric(arr, opname):
    if not is_numeric_tag(arr.val_tag):
        raise TypeMismatchError(
            f"{opname} requires numeric values, {arr.name!r} holds {arr.val_tag}"
        )


def assoc_matmul(a_entries, b_entries, semiring="plus.times"):
    """C(r,c) = oplus_k A(r,k) otimes B(k,c) over keys present in both."""
    try:
        oplus, otimes = SEMIRINGS[semiring]
    except KeyError:
        raise SchemaError(f"unknown semiring {semiring!r}") from None
    a_rows = {}
    for (r, k), v in a_entries.items():
        if tag_of(v) == TEXT or v is None:
            raise TypeMismatchError("non-numeric value in matmul operand")
        a_rows.setdefault(r, {})[k] = v
    b_rows = {}
    for (k, c), v in b_entries.items():
        if tag_of(v) == TEXT or v is None:
            raise TypeMismatchError("non-numeric value in matmul operand")
        b_rows.setdefault(k, {})[c] = v
    out = {}
    for r, arow in a_rows.items():
        acc = {}
        for k, av in arow.items():
            for c, bv in b_rows.get(k, {}).items():
                term = otimes(av, bv)
                acc[c] = term if c not in acc else oplus(acc[c], term)
        for c, v in acc.items():
            out[(r, c)] = v
    return out


def assoc_ewise(a_entries, b_entries, op="plus"):
    """Union of key sets; the op applies on overlap, copies elsewhere."""
    fns = {"plus": lambda a, b: a + b, "min": min, "max": max}
    try:
        fn = fns[op]
    except KeyError:
        raise SchemaError(f"unknown elementwise op {op!r}") from None
    out = dict(a_entries)
    for key, bv in b_entries.items():
        if key in out:
            av = out[key]
            if tag_of(av) == TEXT or tag_of(bv) == TEXT:
                raise TypeMismatchError("non-numeric value on overlapping key")
            out[key] = fn(av, bv)
        else:
            out[key] = bv
    return out


def _result_tag(a_tag, b_tag):
    if a_tag == b_tag:
        return a_tag
    if is_numeric_tag(a_tag) and is_numeric_tag(b_tag):
        return REAL
    raise TypeMismatchError(f"mixed value tags {a_tag}/{b_tag}")


class KeyValueEngine(Engine):
    model = "keyvalue"

    def _build(self, name, table, options):
        names = table.column_names
        tags = table.tags
        if len(names) != 3 or tags[0] != TEXT or tags[1] != TEXT:
            raise SchemaError(
                "keyvalue load expects schema (row:text, col:text, val:any)"
            )
        if names != ["row", "col", "val"]:
            raise SchemaError(
                f"keyvalue load expects columns (row, col, val), got {names}"
            )
        entries = {}
        for r, c, v in table.rows:
            if not r or not c:
                raise SchemaError("row/col keys must be non-empty strings")
            if v is None:
                raise SchemaError("associative arrays cannot store null values")
            if (r, c) in entries:
                raise SchemaError(f"duplicate entry for ({r!r}, {c!r})")
            entries[(r, c)] = v
        return AssociativeArray(name, entries, tags[2])

    def object_meta(self, name):
        arr = self._get(name)
        return {"val_tag": arr.val_tag, "entries": len(arr.entries)}

    def export(self, name):
        arr = self._get(name)
        return entries_to_table(arr.entries, arr.val_tag)

    def array(self, name):
        return self._get(name)

    def store_result(self, name, entries, val_tag):
        with self._write_lock:
            if self.has(name):
                raise SchemaError(f"object {name!r} already exists")
            self._objects[name] = AssociativeArray(name, dict(entries), val_tag)

    def execute_native(self, query):
        try:
            cur = sql.Cursor(sql.tokenize(query))
        except QuerySyntaxError as e:
            raise NativeSyntaxError(f"keyvalue parse error: {e}") from e
        try:
            return self._run(cur)
        except QuerySyntaxError as e:
            raise NativeSyntaxError(f"keyvalue parse error: {e}") from e

    def _run(self, cur):
        verb = cur.expect_ident("command").lower
        if verb == "scan":
            return self._scan(cur)
        if verb == "grep":
            return self._grep(cur)
        if verb == "matmul":
            return self._matmul(cur)
        if verb == "ewise":
            return self._ewise(cur)
        cur.fail("expected SCAN, GREP, MATMUL, or EWISE")

    def _range(self, cur):
        lo_tok = cur.peek()
        if lo_tok.kind != "DQSTR":
            cur.fail("expected double-quoted range bound", {"DQSTR"})
        cur.next()
        cur.expect_op(":")
        hi_tok = cur.peek()
        if hi_tok.kind != "DQSTR":
            cur.fail("expected double-quoted range bound", {"DQSTR"})
        cur.next()
        return sql.unquote(lo_tok), sql.unquote(hi_tok)

    def _finish(self, cur):
        if cur.peek().kind != "EOF":
            cur.fail("unexpected trailing input")

    def _scan(self, cur):
        arr = self._get(cur.expect_ident("object name").text)
        row_rng = col_rng = None
        while cur.peek().kind == "IDENT":
            word = cur.next().lower
            if word == "rows":
                row_rng = self._range(cur)
            elif word == "cols":
                col_rng = self._range(cur)
            else:
                cur.fail("expected ROWS or COLS")
        self._finish(cur)
        hit = {
            (r, c): v
            for (r, c), v in arr.entries.items()
            if (row_rng is None or row_rng[0] <= r <= row_rng[1])
            and (col_rng is None or col_rng[0] <= c <= col_rng[1])
        }
        return entries_to_table(hit, arr.val_tag)

    def _grep(self, cur):
        arr = self._get(cur.expect_ident("object name").text)
        tok = cur.peek()
        if tok.kind != "DQSTR":
            cur.fail("expected double-quoted substring", {"DQSTR"})
        cur.next()
        self._finish(cur)
        needle = sql.unquote(tok)
        hit = {
            k: v for k, v in arr.entries.items()
            if isinstance(v, str) and needle in v
        }
        return entries_to_table(hit, arr.val_tag)

    def _dotted(self, cur):
        parts = [cur.expect_ident().text]
        while cur.accept_op("."):
            parts.append(cur.expect_ident().text)
        return ".".join(parts)

    def _matmul(self, cur):
        a = self._get(cur.expect_ident("object name").text)
        b = self._get(cur.expect_ident("object name").text)
        semiring = "plus.times"
        if cur.accept_keyword("semiring"):
            semiring = self._dotted(cur).lower()
        self._finish(cur)
        _require_numeric(a, "MATMUL")
        _require_numeric(b, "MATMUL")
        out = assoc_matmul(a.entries, b.entries, semiring)
        return entries_to_table(out, _result_tag(a.val_tag, b.val_tag))

    def _ewise(self, cur):
        a = self._get(cur.expect_ident("object name").text)
        b = self._get(cur.expect_ident("object name").text)
        op = cur.expect_ident("elementwise op (plus/min/max)").lower
        self._finish(cur)
        _require_numeric(a, "EWISE")
        _require_numeric(b, "EWISE")
        out = assoc_ewise(a.entries, b.entries, op)
        return entries_to_table(out, _result_tag(a.val_tag, b.val_tag))
