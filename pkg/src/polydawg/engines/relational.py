"""Embedded relational engine with a small SQL dialect.

SELECT/JOIN/WHERE/GROUP BY/ORDER BY/LIMIT over bag-typed relations.
ORDER BY ties are broken by full-tuple lexicographic order so results
are deterministic.
"""

from dataclasses import dataclass, field

from .. import sql
from ..canonical import CanonicalTable
from ..errors import (
    CatalogError, NativeSyntaxError, QuerySyntaxError, SchemaError,
    TypeMismatchError,
)
from ..values import INT, REAL, TEXT, compare, row_sort_key, values_equal
from .base import Engine


@dataclass
class Relation:
    name: str
    schema: list
    key: object  # tuple of column names or None
    rows: list = field(default_factory=list)


class RelationalEngine(Engine):
    model = "relational"

    def _build(self, name, table, options):
        key = options.get("key")
        if key:
            key = tuple(key)
            idx = [table.column_index(k) for k in key]
            seen = set()
            for row in table.rows:
                proj = tuple(row[i] for i in idx)
                if any(v is None for v in proj):
                    raise SchemaError(f"null in key column of {name!r}")
                if proj in seen:
                    raise SchemaError(f"duplicate key {proj!r} in {name!r}")
                seen.add(proj)
        else:
            key = None
        return Relation(name, list(table.schema), key, list(table.rows))

    def object_meta(self, name):
        rel = self._get(name)
        return {"schema": list(rel.schema), "key": list(rel.key or []),
                "rows": len(rel.rows)}

    def load_options_for(self, name):
        rel = self._get(name)
        return {"key": list(rel.key)} if rel.key else {}

    def export(self, name):
        rel = self._get(name)
        return CanonicalTable(list(rel.schema), list(rel.rows))

    def schema_of(self, name):
        return list(self._get(name).schema)

    def execute_native(self, query):
        try:
            stmt = sql.parse_select_text(query)
        except QuerySyntaxError as e:
            raise NativeSyntaxError(f"relational parse error: {e}") from e
        tables = {}
        for ref in stmt.table_refs():
            tables[ref.binding] = self._get(ref.name)
        return evaluate_select(stmt, {b: (t.schema, t.rows)
                                      for b, t in tables.items()})


# --- reference SELECT evaluation over (schema, rows) pairs -----------------

class _Scope:
    """Column resolution over the concatenated row of all table refs."""

    def __init__(self, stmt, tables):
        self.columns = []  # (binding, name, tag)
        self.offsets = {}
        off = 0
        for ref in stmt.table_refs():
            schema, _ = tables[ref.binding]
            self.offsets[ref.binding] = off
            for name, tag in schema:
                self.columns.append((ref.binding, name, tag))
            off += len(schema)

    def resolve(self, col):
        hits = [
            i for i, (b, n, _) in enumerate(self.columns)
            if n == col.name and (col.qual is None or col.qual == b)
        ]
        if not hits:
            raise CatalogError(f"unknown column {sql.pp_expr(col)!r}")
        if len(hits) > 1:
            raise SchemaError(f"ambiguous column {sql.pp_expr(col)!r}")
        return hits[0]

    def tag_at(self, i):
        return self.columns[i][2]


def _infer_tag(expr, scope):
    if isinstance(expr, sql.Col):
        return scope.tag_at(scope.resolve(expr))
    if isinstance(expr, sql.Lit):
        return expr.tag
    if isinstance(expr, sql.Bin):
        lt = _infer_tag(expr.left, scope)
        rt = _infer_tag(expr.right, scope)
        if TEXT in (lt, rt):
            raise TypeMismatchError(f"arithmetic over text: {sql.pp_expr(expr)}")
        if expr.op == "/":
            return REAL
        return INT if lt == rt == INT else REAL
    if isinstance(expr, sql.Agg):
        if expr.fn == "count":
            return INT
        arg = _infer_tag(expr.arg, scope)
        if expr.fn == "avg":
            if arg == TEXT:
                raise TypeMismatchError("AVG over text")
            return REAL
        if expr.fn == "sum":
            if arg == TEXT:
                raise TypeMismatchError("SUM over text")
            return arg
        return arg  # min/max keep the tag
    raise TypeMismatchError(f"not a value expression: {sql.pp_expr(expr)}")


def _eval_scalar(expr, row, scope):
    if isinstance(expr, sql.Col):
        return row[scope.resolve(expr)]
    if isinstance(expr, sql.Lit):
        return expr.value
    if isinstance(expr, sql.Bin):
        a = _eval_scalar(expr.left, row, scope)
        b = _eval_scalar(expr.right, row, scope)
        _infer_tag(expr, scope)  # rejects text operands even on null rows
        if a is None or b is None:
            return None
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if b == 0:
            raise TypeMismatchError("division by zero")
        return a / b
    if isinstance(expr, sql.Agg):
        raise SchemaError("aggregate used outside a grouping context")
    raise TypeMismatchError(f"not a value expression: {sql.pp_expr(expr)}")


def _eval_pred(pred, row, scope):
    if isinstance(pred, sql.Cmp):
        a = _eval_scalar(pred.left, row, scope)
        b = _eval_scalar(pred.right, row, scope)
        c = compare(a, b)
        return {
            "=": c == 0, "!=": c != 0, "<": c < 0, "<=": c <= 0,
            ">": c > 0, ">=": c >= 0,
        }[pred.op]
    if isinstance(pred, sql.Logic):
        if pred.op == "and":
            return _eval_pred(pred.left, row, scope) and _eval_pred(pred.right, row, scope)
        return _eval_pred(pred.left, row, scope) or _eval_pred(pred.right, row, scope)
    if isinstance(pred, sql.Not):
        return not _eval_pred(pred.expr, row, scope)
    raise TypeMismatchError("WHERE requires a predicate")


def _aggregate(agg, rows, scope):
    if agg.fn == "count" and agg.arg is None:
        return len(rows)
    vals = [_eval_scalar(agg.arg, r, scope) for r in rows]
    vals = [v for v in vals if v is not None]
    _infer_tag(agg, scope)
    if agg.fn == "count":
        return len(vals)
    if not vals:
        return None
    if agg.fn == "sum":
        return sum(vals)
    if agg.fn == "avg":
        return sum(vals) / len(vals)
    if agg.fn == "min":
        return min(vals)
    return max(vals)


def _has_agg(expr):
    if isinstance(expr, sql.Agg):
        return True
    if isinstance(expr, sql.Bin):
        return _has_agg(expr.left) or _has_agg(expr.right)
    return False


def _derived_name(expr):
    if isinstance(expr, sql.Col):
        return expr.name
    if isinstance(expr, sql.Agg):
        return expr.fn
    return "expr"


def infer_select_schema(stmt, table_schemas):
    """Output schema of a SELECT given ``binding -> schema``, with the
    same grouping checks evaluation applies."""
    scope = _Scope(stmt, {b: (s, []) for b, s in table_schemas.items()})
    if stmt.join:
        _, lcol, rcol = stmt.join
        scope.resolve(lcol)
        scope.resolve(rcol)
    grouped = bool(stmt.group_by) or any(
        _has_agg(it.expr) for it in (stmt.items or [])
    )
    if grouped:
        if stmt.items is None:
            raise SchemaError("SELECT * cannot be combined with grouping")
        gidx = [scope.resolve(c) for c in stmt.group_by]
        out = []
        for it in stmt.items:
            name = it.alias or _derived_name(it.expr)
            if _has_agg(it.expr):
                if not isinstance(it.expr, sql.Agg):
                    raise SchemaError("aggregates cannot be nested in arithmetic")
            elif not isinstance(it.expr, sql.Col) or scope.resolve(it.expr) not in gidx:
                raise SchemaError(
                    f"non-aggregate select item {sql.pp_expr(it.expr)!r} "
                    "is not in GROUP BY"
                )
            out.append((name, _infer_tag(it.expr, scope)))
        return out
    if stmt.items is None:
        return [(n, t) for (_, n, t) in scope.columns]
    return [
        (it.alias or _derived_name(it.expr), _infer_tag(it.expr, scope))
        for it in stmt.items
    ]


def evaluate_select(stmt, tables):
    """Evaluate a SELECT over ``tables``: binding -> (schema, rows)."""
    for ref in stmt.table_refs():
        if ref.binding not in tables:
            raise CatalogError(f"unknown table {ref.binding!r}")
    scope = _Scope(stmt, tables)

    _, rows = tables[stmt.table.binding]
    joined = [tuple(r) for r in rows]
    if stmt.join:
        jref, lcol, rcol = stmt.join
        li, ri_abs = scope.resolve(lcol), scope.resolve(rcol)
        _, jrows = tables[jref.binding]
        out = []
        for left in joined:
            for right in jrows:
                combo = left + tuple(right)
                if values_equal(combo[li], combo[ri_abs]):
                    out.append(combo)
        joined = out

    if stmt.where is not None:
        joined = [r for r in joined if _eval_pred(stmt.where, r, scope)]

    grouped = bool(stmt.group_by) or any(
        _has_agg(it.expr) for it in (stmt.items or [])
    )
    if grouped:
        if stmt.items is None:
            raise SchemaError("SELECT * cannot be combined with grouping")
        gidx = [scope.resolve(c) for c in stmt.group_by]
        if stmt.group_by:
            groups = {}
            for r in joined:
                groups.setdefault(tuple(r[i] for i in gidx), []).append(r)
        else:
            groups = {(): joined}
        out_schema, out_rows = [], []
        for it in stmt.items:
            name = it.alias or _derived_name(it.expr)
            if _has_agg(it.expr):
                if not isinstance(it.expr, sql.Agg):
                    raise SchemaError("aggregates cannot be nested in arithmetic")
                out_schema.append((name, _infer_tag(it.expr, scope)))
            else:
                if not isinstance(it.expr, sql.Col) or scope.resolve(it.expr) not in gidx:
                    raise SchemaError(
                        f"non-aggregate select item {sql.pp_expr(it.expr)!r} "
                        "is not in GROUP BY"
                    )
                out_schema.append((name, _infer_tag(it.expr, scope)))
        for gkey in groups:
            grows = groups[gkey]
            row = []
            for it in stmt.items:
                if isinstance(it.expr, sql.Agg):
                    row.append(_aggregate(it.expr, grows, scope))
                else:
                    row.append(gkey[gidx.index(scope.resolve(it.expr))])
            out_rows.append(tuple(row))
    elif stmt.items is None:
        out_schema = [(n, t) for (_, n, t) in scope.columns]
        out_rows = joined
    else:
        out_schema = [
            (it.alias or _derived_name(it.expr), _infer_tag(it.expr, scope))
            for it in stmt.items
        ]
        out_rows = [
            tuple(_eval_scalar(it.expr, r, scope) for it in stmt.items)
            for r in joined
        ]

    if stmt.order_by:
        names = [n for n, _ in out_schema]
        keys = []
        for c in stmt.order_by:
            if c.qual is None and c.name in names:
                keys.append(names.index(c.name))
            else:
                raise CatalogError(
                    f"ORDER BY column {sql.pp_expr(c)!r} not in output"
                )
        out_rows = sorted(
            out_rows,
            key=lambda r: (row_sort_key(tuple(r[i] for i in keys)),
                           row_sort_key(r)),
        )
    if stmt.limit is not None:
        if not stmt.order_by:
            out_rows = sorted(out_rows, key=row_sort_key)
        out_rows = out_rows[: stmt.limit]
    return CanonicalTable(out_schema, out_rows)
