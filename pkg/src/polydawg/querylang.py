"""The polystore query language: SCOPE blocks, CAST expressions, and one
sub-grammar per island.

Concrete syntax: a scope is ``<island>( ... )``; a cast is
``cast(<scope>, <target-island>[, <alias>][, key=<col-list>])`` and may
stand wherever its target island expects a named object. Keywords are
case-insensitive, identifiers case-sensitive. Degenerate ``raw.*``
scopes carry their body through byte-identically.
"""

from dataclasses import dataclass, field as dc_field

from . import sql
from .errors import QuerySyntaxError, ValidationError
from .values import INT, REAL, TEXT, is_numeric_tag


def _span_field():
    return dc_field(default=None, compare=False, repr=False)


@dataclass
class ObjRef:
    name: str
    span: tuple = _span_field()


@dataclass
class AliasRef:
    name: str  # placeholder of the defining CastNode
    span: tuple = _span_field()


@dataclass
class CastNode:
    inner: object  # ScopeNode
    target_island: str
    alias: object  # user-supplied alias or None
    key: object  # tuple of column names or None
    placeholder: str = ""
    span: tuple = _span_field()


@dataclass
class ScopeNode:
    island: str
    expr: object
    casts: list = dc_field(default_factory=list)
    span: tuple = _span_field()


@dataclass
class QueryAST:
    root: ScopeNode
    text: str = dc_field(default="", compare=False)


@dataclass
class D4mOp:
    op: str  # matmul | ewise | transpose | select
    inputs: list
    params: dict = dc_field(default_factory=dict)
    span: tuple = _span_field()


@dataclass
class TextOp:
    op: str  # scan | grep
    obj: object
    params: dict = dc_field(default_factory=dict)
    span: tuple = _span_field()


@dataclass
class ArrayOp:
    op: str  # subarray | filter | agg
    obj: object
    params: dict = dc_field(default_factory=dict)
    span: tuple = _span_field()


@dataclass
class RawExpr:
    body: str
    span: tuple = _span_field()


ISLAND_SUBGRAMMARS = ("relational", "d4m", "text", "array")
D4M_OPS = ("matmul", "ewise", "transpose", "select")
TEXT_OPS = ("scan", "grep")
ARRAY_OPS = ("subarray", "filter", "agg")
EWISE_OPS = ("plus", "min", "max")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.cur = sql.Cursor(sql.tokenize(text))
        self._cast_counter = 0

    def parse(self):
        root = self.parse_scope()
        if self.cur.peek().kind != "EOF":
            self.cur.fail("unexpected trailing input")
        return QueryAST(root, self.text)

    def _dotted_ident(self, what):
        tok = self.cur.expect_ident(what)
        name = tok.text
        end = tok.end
        while self.cur.at_op(".") and self.cur.peek(1).kind == "IDENT":
            self.cur.next()
            nxt = self.cur.next()
            name += "." + nxt.text
            end = nxt.end
        return name, (tok.start, end)

    def parse_scope(self):
        island, (start, _) = self._dotted_ident("island name")
        self.cur.expect_op("(")
        casts = []
        if island in ISLAND_SUBGRAMMARS:
            expr = self._parse_body(island, casts)
            close = self.cur.expect_op(")")
        elif island.startswith("raw."):
            expr = self._parse_raw()
            close = self.cur.expect_op(")")
        else:
            self.cur.fail(f"unknown island {island!r}",
                          ISLAND_SUBGRAMMARS + ("raw.<engine>",))
        return ScopeNode(island, expr, casts, span=(start, close.end))

    def _parse_raw(self):
        # capture the original text up to the balancing close paren,
        # honoring single- and double-quoted strings
        open_tok = self.cur.peek()
        start = open_tok.start
        depth, i, n = 0, start, len(self.text)
        while i < n:
            ch = self.text[i]
            if ch in "'\"":
                q = ch
                i += 1
                while i < n:
                    if self.text[i] == q:
                        if i + 1 < n and self.text[i + 1] == q:
                            i += 2
                            continue
                        break
                    i += 1
                if i >= n:
                    raise QuerySyntaxError("unterminated string in raw body",
                                           (start, n))
            elif ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    break
                depth -= 1
            i += 1
        if i >= n:
            raise QuerySyntaxError("unbalanced parentheses in raw body",
                                   (start, n))
        body = self.text[start:i]
        while self.cur.peek().kind != "EOF" and self.cur.peek().start < i:
            self.cur.next()
        return RawExpr(body, span=(start, i))

    def _parse_body(self, island, casts):
        if island == "relational":
            return sql.parse_select(
                self.cur, cast_parser=lambda cur: self._parse_cast(casts)
            )
        if island == "d4m":
            return self._parse_d4m(casts)
        if island == "text":
            return self._parse_text(casts)
        return self._parse_array(casts)

    # --- cast -------------------------------------------------------------

    def _parse_cast(self, casts):
        start = self.cur.expect_keyword("cast").start
        self.cur.expect_op("(")
        inner = self.parse_scope()
        self.cur.expect_op(",")
        target, _ = self._dotted_ident("target island")
        alias = None
        key = None
        while self.cur.accept_op(","):
            if self.cur.at_keyword("key"):
                self.cur.next()
                self.cur.expect_op("=")
                cols = [self.cur.expect_ident("key column").text]
                while self.cur.accept_op(","):
                    cols.append(self.cur.expect_ident("key column").text)
                key = tuple(cols)
                break
            if alias is not None:
                self.cur.fail("cast already has an alias")
            alias = self.cur.expect_ident("cast alias").text
        close = self.cur.expect_op(")")
        placeholder = alias or f"__cast{self._cast_counter}"
        self._cast_counter += 1
        node = CastNode(inner, target, alias, key, placeholder,
                        span=(start, close.end))
        casts.append(node)
        return node

    def _operand(self, casts, nested=None):
        """Object name, cast, or (when ``nested`` parses them) a sub-op."""
        tok = self.cur.peek()
        if tok.lower == "cast" and self.cur.peek(1).text == "(":
            node = self._parse_cast(casts)
            return AliasRef(node.placeholder, span=node.span)
        if nested and tok.kind == "IDENT" and tok.lower in nested \
                and self.cur.peek(1).text == "(":
            return self._parse_d4m(casts)
        name = self.cur.expect_ident("object name")
        return ObjRef(name.text, span=(name.start, name.end))

    def _range(self):
        lo = self.cur.peek()
        if lo.kind != "SQSTR":
            self.cur.fail("expected single-quoted range bound", {"SQSTR"})
        self.cur.next()
        self.cur.expect_op(":")
        hi = self.cur.peek()
        if hi.kind != "SQSTR":
            self.cur.fail("expected single-quoted range bound", {"SQSTR"})
        self.cur.next()
        return (sql.unquote(lo), sql.unquote(hi))

    def _rowcol_params(self):
        params = {}
        while self.cur.accept_op(","):
            which = self.cur.expect_ident("rows or cols").lower
            if which not in ("rows", "cols") or which in params:
                self.cur.fail("expected rows=... or cols=...")
            self.cur.expect_op("=")
            params[which] = self._range()
        return params

    # --- d4m ---------------------------------------------------------------

    def _parse_d4m(self, casts):
        tok = self.cur.peek()
        if tok.kind != "IDENT" or tok.lower not in D4M_OPS:
            self.cur.fail("expected a d4m operator", D4M_OPS)
        op = self.cur.next().lower
        start = tok.start
        self.cur.expect_op("(")
        if op == "matmul":
            a = self._operand(casts, D4M_OPS)
            self.cur.expect_op(",")
            b = self._operand(casts, D4M_OPS)
            node = D4mOp("matmul", [a, b])
        elif op == "ewise":
            a = self._operand(casts, D4M_OPS)
            self.cur.expect_op(",")
            b = self._operand(casts, D4M_OPS)
            self.cur.expect_op(",")
            ew = self.cur.expect_ident("elementwise op").lower
            if ew not in EWISE_OPS:
                self.cur.fail("expected plus, min, or max", EWISE_OPS)
            node = D4mOp("ewise", [a, b], {"ewise_op": ew})
        elif op == "transpose":
            a = self._operand(casts, D4M_OPS)
            node = D4mOp("transpose", [a])
        else:
            a = self._operand(casts, D4M_OPS)
            params = self._rowcol_params()
            node = D4mOp("select", [a], params)
        close = self.cur.expect_op(")")
        node.span = (start, close.end)
        return node

    # --- text ---------------------------------------------------------------

    def _parse_text(self, casts):
        tok = self.cur.peek()
        if tok.kind != "IDENT" or tok.lower not in TEXT_OPS:
            self.cur.fail("expected a text operator", TEXT_OPS)
        op = self.cur.next().lower
        self.cur.expect_op("(")
        obj = self._operand(casts)
        if op == "scan":
            params = self._rowcol_params()
        else:
            self.cur.expect_op(",")
            needle = self.cur.peek()
            if needle.kind != "SQSTR":
                self.cur.fail("expected single-quoted substring", {"SQSTR"})
            self.cur.next()
            params = {"needle": sql.unquote(needle)}
        close = self.cur.expect_op(")")
        return TextOp(op, obj, params, span=(tok.start, close.end))

    # --- array ----------------------------------------------------------------

    def _int(self):
        neg = self.cur.accept_op("-")
        tok = self.cur.peek()
        if tok.kind != "INT":
            self.cur.fail("expected integer", {"INT"})
        self.cur.next()
        return -int(tok.text) if neg else int(tok.text)

    def _parse_array(self, casts):
        tok = self.cur.peek()
        if tok.kind != "IDENT" or tok.lower not in ARRAY_OPS:
            self.cur.fail("expected an array operator", ARRAY_OPS)
        op = self.cur.next().lower
        self.cur.expect_op("(")
        if op == "agg":
            fn = self.cur.expect_ident("aggregate function").lower
            if fn not in sql.AGG_FNS:
                self.cur.fail("expected COUNT/SUM/AVG/MIN/MAX", sql.AGG_FNS)
            self.cur.expect_op("(")
            attr = self.cur.expect_ident("attribute name").text
            self.cur.expect_op(")")
            self.cur.expect_op(",")
            obj = self._operand(casts)
            by = []
            if self.cur.accept_op(","):
                self.cur.expect_keyword("by")
                self.cur.expect_op("(")
                if not self.cur.at_op(")"):
                    by.append(self.cur.expect_ident("dimension").text)
                    while self.cur.accept_op(","):
                        by.append(self.cur.expect_ident("dimension").text)
                self.cur.expect_op(")")
            params = {"fn": fn, "attr": attr, "by": tuple(by)}
        elif op == "subarray":
            obj = self._operand(casts)
            ranges = []
            while self.cur.accept_op(","):
                dim = self.cur.expect_ident("dimension").text
                self.cur.expect_op("=")
                lo = self._int()
                self.cur.expect_op(":")
                hi = self._int()
                ranges.append((dim, lo, hi))
            if not ranges:
                self.cur.fail("subarray requires at least one dimension range")
            params = {"ranges": tuple(ranges)}
        else:  # filter
            obj = self._operand(casts)
            self.cur.expect_op(",")
            pred = sql.parse_pred(self.cur)
            params = {"pred": pred}
        close = self.cur.expect_op(")")
        return ArrayOp(op, obj, params, span=(tok.start, close.end))


def parse(text):
    """Parse polystore query text into a QueryAST."""
    return _Parser(text).parse()


# --- pretty printing ---------------------------------------------------------

def _pp_range(rng):
    return f"{sql.quote_sq(rng[0])}:{sql.quote_sq(rng[1])}"


def pp_cast(node):
    parts = [pp_scope(node.inner), node.target_island]
    if node.alias:
        parts.append(node.alias)
    text = "cast(" + ", ".join(parts)
    if node.key:
        text += ", key=" + ",".join(node.key)
    return text + ")"


def _pp_leaf(leaf, scope):
    if isinstance(leaf, ObjRef):
        return leaf.name
    if isinstance(leaf, AliasRef):
        for cast in scope.casts:
            if cast.placeholder == leaf.name:
                return pp_cast(cast)
        raise ValidationError(f"undefined cast alias {leaf.name!r}")
    if isinstance(leaf, D4mOp):
        return _pp_d4m(leaf, scope)
    raise TypeError(f"unexpected leaf {leaf!r}")


def _pp_d4m(node, scope):
    args = [_pp_leaf(x, scope) for x in node.inputs]
    if node.op == "ewise":
        args.append(node.params["ewise_op"])
    if node.op == "select":
        for which in ("rows", "cols"):
            if which in node.params:
                args.append(f"{which}={_pp_range(node.params[which])}")
    return f"{node.op}(" + ", ".join(args) + ")"


def _pp_body(scope):
    expr = scope.expr
    if isinstance(expr, RawExpr):
        return expr.body
    if isinstance(expr, sql.SelectStmt):
        def name_fn(ref):
            if ref.cast is not None:
                return pp_cast(ref.cast)
            return ref.name
        return sql.pp_select(expr, table_name_fn=name_fn)
    if isinstance(expr, D4mOp):
        return _pp_d4m(expr, scope)
    if isinstance(expr, TextOp):
        args = [_pp_leaf(expr.obj, scope)]
        if expr.op == "grep":
            args.append(sql.quote_sq(expr.params["needle"]))
        else:
            for which in ("rows", "cols"):
                if which in expr.params:
                    args.append(f"{which}={_pp_range(expr.params[which])}")
        return f"{expr.op}(" + ", ".join(args) + ")"
    if isinstance(expr, ArrayOp):
        p = expr.params
        if expr.op == "agg":
            args = [f"{p['fn']}({p['attr']})", _pp_leaf(expr.obj, scope)]
            if p["by"]:
                args.append("by(" + ", ".join(p["by"]) + ")")
            elif p["by"] == ():
                args.append("by()")
        elif expr.op == "subarray":
            args = [_pp_leaf(expr.obj, scope)]
            args += [f"{d}={lo}:{hi}" for d, lo, hi in p["ranges"]]
        else:
            args = [_pp_leaf(expr.obj, scope), sql.pp_expr(p["pred"])]
        return f"{expr.op}(" + ", ".join(args) + ")"
    raise TypeError(f"unexpected island expr {expr!r}")


def pp_scope(scope):
    return f"{scope.island}({_pp_body(scope)})"


def pretty_print(ast):
    """Canonical text for an AST; parse(pretty_print(a)) equals a."""
    return pp_scope(ast.root)


# --- constants -----------------------------------------------------------------

def collect_constants(ast):
    """Multiset (list) of literal lexemes appearing anywhere in the query."""
    out = []

    def walk_scope(scope):
        expr = scope.expr
        if isinstance(expr, sql.SelectStmt):
            sql.collect_literals(expr, out)
        elif isinstance(expr, D4mOp):
            walk_d4m(expr)
        elif isinstance(expr, TextOp):
            if expr.op == "grep":
                out.append(sql.quote_sq(expr.params["needle"]))
            else:
                ranges(expr.params)
        elif isinstance(expr, ArrayOp):
            p = expr.params
            if expr.op == "subarray":
                for _, lo, hi in p["ranges"]:
                    out.extend([str(lo), str(hi)])
            elif expr.op == "filter":
                sql.collect_literals(p["pred"], out)
        elif isinstance(expr, RawExpr):
            try:
                for tok in sql.tokenize(expr.body):
                    if tok.kind in ("INT", "REAL"):
                        out.append(tok.text)
                    elif tok.kind in ("SQSTR", "DQSTR"):
                        out.append(sql.quote_sq(sql.unquote(tok)))
            except QuerySyntaxError:
                pass
        for cast in scope.casts:
            walk_scope(cast.inner)

    def ranges(params):
        for which in ("rows", "cols"):
            if which in params:
                lo, hi = params[which]
                out.extend([sql.quote_sq(lo), sql.quote_sq(hi)])

    def walk_d4m(node):
        if node.op == "select":
            ranges(node.params)
        for child in node.inputs:
            if isinstance(child, D4mOp):
                walk_d4m(child)

    walk_scope(ast.root)
    return out


# --- validation ------------------------------------------------------------------

@dataclass
class LeafInfo:
    kind: str  # 'object' or 'cast'
    model: str
    schema: object  # list or None when statically unknown
    engine: object = None  # engine id for objects
    name: object = None  # object name or cast placeholder
    cast: object = None  # defining CastNode for kind='cast'


@dataclass
class ScopeInfo:
    island: str
    model: str
    schema: object  # output schema or None


class ResolvedQuery:
    """A validated AST plus per-leaf and per-scope annotations."""

    def __init__(self, ast, registry, catalog):
        self.ast = ast
        self.registry = registry
        self.catalog = catalog
        self.leaves = {}  # id(node) -> LeafInfo
        self.scopes = {}  # id(scope) -> ScopeInfo

    def leaf(self, node):
        return self.leaves[id(node)]

    def scope_info(self, scope):
        return self.scopes[id(scope)]


def _triple_val_tag(schema):
    return schema[2][1]


def validate(ast, registry, catalog):
    """Resolve every leaf and check operators against island surfaces."""
    res = ResolvedQuery(ast, registry, catalog)
    _validate_scope(ast.root, res)
    return res


def _resolve_object(name, island, res, span_owner):
    engine_id = res.catalog.owner(name)
    if engine_id is None:
        raise ValidationError(f"unknown object {name!r}")
    if engine_id not in island.members:
        raise ValidationError(
            f"object {name!r} lives on engine {engine_id!r}, not a member "
            f"of island {island.name!r}; cast it in"
        )
    engine = res.catalog.engine(engine_id)
    model = engine.model
    # schema from metadata, without materializing rows
    if model == "relational":
        schema = engine.schema_of(name)
    elif model == "keyvalue":
        arr = engine.array(name)
        schema = [("row", TEXT), ("col", TEXT), ("val", arr.val_tag)]
    else:
        schema = engine.array(name).export_schema()
    info = LeafInfo("object", model, schema, engine=engine_id, name=name)
    res.leaves[id(span_owner)] = info
    return info


def _cast_output(inner_info, cast, res):
    """Model and schema of a cast result."""
    target_island = res.registry.island(cast.target_island)
    tmodel = target_island.model
    smodel = inner_info.model
    sschema = inner_info.schema
    if smodel == tmodel:
        return tmodel, sschema
    if sschema is None:
        return tmodel, None
    if smodel == "relational" and tmodel == "keyvalue":
        if not cast.key:
            raise ValidationError(
                "cast from relational to an associative model requires key=..."
            )
        names = [n for n, _ in sschema]
        for k in cast.key:
            if k not in names:
                raise ValidationError(f"cast key column {k!r} not in {names}")
        if names == ["r", "c", "v"] and tuple(cast.key) == ("r",):
            return tmodel, [("row", TEXT), ("col", TEXT), ("val", sschema[2][1])]
        attr_tags = {t for n, t in sschema if n not in cast.key}
        if len(attr_tags) != 1:
            raise ValidationError("cast non-key columns must share one tag")
        return tmodel, [("row", TEXT), ("col", TEXT), ("val", attr_tags.pop())]
    if smodel == "keyvalue" and tmodel == "relational":
        return tmodel, [("r", TEXT), ("c", TEXT), ("v", _triple_val_tag(sschema))]
    if smodel == "array" and tmodel == "relational":
        return tmodel, list(sschema)
    if smodel == "array" and tmodel == "keyvalue":
        if len(sschema) != 3:
            raise ValidationError(
                "cast from array to associative needs 2 dims and 1 attribute"
            )
        return tmodel, [("row", TEXT), ("col", TEXT), ("val", sschema[2][1])]
    if smodel == "keyvalue" and tmodel == "array":
        return tmodel, [("r", INT), ("c", INT), ("v", _triple_val_tag(sschema))]
    if smodel == "relational" and tmodel == "array":
        if not cast.key:
            raise ValidationError(
                "cast from relational to array routes through the associative "
                "model and requires key=..."
            )
        _, kv_schema = _cast_output(
            inner_info, CastNode(cast.inner, "d4m", cast.alias, cast.key,
                                 cast.placeholder), res
        )
        return tmodel, [("r", INT), ("c", INT), ("v", kv_schema[2][1])]
    raise ValidationError(f"unsupported cast {smodel} -> {tmodel}")


def _resolve_cast(cast, enclosing_island, res):
    inner_scope_info = _validate_scope(cast.inner, res)
    target = res.registry.island(cast.target_island)
    if target is None:
        raise ValidationError(f"unknown island {cast.target_island!r}")
    inner_info = LeafInfo(
        "scope", inner_scope_info.model, inner_scope_info.schema
    )
    model, schema = _cast_output(inner_info, cast, res)
    if model != enclosing_island.model:
        raise ValidationError(
            f"cast to island {cast.target_island!r} (model {model}) used "
            f"inside island {enclosing_island.name!r} "
            f"(model {enclosing_island.model})"
        )
    info = LeafInfo("cast", model, schema, name=cast.placeholder, cast=cast)
    res.leaves[id(cast)] = info
    return info


def _check_op(island, op):
    if op not in island.operators:
        raise ValidationError(
            f"operator {op!r} is not in island {island.name!r} "
            f"(operators: {sorted(island.operators)})"
        )


def _d4m_leaf_check(info):
    """Residency encodings for associative data on each engine."""
    if info.kind != "object":
        return
    if info.model == "relational":
        names = [n for n, _ in info.schema]
        if names != ["r", "c", "v"] or info.schema[0][1] != TEXT \
                or info.schema[1][1] != TEXT:
            raise ValidationError(
                f"object {info.name!r} on the relational engine must be "
                "triple-encoded as (r:text, c:text, v)"
            )
    elif info.model == "array":
        if len(info.schema) != 3:
            raise ValidationError(
                f"object {info.name!r} on the array engine must have 2 "
                "dimensions and 1 attribute to act as an associative array"
            )


def _validate_leaf(leaf, island, scope, res):
    if isinstance(leaf, ObjRef):
        return _resolve_object(leaf.name, island, res, leaf)
    if isinstance(leaf, AliasRef):
        defs = [c for c in scope.casts if c.placeholder == leaf.name]
        if len(defs) != 1:
            raise ValidationError(f"cast alias {leaf.name!r} not uniquely defined")
        info = res.leaves[id(defs[0])]
        res.leaves[id(leaf)] = info
        return info
    raise ValidationError(f"unexpected leaf {leaf!r}")


def _validate_scope(scope, res):
    island = res.registry.island(scope.island)
    if island is None:
        raise ValidationError(f"unknown island {scope.island!r}")
    expr = scope.expr
    for cast in scope.casts:
        _resolve_cast(cast, island, res)

    if isinstance(expr, RawExpr):
        _check_op(island, "native-passthrough")
        info = ScopeInfo(scope.island, island.model, None)
    elif isinstance(expr, sql.SelectStmt):
        _check_op(island, "select")
        table_schemas = {}
        for ref in expr.table_refs():
            if ref.cast is not None:
                info_ = res.leaves[id(ref.cast)]
                res.leaves[id(ref)] = info_
            else:
                info_ = _resolve_object(ref.name, island, res, ref)
            if info_.schema is None:
                raise ValidationError(
                    "a raw scope result cannot be used as a typed table; "
                    "cast it through a concrete island"
                )
            table_schemas[ref.binding] = info_.schema
        from .engines.relational import infer_select_schema
        from .errors import CatalogError, SchemaError, TypeMismatchError
        try:
            out_schema = infer_select_schema(expr, table_schemas)
        except (CatalogError, SchemaError, TypeMismatchError) as e:
            raise ValidationError(str(e)) from e
        info = ScopeInfo(scope.island, island.model, out_schema)
    elif isinstance(expr, D4mOp):
        val_tag = _validate_d4m(expr, island, scope, res)
        info = ScopeInfo(scope.island, island.model,
                         [("row", TEXT), ("col", TEXT), ("val", val_tag)])
    elif isinstance(expr, TextOp):
        _check_op(island, expr.op)
        linfo = _validate_leaf(expr.obj, island, scope, res)
        if linfo.model != island.model:
            raise ValidationError(
                f"text island operates on associative data, got {linfo.model}"
            )
        info = ScopeInfo(scope.island, island.model, list(linfo.schema))
    elif isinstance(expr, ArrayOp):
        _check_op(island, expr.op)
        linfo = _validate_leaf(expr.obj, island, scope, res)
        if linfo.model != island.model:
            raise ValidationError(
                f"array island operates on array data, got {linfo.model}"
            )
        schema = _array_op_schema(expr, linfo)
        info = ScopeInfo(scope.island, island.model, schema)
    else:
        raise ValidationError(f"unsupported island expression {expr!r}")
    res.scopes[id(scope)] = info
    return info


def _validate_d4m(node, island, scope, res):
    _check_op(island, node.op)
    tags = []
    for child in node.inputs:
        if isinstance(child, D4mOp):
            tags.append(_validate_d4m(child, island, scope, res))
        else:
            info = _validate_leaf(child, island, scope, res)
            _d4m_leaf_check(info)
            tags.append(_triple_val_tag(info.schema))
    if node.op in ("matmul", "ewise"):
        for t in tags:
            if not is_numeric_tag(t):
                raise ValidationError(f"{node.op} requires numeric values")
        return tags[0] if tags[0] == tags[1] else REAL
    return tags[0]


def _array_op_schema(expr, linfo):
    schema = linfo.schema
    names = [n for n, _ in schema]
    p = expr.params
    if expr.op == "subarray":
        for d, lo, hi in p["ranges"]:
            if d not in names:
                raise ValidationError(f"unknown dimension {d!r}")
            if lo < 0 or hi < lo:
                raise ValidationError(f"bad range {lo}:{hi} for {d!r}")
        return list(schema)
    if expr.op == "filter":
        return list(schema)
    fn, attr, by = p["fn"], p["attr"], p["by"]
    if attr not in names:
        raise ValidationError(f"unknown attribute {attr!r}")
    atag = schema[names.index(attr)][1]
    if fn in ("sum", "avg") and atag == TEXT:
        raise ValidationError(f"{fn.upper()} over text attribute")
    for d in by:
        if d not in names:
            raise ValidationError(f"unknown dimension {d!r}")
    out_tag = {"count": INT, "avg": REAL}.get(fn, atag)
    return [(d, INT) for d in by] + [(fn, out_tag)]
