"""Decompose validated queries into single-engine containers plus a
cross-engine remainder, fingerprint them, and enumerate candidate plans.

Containers are the maximal sub-trees whose leaves live on one engine and
whose operators that engine's shims cover; everything else lands in the
remainder. Each remainder node that an engine must execute gets a site
assignment during enumeration; minimal Migrate steps move inputs to the
site. Plan ids hash the constant-normalized step list so a query and its
literal variants share plan identities.
"""

import hashlib
from dataclasses import dataclass, field
from itertools import product

from . import sql
from .errors import PlanningError
from .migrator import ARRAY, CastSpec, KEYVALUE, RELATIONAL, chain_for
from .querylang import (
    AliasRef, ArrayOp, CastNode, D4mOp, ObjRef, RawExpr, ScopeNode, TextOp,
    collect_constants,
)
from .values import REAL, TEXT

EMPTY_REMAINDER_SENTINEL = "empty-remainder"


def _sha(text):
    return hashlib.sha256(text.encode()).hexdigest()


def normalize_native(text):
    """Native query text with every literal replaced by '?'."""
    out = []
    for tok in sql.tokenize(text):
        if tok.kind in ("INT", "REAL", "SQSTR", "DQSTR"):
            out.append("?")
        elif tok.kind != "EOF":
            out.append(tok.text)
    return " ".join(out)


@dataclass
class Container:
    engine_id: str
    query: str
    schema: object
    alias: str
    out_model: str
    source_leaf: object = None  # object name when this is a pure leaf fetch
    meta: dict = field(default_factory=dict)

    @property
    def id(self):
        return _sha(f"{self.engine_id}\x00{self.query}")[:16]

    @property
    def norm(self):
        return f"{self.engine_id}:{normalize_native(self.query)}"


@dataclass
class RNode:
    alias: str
    kind: str  # 'cast' | 'select' | 'matmul' | 'ewise' | 'transpose' | ...
    island: object  # island owning the shim, None for cast
    expr: object  # island operator expression (None for cast)
    inputs: list  # input aliases in leaf order
    leaf_aliases: dict  # id(leaf node) -> input alias
    out_model: str
    schema: object
    params: dict = field(default_factory=dict)  # cast: spec info

    def norm(self):
        if self.kind == "cast":
            spec = self.params
            return (f"cast[{spec['source_model']}->{spec['target_model']}"
                    f",key={spec.get('key')}]({','.join(self.inputs)})")
        alias_of = {nid: a for nid, a in self.leaf_aliases.items()}

        def binding(leaf):
            return alias_of.get(id(leaf), "?")

        if isinstance(self.expr, sql.SelectStmt):
            body = sql.pp_select(self.expr, table_name_fn=binding,
                                 normalize=True)
        else:
            body = _norm_island_expr(self.expr, binding)
        return f"{self.kind}@{self.island}[{body}]"


def _norm_island_expr(expr, binding):
    if isinstance(expr, D4mOp):
        args = []
        for child in expr.inputs:
            args.append(binding(child))
        if expr.op == "ewise":
            args.append(expr.params["ewise_op"])
        if expr.op == "select":
            for which in ("rows", "cols"):
                if which in expr.params:
                    args.append(f"{which}=?")
        return f"{expr.op}({','.join(args)})"
    if isinstance(expr, TextOp):
        extra = ",?" if expr.params else ""
        return f"{expr.op}({binding(expr.obj)}{extra})"
    if isinstance(expr, ArrayOp):
        p = expr.params
        if expr.op == "agg":
            detail = f"{p['fn']}({p['attr']}),by({','.join(p['by'])})"
        elif expr.op == "subarray":
            detail = ",".join(f"{d}=?" for d, _, _ in p["ranges"])
        else:
            detail = sql.pp_expr(p["pred"], normalize=True)
        return f"{expr.op}({binding(expr.obj)},{detail})"
    raise TypeError(f"unexpected expr {expr!r}")


@dataclass
class Remainder:
    nodes: list  # RNode in topological order
    root_alias: str  # alias of the query result (container or node)


@dataclass(frozen=True)
class Signature:
    structure: str  # hex digest
    objects: frozenset  # fully-qualified "engine.name"
    constants: tuple  # sorted multiset of literal lexemes


# --- plan steps --------------------------------------------------------------

@dataclass
class ExecuteContainer:
    container: Container

    def norm(self):
        return f"C[{self.container.norm}]"

    def describe(self):
        c = self.container
        return f"run container {c.alias} on {c.engine_id}: {c.query}"


@dataclass
class Migrate:
    from_engine: object  # engine id, or None for an in-memory value
    to_engine: str
    alias: str  # alias of the value being moved
    chain: list  # CastSpec chain (may be empty)

    def norm(self):
        hops = ",".join(
            f"{s.source_model}->{s.target_model}" for s in self.chain
        )
        return f"M[{self.from_engine}->{self.to_engine}:{self.alias}:{hops}]"

    def describe(self):
        src = self.from_engine or "memory"
        return f"migrate {self.alias} {src} -> {self.to_engine}"


@dataclass
class CrossOp:
    node: RNode
    site: object  # engine id, None for middleware casts
    bindings: dict  # input alias -> ('direct', object name) | ('migrated',)

    def norm(self):
        binds = ",".join(
            f"{a}:{'direct' if b[0] == 'direct' else 'mig'}"
            for a, b in sorted(self.bindings.items())
        )
        return f"X[{self.node.norm()}@{self.site}:{binds}]"

    def describe(self):
        return f"cross-op {self.node.kind} ({self.node.alias}) at {self.site}"


@dataclass
class CandidatePlan:
    steps: list
    root_alias: str
    estimated_moves: int

    @property
    def id(self):
        return _sha("\x00".join(s.norm() for s in self.steps))[:16]


# --- decomposition -------------------------------------------------------------

class _Decomposer:
    def __init__(self, resolved):
        self.res = resolved
        self.registry = resolved.registry
        self.catalog = resolved.catalog
        self.containers = []
        self.nodes = []

    def _calias(self):
        return f"c{len(self.containers)}"

    def _ralias(self):
        return f"r{len(self.nodes)}"

    def add_container(self, **kw):
        c = Container(alias=self._calias(), **kw)
        self.containers.append(c)
        return c.alias

    def add_node(self, **kw):
        n = RNode(alias=self._ralias(), **kw)
        self.nodes.append(n)
        return n.alias

    def run(self):
        root_alias = self.frag_scope(self.res.ast.root)
        return self.containers, Remainder(self.nodes, root_alias)

    # ----- leaves

    def leaf_fetch(self, info):
        """Container that exports one engine-resident object."""
        engine = self.catalog.engine(info.engine)
        if info.model == RELATIONAL:
            query = f"SELECT * FROM {info.name}"
            meta = {}
        elif info.model == KEYVALUE:
            query = f"SCAN {info.name}"
            meta = {}
        else:
            arr = engine.array(info.name)
            ranges = ",".join(
                f"{n}=0:{length - 1}" for n, length in arr.dims
            )
            query = f"SUBARRAY {info.name} {ranges}"
            meta = {"dim_maps": arr.dim_maps,
                    "dim_cols": [n for n, _ in arr.dims]}
        return self.add_container(
            engine_id=info.engine, query=query, schema=info.schema,
            out_model=info.model, source_leaf=info.name, meta=meta,
        )

    def frag_cast(self, cast):
        inner_alias = self.frag_scope(cast.inner)
        inner_info = self.res.scope_info(cast.inner)
        cast_info = self.res.leaves[id(cast)]
        params = {
            "source_model": inner_info.model,
            "target_model": cast_info.model,
            "key": tuple(cast.key) if cast.key else None,
        }
        return self.add_node(
            kind="cast", island=None, expr=None, inputs=[inner_alias],
            leaf_aliases={}, out_model=cast_info.model,
            schema=cast_info.schema, params=params,
        )

    # ----- scopes

    def frag_scope(self, scope):
        island = self.registry.require_island(scope.island)
        expr = scope.expr
        sinfo = self.res.scope_info(scope)
        if isinstance(expr, RawExpr):
            return self.add_container(
                engine_id=island.default_engine, query=expr.body,
                schema=sinfo.schema, out_model=island.model,
            )
        if isinstance(expr, sql.SelectStmt):
            return self.frag_select(scope, island, expr, sinfo)
        if isinstance(expr, D4mOp):
            alias, _ = self.frag_d4m(scope, island, expr)
            return alias
        # text / array single-op scopes
        leaf = expr.obj
        info = self.res.leaf(leaf)
        if info.kind == "object":
            query = self.registry.translate(scope.island, expr,
                                            island.default_engine)
            return self.add_container(
                engine_id=island.default_engine, query=query,
                schema=sinfo.schema, out_model=self._expr_out_model(expr, island),
                meta=self._expr_meta(expr, info),
            )
        input_alias = self.frag_cast(info.cast)
        return self.add_node(
            kind=expr.op, island=scope.island, expr=expr,
            inputs=[input_alias], leaf_aliases={id(leaf): input_alias},
            out_model=self._expr_out_model(expr, island), schema=sinfo.schema,
        )

    def _expr_out_model(self, expr, island):
        return island.model

    def _expr_meta(self, expr, info):
        """Dimension metadata carried forward for later model casts."""
        if not isinstance(expr, ArrayOp):
            return {}
        if expr.op == "agg":
            return {"dim_cols": list(expr.params["by"]), "dim_maps": None}
        # subarray/filter keep the source object's dimensions
        arr = self.catalog.engine(info.engine).array(info.name)
        return {"dim_cols": [n for n, _ in arr.dims], "dim_maps": arr.dim_maps}

    def frag_select(self, scope, island, stmt, sinfo):
        refs = stmt.table_refs()
        infos = [self.res.leaf(ref) for ref in refs]
        if all(i.kind == "object" for i in infos):
            query = self.registry.translate(
                scope.island, stmt, island.default_engine,
                binding=lambda ref: ref.name,
            )
            return self.add_container(
                engine_id=island.default_engine, query=query,
                schema=sinfo.schema, out_model=RELATIONAL,
            )
        # mixed: per-table fetch containers (with pushed-down conjuncts) +
        # a remainder select node carrying the full statement
        leaf_aliases = {}
        inputs = []
        conjuncts = _split_conjuncts(stmt.where)
        for ref, info in zip(refs, infos):
            if info.kind == "object":
                pushed = [
                    c for c in conjuncts
                    if _only_references(c, ref.binding, info.schema,
                                        _other_schemas(refs, infos, ref))
                ]
                alias = self._pushdown_fetch(info, ref, pushed)
            else:
                alias = self.frag_cast(info.cast)
            leaf_aliases[id(ref)] = alias
            inputs.append(alias)
        node_alias = self.add_node(
            kind="select", island=scope.island, expr=stmt, inputs=inputs,
            leaf_aliases=leaf_aliases, out_model=RELATIONAL,
            schema=sinfo.schema,
        )
        return node_alias

    def _pushdown_fetch(self, info, ref, pushed):
        base = f"SELECT * FROM {info.name}"
        if ref.alias and ref.alias != info.name:
            base += f" {ref.alias}"
        if pushed:
            base += " WHERE " + " AND ".join(sql.pp_expr(c) for c in pushed)
        return self.add_container(
            engine_id=info.engine, query=base, schema=info.schema,
            out_model=RELATIONAL,
            source_leaf=info.name if not pushed else None,
        )

    def frag_d4m(self, scope, island, node):
        """Returns (alias or None, obj-info or None): engine-pure leaf sets
        stay symbolic until we know whether the whole op is a container."""
        descs = []  # ('obj', info, leaf) | ('alias', alias, leaf)
        for child in node.inputs:
            if isinstance(child, D4mOp):
                alias, _ = self.frag_d4m(scope, island, child)
                descs.append(("alias", alias, child))
            else:
                info = self.res.leaf(child)
                if info.kind == "object":
                    descs.append(("obj", info, child))
                else:
                    descs.append(("alias", self.frag_cast(info.cast), child))
        engines = {d[1].engine for d in descs if d[0] == "obj"}
        if (all(d[0] == "obj" for d in descs) and len(engines) == 1):
            engine = engines.pop()
            if self.registry.supports(scope.island, engine, node.op):
                query = self.registry.translate(scope.island, node, engine)
                schema = self._d4m_schema(node)
                alias = self.add_container(
                    engine_id=engine, query=query, schema=schema,
                    out_model=KEYVALUE,
                )
                return alias, None
        leaf_aliases = {}
        inputs = []
        for kind, payload, leaf in descs:
            if kind == "obj":
                alias = self.leaf_fetch(payload)
            else:
                alias = payload
            leaf_aliases[id(leaf)] = alias
            inputs.append(alias)
        alias = self.add_node(
            kind=node.op, island=scope.island, expr=node, inputs=inputs,
            leaf_aliases=leaf_aliases, out_model=KEYVALUE,
            schema=self._d4m_schema(node),
        )
        return alias, None

    def _d4m_schema(self, node):
        return [("row", TEXT), ("col", TEXT), ("val", REAL)]


def _split_conjuncts(pred):
    if pred is None:
        return []
    if isinstance(pred, sql.Logic) and pred.op == "and":
        return _split_conjuncts(pred.left) + _split_conjuncts(pred.right)
    return [pred]


def _collect_cols(node, out):
    if isinstance(node, sql.Col):
        out.append(node)
    elif isinstance(node, (sql.Bin, sql.Cmp, sql.Logic)):
        _collect_cols(node.left, out)
        _collect_cols(node.right, out)
    elif isinstance(node, sql.Not):
        _collect_cols(node.expr, out)
    elif isinstance(node, sql.Agg) and node.arg is not None:
        _collect_cols(node.arg, out)


def _other_schemas(refs, infos, this_ref):
    out = []
    for ref, info in zip(refs, infos):
        if ref is not this_ref and info.schema:
            out.extend(n for n, _ in info.schema)
    return set(out)


def _only_references(conjunct, binding, schema, other_cols):
    cols = []
    _collect_cols(conjunct, cols)
    names = {n for n, _ in schema}
    for col in cols:
        if col.qual is not None:
            if col.qual != binding:
                return False
        else:
            if col.name not in names or col.name in other_cols:
                return False
    return bool(cols)


def decompose(resolved):
    """(containers, remainder) for a validated query."""
    return _Decomposer(resolved).run()


# --- signatures ---------------------------------------------------------------

def signature_of(remainder, resolved):
    if remainder.nodes:
        body = ";".join(f"{n.alias}={n.norm()}" for n in remainder.nodes)
    else:
        body = EMPTY_REMAINDER_SENTINEL
    objects = frozenset(
        f"{info.engine}.{info.name}"
        for info in resolved.leaves.values()
        if info.kind == "object"
    )
    constants = tuple(sorted(collect_constants(resolved.ast)))
    return Signature(_sha(body), objects, constants)


# --- plan enumeration ------------------------------------------------------------

def _input_model_for(kind, island, site_model):
    """Model in which a cross-op wants its inputs materialized."""
    if kind == "select":
        return RELATIONAL
    return site_model  # d4m/text ops read the site engine's native encoding


def _site_candidates(node, registry):
    if node.kind == "cast":
        return [None]
    sites = registry.supporting_engines(node.island, node.kind)
    if not sites:
        raise PlanningError(
            f"no engine supports operator {node.kind!r} of island "
            f"{node.island!r}"
        )
    return sites


def enumerate_plans(containers, remainder, registry, catalog, cap=16):
    """All site assignments of remainder nodes, with minimal migrations,
    deduplicated and capped by fewest estimated moves."""
    by_alias = {c.alias: c for c in containers}
    choices = [_site_candidates(n, registry) for n in remainder.nodes]
    plans = {}
    for assignment in (product(*choices) if remainder.nodes else [()]):
        moves = 0
        # producer residency: alias -> engine id, or None for in-memory
        home = {c.alias: c.engine_id for c in containers}
        model = {c.alias: c.out_model for c in containers}
        executed = set()  # containers whose exported value some step reads
        if remainder.root_alias in by_alias:
            executed.add(remainder.root_alias)
        node_steps = []
        migrated = set()
        for node, site in zip(remainder.nodes, assignment):
            if node.kind == "cast":
                inp = node.inputs[0]
                if inp in by_alias:
                    executed.add(inp)
                node_steps.append(CrossOp(node, None, {inp: ("value",)}))
                home[node.alias] = None
                model[node.alias] = node.out_model
                continue
            site_model = catalog.engine(site).model
            need = _input_model_for(node.kind, node.island, site_model)
            bindings = {}
            for inp in node.inputs:
                src = by_alias.get(inp)
                if (src is not None and src.source_leaf is not None
                        and home[inp] == site and model[inp] == need):
                    bindings[inp] = ("direct", src.source_leaf)
                    continue
                if inp in by_alias:
                    executed.add(inp)
                if home[inp] == site and model[inp] == need:
                    # already resident on the site engine: stage as a temp
                    # without counting a migration
                    bindings[inp] = ("staged",)
                    continue
                meta = src.meta if src is not None else {}
                chain = _build_chain(model[inp], need, meta)
                if (inp, site, need) not in migrated:
                    node_steps.append(Migrate(home[inp], site, inp, chain))
                    migrated.add((inp, site, need))
                    moves += 1
                bindings[inp] = ("migrated",)
            node_steps.append(CrossOp(node, site, bindings))
            home[node.alias] = None
            model[node.alias] = node.out_model
        steps = [ExecuteContainer(c) for c in containers
                 if c.alias in executed]
        steps.extend(node_steps)
        plan = CandidatePlan(steps, remainder.root_alias, moves)
        plans.setdefault(plan.id, plan)
    ordered = sorted(plans.values(), key=lambda p: (p.estimated_moves, p.id))
    return ordered[:cap]


def _build_chain(src_model, need_model, meta):
    if src_model == need_model:
        return []
    if src_model == ARRAY:
        # array-model values need their key maps to re-enter the
        # associative world
        spec = CastSpec(ARRAY, KEYVALUE,
                        dim_cols=tuple(meta.get("dim_cols") or ()) or None,
                        dim_maps=meta.get("dim_maps"))
        return [spec] + _build_chain(KEYVALUE, need_model, {})
    return chain_for(src_model, need_model)


# --- explain -----------------------------------------------------------------------

def render_explain(containers, remainder, signature, plans):
    lines = ["containers:"]
    for c in containers:
        lines.append(f"  {c.alias} [{c.id}] on {c.engine_id}: {c.query}")
    if remainder.nodes:
        lines.append("remainder:")
        for n in remainder.nodes:
            lines.append(
                f"  {n.alias} = {n.kind}({', '.join(n.inputs)})"
            )
    else:
        lines.append("remainder: empty")
    lines.append("signature:")
    lines.append(f"  structure: {signature.structure}")
    lines.append(f"  objects: {', '.join(sorted(signature.objects)) or '-'}")
    lines.append(f"  constants: {', '.join(signature.constants) or '-'}")
    lines.append(f"plans ({len(plans)}):")
    for p in plans:
        lines.append(f"  plan {p.id} (moves={p.estimated_moves}):")
        for s in p.steps:
            lines.append(f"    - {s.describe()}")
    return "\n".join(lines)
