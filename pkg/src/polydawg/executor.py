"""Plan execution and the training/production query lifecycle.

Training runs every candidate plan, checks they agree, and records each
runtime. Production reuses history: an exact signature match runs its
best-known plan; a close match runs the matched signature's best plan
unless engine usage looks very different from when it was recorded; and
otherwise a random candidate runs now while the rest queue up for
background training during idle periods.

A pluggable clock makes runs reproducible: the virtual clock advances by
a per-step delay model instead of waiting on wall time.
"""

import random
import time
from collections import defaultdict
from dataclasses import dataclass, field

from . import monitor as mon
from . import planner, querylang
from .canonical import bag_equal
from .errors import ExecutionError, InternalConsistencyError
from .migrator import CastSpec, apply_cast, migrate
from .planner import CrossOp, ExecuteContainer, Migrate


class WallClock:
    def now(self):
        return time.time()

    def advance(self, seconds):  # real time passes on its own
        pass


class VirtualClock:
    def __init__(self, start=0.0):
        self._t = start

    def now(self):
        return self._t

    def advance(self, seconds):
        self._t += seconds


class StepDelayModel:
    """Per-step delays (ms) applied under a virtual clock.

    ``cross_op_site_ms`` maps an engine id to the delay of cross-engine
    operators executed there, which lets tests shape plan runtimes.
    """

    def __init__(self, default_ms=1.0, container_ms=None, migrate_ms=None,
                 cross_op_site_ms=None, cross_op_kind_site_ms=None):
        self.default_ms = default_ms
        self.container_ms = container_ms
        self.migrate_ms = migrate_ms
        self.cross_op_site_ms = dict(cross_op_site_ms or {})
        self.cross_op_kind_site_ms = dict(cross_op_kind_site_ms or {})

    def delay_ms(self, step):
        if isinstance(step, ExecuteContainer) and self.container_ms is not None:
            return self.container_ms
        if isinstance(step, Migrate) and self.migrate_ms is not None:
            return self.migrate_ms
        if isinstance(step, CrossOp):
            key = (step.node.kind, step.site)
            if key in self.cross_op_kind_site_ms:
                return self.cross_op_kind_site_ms[key]
            if step.site in self.cross_op_site_ms:
                return self.cross_op_site_ms[step.site]
        return self.default_ms


class UsageTracker:
    """Busy intervals per engine; reports busy fractions over a window."""

    def __init__(self):
        self.intervals = defaultdict(list)  # engine -> [(start, end)]

    def add(self, engine, start, end):
        if end > start:
            self.intervals[engine].append((start, end))

    def busy_fraction(self, engine, now, window):
        lo = now - window
        spans = []
        for start, end in self.intervals.get(engine, ()):
            s, e = max(start, lo), min(end, now)
            if e > s:
                spans.append((s, e))
        spans.sort()
        busy, cur = 0.0, None
        for s, e in spans:
            if cur is None or s > cur[1]:
                if cur:
                    busy += cur[1] - cur[0]
                cur = [s, e]
            else:
                cur[1] = max(cur[1], e)
        if cur:
            busy += cur[1] - cur[0]
        return min(busy / window, 1.0)


@dataclass
class SystemConfig:
    similarity_threshold: float = mon.SIMILARITY_THRESHOLD
    usage_bound: float = mon.USAGE_DIFFERENCE_BOUND
    plan_cap: int = 16
    usage_window_s: float = 10.0
    idle_after_s: float = 5.0
    idle_busy_bound: float = 0.2
    seed: int = 0


@dataclass
class PlannedQuery:
    text: str
    resolved: object
    containers: list
    remainder: object
    signature: object
    plans: list


@dataclass
class QueryReport:
    result: object  # CanonicalTable
    plan_id: str
    runtime_ms: float
    phase: str
    case: str = ""  # production: matched | usage-alternate | retrain-recommended | random
    runs: list = field(default_factory=list)  # training: (plan id, ms)
    warnings: list = field(default_factory=list)


class System:
    """The middleware: catalog + islands + monitor + execution."""

    def __init__(self, catalog, registry, monitor_db, config=None,
                 clock=None, delay_model=None):
        self.catalog = catalog
        self.registry = registry
        self.monitor = monitor_db
        self.config = config or SystemConfig()
        self.clock = clock or WallClock()
        self.delay = delay_model or StepDelayModel()
        self.usage = UsageTracker()
        self.rng = random.Random(self.config.seed)
        self._last_foreground_end = float("-inf")
        self._virtual = not isinstance(self.clock, WallClock)

    # --- planning ------------------------------------------------------------

    def plan_query(self, text):
        ast = querylang.parse(text)
        resolved = querylang.validate(ast, self.registry, self.catalog)
        containers, remainder = planner.decompose(resolved)
        signature = planner.signature_of(remainder, resolved)
        plans = planner.enumerate_plans(
            containers, remainder, self.registry, self.catalog,
            cap=self.config.plan_cap,
        )
        return PlannedQuery(text, resolved, containers, remainder,
                            signature, plans)

    def explain(self, text):
        pq = self.plan_query(text)
        return planner.render_explain(pq.containers, pq.remainder,
                                      pq.signature, pq.plans)

    # --- execution -------------------------------------------------------------

    def current_usage(self):
        now = self.clock.now()
        return {
            engine: self.usage.busy_fraction(engine, now,
                                             self.config.usage_window_s)
            for engine in self.catalog.engines
        }

    def _step(self, engines, fn):
        """Run fn, account its duration to the given engines."""
        start = self.clock.now()
        out = fn()
        end = self.clock.now()
        for engine in engines:
            if engine is not None:
                self.usage.add(engine, start, end)
        return out

    def execute_plan(self, pq, plan):
        """Run one candidate plan; returns (CanonicalTable, runtime_ms)."""
        env = {}  # alias -> CanonicalTable
        site_names = {}  # (alias, engine) -> temp object name
        start = self.clock.now()
        try:
            for step in plan.steps:
                if self._virtual:
                    self.clock.advance(self.delay.delay_ms(step) / 1000.0)
                if isinstance(step, ExecuteContainer):
                    c = step.container
                    env[c.alias] = self._step(
                        [c.engine_id],
                        lambda c=c: self.catalog.execute_native(
                            c.engine_id, c.query),
                    )
                elif isinstance(step, Migrate):
                    key = (step.alias, step.to_engine)
                    site_names[key] = self._step(
                        [step.from_engine, step.to_engine],
                        lambda step=step: migrate(
                            self.catalog, step.alias, step.from_engine,
                            step.to_engine, step.chain,
                            table=env[step.alias]),
                    )
                elif isinstance(step, CrossOp):
                    env[step.node.alias] = self._run_cross_op(
                        step, env, site_names)
                else:
                    raise ExecutionError(f"unknown step {step!r}", step)
            if plan.root_alias not in env:
                raise ExecutionError(
                    f"plan produced no value for {plan.root_alias!r}",
                    None,
                )
            result = env[plan.root_alias]
        finally:
            self.catalog.drop_temporaries()
            self._last_foreground_end = self.clock.now()
        runtime_ms = (self.clock.now() - start) * 1000.0
        return result, runtime_ms

    def _run_cross_op(self, step, env, site_names):
        node = step.node
        if node.kind == "cast":
            table = env[node.inputs[0]]
            for spec in _cast_chain(node.params["source_model"],
                                    node.params["target_model"],
                                    node.params.get("key")):
                table, _ = apply_cast(table, spec)
            return _rename_to(table, node.schema)

        def binding(leaf):
            alias = node.leaf_aliases[id(leaf)]
            how = step.bindings[alias]
            if how[0] == "direct":
                return how[1]
            if how[0] == "staged":
                key = (alias, step.site)
                if key not in site_names:
                    site_names[key] = migrate(
                        self.catalog, alias, None, step.site, [],
                        table=env[alias],
                    )
                return site_names[key]
            return site_names[(alias, step.site)]

        query = self.registry.translate(node.island, node.expr, step.site,
                                        binding)
        return self._step(
            [step.site],
            lambda: self.catalog.execute_native(step.site, query),
        )

    # --- training ----------------------------------------------------------------

    def run_training(self, text):
        pq = self.plan_query(text)
        usage_at_start = self.current_usage()
        runs = []
        reference = None
        best = None
        for plan in pq.plans:
            result, runtime_ms = self.execute_plan(pq, plan)
            if reference is None:
                reference = result
            elif not bag_equal(reference, result, rel_tol=1e-9):
                raise InternalConsistencyError(
                    f"plan {plan.id} disagrees with plan {pq.plans[0].id} "
                    f"for: {text}"
                )
            self.monitor.record(mon.PerfRecord(
                ts=self.clock.now(), phase="training",
                signature=pq.signature, plan_id=plan.id,
                runtime_ms=runtime_ms, usage=usage_at_start,
            ))
            runs.append((plan.id, runtime_ms))
            if best is None or runtime_ms < best[2]:
                best = (plan.id, result, runtime_ms)
        return QueryReport(result=best[1], plan_id=best[0],
                           runtime_ms=best[2], phase="training", runs=runs)

    # --- production --------------------------------------------------------------

    def run_production(self, text):
        pq = self.plan_query(text)
        usage_now = self.current_usage()
        by_id = {p.id: p for p in pq.plans}

        plan, case, warnings = None, "random", []
        near, score = self.monitor.nearest(pq.signature)
        if near is not None and score >= self.config.similarity_threshold:
            best = self.monitor.best_plan(near)
            if best in by_id:
                training_usage = self.monitor.mean_usage(near, best)
                if not mon.usage_differs(usage_now, training_usage,
                                         self.config.usage_bound):
                    plan, case = by_id[best], "matched"
                else:
                    # engine load looks very different from when the best
                    # plan was measured: prefer a plan measured under
                    # comparable load, else fall back with a warning
                    alt = self.monitor.best_plan_for_usage(
                        near, usage_now, self.config.usage_bound)
                    if alt is not None and alt in by_id:
                        plan, case = by_id[alt], "usage-alternate"
                    else:
                        plan, case = by_id[best], "retrain-recommended"
                        warnings.append(
                            "usage differs from training; consider "
                            "re-running with --training"
                        )
        if plan is None:
            plan = self.rng.choice(pq.plans)
            case = "random"
            for other in pq.plans:
                if other.id != plan.id:
                    self.monitor.enqueue(pq.signature, other, pq)

        result, runtime_ms = self.execute_plan(pq, plan)
        self.monitor.record(mon.PerfRecord(
            ts=self.clock.now(), phase="production",
            signature=pq.signature, plan_id=plan.id,
            runtime_ms=runtime_ms, usage=usage_now,
        ))
        return QueryReport(result=result, plan_id=plan.id,
                           runtime_ms=runtime_ms, phase="production",
                           case=case, warnings=warnings)

    # --- background training ---------------------------------------------------------

    def is_idle(self):
        if self.clock.now() - self._last_foreground_end < self.config.idle_after_s:
            return False
        return all(frac < self.config.idle_busy_bound
                   for frac in self.current_usage().values())

    def drain_background(self, force=False):
        """Run queued plans while the system looks idle; returns the
        number of plans executed (failed runs leave a tombstone record)."""
        done = 0
        while self.monitor.pending and (force or self.is_idle()):
            signature, plan, pq = self.monitor.pop_pending()
            usage_at_start = self.current_usage()
            foreground_end = self._last_foreground_end
            try:
                _, runtime_ms = self.execute_plan(pq, plan)
                phase = "background"
            except Exception:
                phase, runtime_ms = "failed", 0.0
            # background work should not push back the idle horizon
            self._last_foreground_end = foreground_end
            self.monitor.record(mon.PerfRecord(
                ts=self.clock.now(), phase=phase, signature=signature,
                plan_id=plan.id, runtime_ms=runtime_ms,
                usage=usage_at_start,
            ))
            done += 1
        return done


def _cast_chain(source, target, key):
    """Cast specs for a user-level cast between island models.

    relational->array routes through the associative triple form (rank
    coordinates); every other pair has a direct rule.
    """
    if source == target:
        return []
    if source == "relational" and target == "array":
        return [CastSpec("relational", "keyvalue",
                         key=tuple(key) if key else ("r",)),
                CastSpec("keyvalue", "array")]
    spec = CastSpec(source, target)
    if source == "relational" and target == "keyvalue":
        spec.key = tuple(key) if key else ("r",)
    return [spec]


def _rename_to(table, schema):
    from .canonical import CanonicalTable
    if schema and len(schema) == len(table.schema):
        names = [n for n, _ in schema]
        tags = [t for _, t in table.schema]
        return CanonicalTable(list(zip(names, tags)), list(table.rows))
    return table
