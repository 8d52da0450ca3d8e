"""Performance history for trained queries.

Every plan execution appends one record to a durable, append-only,
line-oriented log. Each line holds tab-separated fields, each
percent-escaped so tabs/newlines in payloads cannot corrupt framing:

    ts  phase  structure  objects  constants  plan-id  runtime-ms  usage

``objects`` and ``constants`` join their elements with ';'; ``usage`` is
``engine=busyfraction`` pairs joined with ','. Reopening a log replays
every line, so history survives restarts byte-for-byte.
"""

import os
from collections import defaultdict
from dataclasses import dataclass
from urllib.parse import quote, unquote

from .errors import MonitorError
from .planner import Signature

# similarity weights: structure match dominates, then object overlap,
# then constant overlap
W_STRUCTURE = 0.6
W_OBJECTS = 0.3
W_CONSTANTS = 0.1
SIMILARITY_THRESHOLD = 0.8
USAGE_DIFFERENCE_BOUND = 0.5

_FIELDS = 8


@dataclass(frozen=True)
class UsageSnapshot:
    busy: dict  # engine id -> busy fraction, clamped to [0, 1]
    active_queries: int
    ts: float

    def __post_init__(self):
        clamped = {e: min(max(f, 0.0), 1.0) for e, f in self.busy.items()}
        object.__setattr__(self, "busy", clamped)


@dataclass(frozen=True)
class PerfRecord:
    ts: float
    phase: str  # training | production | background | failed
    signature: Signature
    plan_id: str
    runtime_ms: float
    usage: dict  # engine id -> busy fraction over the sampling window


def _esc(text):
    return quote(text, safe="")


def _fmt(record):
    sig = record.signature
    fields = [
        repr(record.ts),
        record.phase,
        sig.structure,
        ";".join(_esc(o) for o in sorted(sig.objects)),
        ";".join(_esc(c) for c in sig.constants),
        record.plan_id,
        repr(record.runtime_ms),
        ",".join(f"{e}={record.usage[e]!r}" for e in sorted(record.usage)),
    ]
    return "\t".join(_esc(f) for f in fields)


def _parse_line(line, lineno):
    parts = line.split("\t")
    if len(parts) != _FIELDS:
        raise MonitorError(f"log line {lineno}: expected {_FIELDS} fields")
    parts = [unquote(p) for p in parts]
    try:
        objects = frozenset(
            unquote(o) for o in parts[3].split(";") if o
        )
        constants = tuple(unquote(c) for c in parts[4].split(";") if c)
        usage = {}
        if parts[7]:
            for pair in parts[7].split(","):
                engine, frac = pair.split("=", 1)
                usage[engine] = float(frac)
        return PerfRecord(
            ts=float(parts[0]), phase=parts[1],
            signature=Signature(parts[2], objects, constants),
            plan_id=parts[5], runtime_ms=float(parts[6]), usage=usage,
        )
    except (ValueError, IndexError) as e:
        raise MonitorError(f"log line {lineno}: {e}") from e


def jaccard(a, b):
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def similarity(sig_a, sig_b, weights=None):
    """Weighted signature similarity in [0, 1]."""
    ws, wo, wc = weights or (W_STRUCTURE, W_OBJECTS, W_CONSTANTS)
    structure = 1.0 if sig_a.structure == sig_b.structure else 0.0
    objects = jaccard(sig_a.objects, sig_b.objects)
    constants = jaccard(set(sig_a.constants), set(sig_b.constants))
    # rounding keeps weight sums exact (0.6 + 0.3 is 0.9, not 0.8999...)
    return round(ws * structure + wo * objects + wc * constants, 12)


def usage_differs(usage_a, usage_b, bound=USAGE_DIFFERENCE_BOUND):
    """True when any engine's busy fraction differs by more than bound."""
    for engine in set(usage_a) | set(usage_b):
        if abs(usage_a.get(engine, 0.0) - usage_b.get(engine, 0.0)) > bound:
            return True
    return False


class MonitorDB:
    """Append-only performance log plus the in-memory pending queue."""

    def __init__(self, path=None, weights=None):
        self.path = path
        self.weights = weights
        self.records = []
        self._by_sig = defaultdict(list)  # signature -> record indexes
        self.pending = []  # (signature, plan, context) awaiting background run
        if path and os.path.exists(path):
            self._replay()

    def _replay(self):
        with open(self.path, encoding="ascii") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                self._index(_parse_line(line, lineno))

    def _index(self, record):
        self._by_sig[record.signature].append(len(self.records))
        self.records.append(record)

    def record(self, record):
        """Index a record and append it durably to the log."""
        if self.path:
            with open(self.path, "a", encoding="ascii") as fh:
                fh.write(_fmt(record) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        self._index(record)

    # --- lookups -----------------------------------------------------------

    def signatures(self):
        return list(self._by_sig)

    def records_for(self, signature):
        return [self.records[i] for i in self._by_sig.get(signature, ())]

    def nearest(self, signature):
        """(signature, similarity) of the closest recorded signature; ties
        go to the signature recorded most recently."""
        best = None
        for sig, idxs in self._by_sig.items():
            score = similarity(signature, sig, self.weights)
            recency = max(idxs)
            if best is None or (score, recency) > (best[1], best[2]):
                best = (sig, score, recency)
        if best is None:
            return None, 0.0
        return best[0], best[1]

    def best_plan(self, signature):
        """Plan id with the lowest mean runtime over successful runs; ties
        break to the lexicographically smallest id."""
        runtimes = defaultdict(list)
        for rec in self.records_for(signature):
            if rec.phase != "failed":
                runtimes[rec.plan_id].append(rec.runtime_ms)
        if not runtimes:
            return None
        means = {pid: sum(v) / len(v) for pid, v in runtimes.items()}
        return min(means, key=lambda pid: (means[pid], pid))

    def mean_usage(self, signature, plan_id=None):
        """Per-engine arithmetic mean of busy fractions across records,
        optionally restricted to one plan."""
        sums, counts = defaultdict(float), defaultdict(int)
        for rec in self.records_for(signature):
            if plan_id is not None and rec.plan_id != plan_id:
                continue
            for engine, frac in rec.usage.items():
                sums[engine] += frac
                counts[engine] += 1
        return {e: sums[e] / counts[e] for e in sums}

    def best_plan_for_usage(self, signature, current_usage,
                            bound=USAGE_DIFFERENCE_BOUND):
        """Min-mean plan over only the records whose usage snapshot is
        within the large-difference bound of current usage; None when no
        record qualifies."""
        runtimes = defaultdict(list)
        for rec in self.records_for(signature):
            if rec.phase == "failed":
                continue
            if usage_differs(rec.usage, current_usage, bound):
                continue
            runtimes[rec.plan_id].append(rec.runtime_ms)
        if not runtimes:
            return None
        means = {pid: sum(v) / len(v) for pid, v in runtimes.items()}
        return min(means, key=lambda pid: (means[pid], pid))

    def plan_ids(self, signature):
        seen = []
        for rec in self.records_for(signature):
            if rec.plan_id not in seen and rec.phase != "failed":
                seen.append(rec.plan_id)
        return seen

    # --- pending queue -------------------------------------------------------

    def enqueue(self, signature, plan, context):
        self.pending.append((signature, plan, context))

    def pop_pending(self):
        return self.pending.pop(0) if self.pending else None

    # --- reporting -----------------------------------------------------------

    def dump_lines(self):
        return [_fmt(r) for r in self.records]

    def plan_means(self, structure):
        """Per-plan mean runtimes for every signature whose structure hash
        starts with ``structure``; used by the CLI stats command."""
        out = {}
        for sig in self._by_sig:
            if not sig.structure.startswith(structure):
                continue
            runtimes = defaultdict(list)
            for rec in self.records_for(sig):
                if rec.phase != "failed":
                    runtimes[rec.plan_id].append(rec.runtime_ms)
            for pid, vals in runtimes.items():
                out[pid] = sum(vals) / len(vals)
        return out

    def stats(self):
        """Per-signature summary used by the CLI."""
        out = []
        for sig in self._by_sig:
            recs = self.records_for(sig)
            ok = [r for r in recs if r.phase != "failed"]
            out.append({
                "structure": sig.structure[:12],
                "objects": sorted(sig.objects),
                "runs": len(recs),
                "plans": len({r.plan_id for r in ok}),
                "best_plan": self.best_plan(sig),
                "mean_runtime_ms": (
                    sum(r.runtime_ms for r in ok) / len(ok) if ok else None
                ),
            })
        return out
