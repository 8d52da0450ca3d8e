import pytest

from polydawg.errors import MonitorError
from polydawg.monitor import (
    MonitorDB, PerfRecord, UsageSnapshot, jaccard, similarity, usage_differs,
)
from polydawg.planner import Signature


def sig(structure="s1", objects=("rel.a",), constants=("1",)):
    return Signature(structure, frozenset(objects), tuple(constants))


def rec(ts=0.0, phase="training", signature=None, plan_id="p1",
        runtime_ms=10.0, usage=None):
    return PerfRecord(ts, phase, signature or sig(), plan_id, runtime_ms,
                      usage if usage is not None else {"rel": 0.1})


def test_jaccard():
    assert jaccard(set(), set()) == 1.0
    assert jaccard({"a"}, set()) == 0.0
    assert jaccard({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3)


def test_similarity_weighted_components():
    a = sig()
    assert similarity(a, a) == 1.0
    # same structure and objects, disjoint constants
    assert similarity(a, sig(constants=("2",))) == 0.9
    # different structure, same objects and constants
    assert similarity(a, sig(structure="s2")) == 0.4
    # everything different
    assert similarity(a, sig("s2", ("kv.b",), ("2",))) == 0.0
    # custom weights
    assert similarity(a, sig(constants=("2",)),
                      weights=(0.5, 0.5, 0.0)) == 1.0


def test_usage_differs_bound_is_exclusive():
    assert not usage_differs({"rel": 0.5}, {"rel": 0.0}, bound=0.5)
    assert usage_differs({"rel": 0.51}, {"rel": 0.0}, bound=0.5)
    # engines missing from one side count as 0
    assert usage_differs({"rel": 0.0, "kv": 0.9}, {"rel": 0.1}, bound=0.5)


def test_usage_snapshot_clamps():
    snap = UsageSnapshot({"rel": 1.7, "kv": -0.2}, 1, 0.0)
    assert snap.busy == {"rel": 1.0, "kv": 0.0}


def test_record_and_replay_round_trip(tmp_path):
    path = str(tmp_path / "monitor.log")
    db = MonitorDB(path)
    weird = sig(objects=("rel.a b", "kv.x;y"), constants=("'tab\t'", "'%,'"))
    db.record(rec(ts=1.5, signature=weird, usage={"rel": 0.25, "kv": 1.0}))
    db.record(rec(ts=2.5, phase="production", plan_id="p2", runtime_ms=3.5))

    again = MonitorDB(path)
    assert again.records == db.records
    assert again.dump_lines() == db.dump_lines()
    for line in again.dump_lines():
        assert len(line.split("\t")) == 8


def test_replay_rejects_corrupt_lines(tmp_path):
    path = tmp_path / "monitor.log"
    path.write_text("only\tthree\tfields\n")
    with pytest.raises(MonitorError):
        MonitorDB(str(path))


def test_nearest_prefers_similarity_then_recency():
    db = MonitorDB()
    old = sig(constants=("1",))
    new = sig(constants=("2",))
    db.record(rec(signature=old))
    db.record(rec(signature=new))
    probe = sig(constants=("3",))  # ties old and new at 0.9
    found, score = db.nearest(probe)
    assert found == new and score == 0.9
    assert db.nearest(sig())[1] == 1.0
    assert MonitorDB().nearest(probe) == (None, 0.0)


def test_best_plan_mean_and_ties():
    db = MonitorDB()
    s = sig()
    db.record(rec(plan_id="b", runtime_ms=10.0))
    db.record(rec(plan_id="b", runtime_ms=30.0))   # mean 20
    db.record(rec(plan_id="c", runtime_ms=25.0))   # mean 25
    db.record(rec(plan_id="a", runtime_ms=20.0))   # mean 20, ties with b
    assert db.best_plan(s) == "a"
    db.record(rec(phase="failed", plan_id="z", runtime_ms=0.0))
    assert db.best_plan(s) == "a"  # failures are excluded
    assert db.plan_ids(s) == ["b", "c", "a"]
    assert db.best_plan(sig(structure="nope")) is None


def test_mean_usage_and_usage_restricted_best_plan():
    db = MonitorDB()
    s = sig()
    db.record(rec(plan_id="fast", runtime_ms=5.0, usage={"rel": 0.0}))
    db.record(rec(plan_id="slow", runtime_ms=50.0, usage={"rel": 0.9}))
    assert db.mean_usage(s) == {"rel": 0.45}
    assert db.mean_usage(s, "fast") == {"rel": 0.0}
    # under heavy rel load only the slow plan's record is comparable
    assert db.best_plan_for_usage(s, {"rel": 0.9}, bound=0.5) == "slow"
    assert db.best_plan_for_usage(s, {"rel": 0.1}, bound=0.5) == "fast"
    assert db.best_plan_for_usage(sig(structure="nope"), {}, 0.5) is None


def test_pending_queue_is_fifo():
    db = MonitorDB()
    db.enqueue(sig(), "p1", "ctx1")
    db.enqueue(sig(), "p2", "ctx2")
    assert db.pop_pending()[1] == "p1"
    assert db.pop_pending()[1] == "p2"
    assert db.pop_pending() is None


def test_plan_means_and_stats():
    db = MonitorDB()
    db.record(rec(plan_id="p1", runtime_ms=10.0))
    db.record(rec(plan_id="p1", runtime_ms=20.0))
    db.record(rec(plan_id="p2", runtime_ms=40.0))
    assert db.plan_means("s1") == {"p1": 15.0, "p2": 40.0}
    assert db.plan_means("zz") == {}
    (row,) = db.stats()
    assert row["runs"] == 3 and row["plans"] == 2
    assert row["best_plan"] == "p1"
    assert row["mean_runtime_ms"] == pytest.approx(70.0 / 3)
