import pytest

import generators
from polydawg import planner, querylang as ql
from polydawg.errors import PlanningError
from polydawg.island import Island, IslandRegistry
from polydawg.planner import (
    CrossOp, ExecuteContainer, Migrate, decompose, enumerate_plans,
    signature_of,
)


@pytest.fixture(scope="module")
def env():
    return generators.standard_catalog()


def resolve(env, text):
    catalog, registry = env
    return ql.validate(ql.parse(text), registry, catalog)


def plan(env, text, cap=16):
    catalog, registry = env
    resolved = resolve(env, text)
    containers, remainder = decompose(resolved)
    plans = enumerate_plans(containers, remainder, registry, catalog, cap=cap)
    return containers, remainder, plans


def test_single_engine_query_is_one_container(env):
    containers, remainder, plans = plan(
        env, "relational(SELECT id FROM patients WHERE age > 60)")
    assert len(containers) == 1
    assert containers[0].engine_id == "rel"
    assert remainder.nodes == []
    assert len(plans) == 1
    assert plans[0].estimated_moves == 0
    assert [type(s) for s in plans[0].steps] == [ExecuteContainer]


def test_cross_engine_matmul_enumerates_one_plan_per_site(env):
    containers, remainder, plans = plan(env, "d4m(matmul(dose_rc, vitals))")
    assert len(containers) == 2
    assert {c.engine_id for c in containers} == {"rel", "kv"}
    assert [n.kind for n in remainder.nodes] == ["matmul"]
    assert len(plans) == 3
    sites = sorted(s.site for p in plans for s in p.steps
                   if isinstance(s, CrossOp))
    assert sites == ["arr", "kv", "rel"]
    # each plan moves only the operands not already resident at the site
    by_site = {next(s.site for s in p.steps if isinstance(s, CrossOp)): p
               for p in plans}
    assert by_site["rel"].estimated_moves == 1  # vitals moves to rel
    assert by_site["kv"].estimated_moves == 1   # dose_rc moves to kv
    assert by_site["arr"].estimated_moves == 2  # both move


def test_resident_operand_binds_direct_without_migration(env):
    _, _, plans = plan(env, "d4m(matmul(dose_rc, vitals))")
    kv_plan = next(p for p in plans
                   if any(isinstance(s, CrossOp) and s.site == "kv"
                          for s in p.steps))
    cross = next(s for s in kv_plan.steps if isinstance(s, CrossOp))
    kinds = sorted(b[0] for b in cross.bindings.values())
    assert kinds == ["direct", "migrated"]
    # the direct operand is never exported, so no ExecuteContainer for it
    executed = [s.container.engine_id for s in kv_plan.steps
                if isinstance(s, ExecuteContainer)]
    assert executed == ["rel"]


def test_pushed_down_filters_stay_in_containers(env):
    containers, remainder, _ = plan(
        env,
        "relational(SELECT p.id FROM patients p JOIN "
        "cast(text(grep(notes, 'fever')), relational) n "
        "ON p.id = n.r WHERE p.age > 60)")
    rel = [c for c in containers if c.engine_id == "rel"]
    assert any("age > 60" in c.query for c in rel)
    kinds = [n.kind for n in remainder.nodes]
    assert "cast" in kinds and "select" in kinds


def test_plan_ids_are_constant_normalized(env):
    def ids(text):
        _, _, plans = plan(env, text)
        return [p.id for p in plans]

    a = ids("relational(SELECT id FROM patients WHERE age > 60)")
    b = ids("relational(SELECT id FROM patients WHERE age > 75)")
    assert a == b


def test_signature_structure_objects_constants(env):
    def sig(text):
        resolved = resolve(env, text)
        _, remainder = decompose(resolved)
        return signature_of(remainder, resolved)

    a = sig("d4m(select(vitals, rows='p1':'p5'))")
    b = sig("d4m(select(vitals, rows='p2':'p9'))")
    assert a.structure == b.structure
    assert a.objects == b.objects == frozenset({"kv.vitals"})
    assert a.constants != b.constants

    c = sig("d4m(transpose(vitals))")
    assert c.structure != a.structure

    empty = sig("relational(SELECT id FROM patients)")
    empty2 = sig("relational(SELECT age FROM patients)")
    # fully-contained queries share the empty-remainder structure
    assert empty.structure == empty2.structure


def test_plan_cap_is_enforced(env):
    text = ("d4m(matmul(matmul(dose_rc, vitals), "
            "matmul(vitals, dose_rc)))")
    _, _, plans = plan(env, text)
    assert 1 <= len(plans) <= 16
    _, _, capped = plan(env, text, cap=4)
    assert len(capped) == 4
    assert [p.id for p in capped] == [p.id for p in plans[:4]]
    # ordered by estimated migrations first
    moves = [p.estimated_moves for p in plans]
    assert moves == sorted(moves)


def test_missing_shims_raise_planning_error(env):
    catalog, _ = env
    registry = IslandRegistry()
    registry.add_island(
        Island("d4m", "keyvalue", frozenset({"matmul"}),
               ("rel", "kv", "arr"), "kv"),
        {"kv": {}},  # member engines but no translations at all
    )
    resolved = ql.validate(
        ql.parse("d4m(matmul(dose_rc, vitals))"), registry, catalog)
    containers, remainder = decompose(resolved)
    with pytest.raises(PlanningError):
        enumerate_plans(containers, remainder, registry, catalog)


def test_render_explain_mentions_all_parts(env):
    catalog, registry = env
    resolved = resolve(env, "d4m(matmul(dose_rc, vitals))")
    containers, remainder = decompose(resolved)
    plans = enumerate_plans(containers, remainder, registry, catalog)
    text = planner.render_explain(
        containers, remainder, signature_of(remainder, resolved), plans)
    assert "containers:" in text
    assert "remainder:" in text
    assert "structure:" in text
    assert "plans (3):" in text
    assert text.count("plan ") == 3
