import io

import pytest

from polydawg import cli
from polydawg.canonical import CanonicalTable, save_cif
from polydawg.errors import InternalConsistencyError


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def seed_dataset(workspace, capsys):
    code, out, _ = run(["datagen", "--scale", "1", "--out", "ds"], capsys)
    assert code == 0
    code, _, err = run(["load", "--manifest", "ds/manifest.json"], capsys)
    assert code == 0, err


def test_datagen_is_deterministic(workspace, capsys):
    run(["datagen", "--scale", "1", "--out", "a"], capsys)
    run(["datagen", "--scale", "1", "--out", "b"], capsys)
    for name in ("patients.cif", "manifest.json"):
        assert (workspace / "a" / name).read_bytes() == \
            (workspace / "b" / name).read_bytes()


def test_datagen_rejects_bad_scale(workspace, capsys):
    code, _, err = run(["datagen", "--scale", "0", "--out", "x"], capsys)
    assert code == 2
    assert "scale" in err


def test_load_single_object_and_query(workspace, capsys):
    table = CanonicalTable(
        [("id", "text"), ("age", "int")], [("p1", 70), ("p2", 50)])
    save_cif(table, str(workspace / "t.cif"))
    code, out, _ = run(
        ["load", "rel", "people", "t.cif", "--key", "id"], capsys)
    assert code == 0 and "2 rows" in out

    # the catalog persists: a separate invocation can query it
    code, out, _ = run(
        ["query", "relational(SELECT id FROM people WHERE age > 60)"],
        capsys)
    assert code == 0
    assert "p1" in out and "p2" not in out
    assert "phase = production" in out
    assert "case = " in out


def test_training_then_production_via_cli(workspace, capsys):
    seed_dataset(workspace, capsys)
    doses = ("cast(relational(SELECT patient_id, SUM(dose) AS dose "
             "FROM meds GROUP BY patient_id), d4m, key=patient_id)")
    text = f"d4m(matmul({doses}, transpose({doses})))"
    code, out, _ = run(["query", "--training", text], capsys)
    assert code == 0
    assert "phase = training" in out
    assert out.count("trained-plan = ") >= 2

    code, out, _ = run(["query", text], capsys)
    assert code == 0
    assert "phase = production" in out
    assert "case = matched" in out


def test_untrained_production_notes_random_choice(workspace, capsys):
    seed_dataset(workspace, capsys)
    code, out, _ = run(
        ["query", "text(grep(notes, 'sedated'))"], capsys)
    assert code == 0
    assert "case = random" in out
    assert "note = untrained signature; randomly selected plan" in out


def test_explain_and_monitor_commands(workspace, capsys):
    seed_dataset(workspace, capsys)
    code, out, _ = run(
        ["explain", "relational(SELECT id FROM patients)"], capsys)
    assert code == 0
    assert "containers:" in out and "plans (1):" in out

    run(["query", "--training", "text(grep(notes, 'stable'))"], capsys)
    code, out, _ = run(["monitor", "dump"], capsys)
    assert code == 0
    lines = [l for l in out.splitlines() if l]
    assert lines and all(len(l.split("\t")) == 8 for l in lines)
    structure = lines[0].split("\t")[2][:12]
    code, out, _ = run(["monitor", "stats", structure], capsys)
    assert code == 0 and out.strip()
    code, _, err = run(["monitor", "stats"], capsys)
    assert code == 2 and "structure" in err


def test_syntax_errors_print_carets_and_exit_2(workspace, capsys):
    seed_dataset(workspace, capsys)
    code, _, err = run(
        ["query", "relational(SELECT FROM patients)"], capsys)
    assert code == 2
    assert "error:" in err and "^" in err

    code, _, err = run(["query", "text(grep(nothere, 'x'))"], capsys)
    assert code == 2 and "nothere" in err


def test_internal_consistency_exits_3(workspace, capsys, monkeypatch):
    seed_dataset(workspace, capsys)

    def explode(self, text):
        raise InternalConsistencyError("plans disagree")

    monkeypatch.setattr(cli.System, "run_training", explode)
    code, _, err = run(
        ["query", "--training", "text(grep(notes, 'x'))"], capsys)
    assert code == 3
    assert "internal consistency" in err


def test_config_file_controls_the_system(workspace, capsys):
    (workspace / "polydawg.conf").write_text(
        "# comment\ndata_dir = store\nplan_cap = 2\nseed = 42\n")
    seed = ["--config", "polydawg.conf"]
    table = CanonicalTable([("id", "text"), ("v", "int")], [("a", 1)])
    save_cif(table, str(workspace / "t.cif"))
    code, _, _ = run(seed + ["load", "rel", "t", "t.cif"], capsys)
    assert code == 0
    assert (workspace / "store").is_dir()
    code, out, _ = run(
        seed + ["query", "relational(SELECT id FROM t)"], capsys)
    assert code == 0

    (workspace / "bad.conf").write_text("w_structure = 0.9\n")
    code, _, err = run(["--config", "bad.conf", "monitor", "dump"], capsys)
    assert code == 2 and "weights" in err


def test_repl_runs_lines_and_directives(workspace, capsys, monkeypatch):
    seed_dataset(workspace, capsys)
    monkeypatch.setattr("sys.stdin", io.StringIO(
        "text(grep(notes, 'fever'))\n"
        ":explain relational(SELECT id FROM patients)\n"
        ":train text(scan(notes, rows='p00001':'p00009'))\n"
        ":q\n"))
    code = cli.main(["repl"])
    out = capsys.readouterr().out
    assert code == 0
    assert "phase = production" in out
    assert "containers:" in out
    assert "phase = training" in out
