import csv
import json

import pytest

from cargo_recovery import io
from cargo_recovery.cli import EXIT_ERROR, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main
from cargo_recovery.domain import plan_cost
from cargo_recovery.scenarios import worked_example


@pytest.fixture
def fig_file(tmp_path):
    path = tmp_path / "worked.json"
    io.save_scenario(worked_example(), path)
    return path


def test_gen_scenario_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gen-scenario", "--seed", "5", "--preset", "micro", "--out", str(a)]) == EXIT_OK
    assert main(["gen-scenario", "--seed", "5", "--preset", "micro", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert main(["gen-scenario", "--seed", "5", "--flights", "7", "--out", str(b)]) == EXIT_OK
    assert len(json.loads(b.read_text())["flights"]) <= 7


def test_solve_string_writes_plan_and_logs(tmp_path, fig_file, capsys):
    out, log_path = tmp_path / "plan.json", tmp_path / "it.csv"
    assert main(["solve-string", "--scenario", str(fig_file), "--out", str(out), "--log", str(log_path)]) == EXIT_OK
    assert "IP 50.00" in capsys.readouterr().out
    plan = io.load_plan(out)
    assert plan_cost(plan, worked_example()).total == pytest.approx(50.0)
    assert (tmp_path / "it_connections.csv").exists()


def test_solve_arc_and_seq(tmp_path, fig_file, capsys):
    assert main(["solve-arc", "--scenario", str(fig_file), "--max-delay", "50", "--interval", "25",
                 "--out", str(tmp_path / "arc.json")]) == EXIT_OK
    assert main(["solve-seq", "--scenario", str(fig_file)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "objective 50.00" in out and "total 300.00" in out


def test_iteration_limit_exit_code(tmp_path, fig_file):
    args = ["solve-string", "--scenario", str(fig_file), "--out", str(tmp_path / "p.json"), "--max-iterations", "1"]
    assert main(args) == EXIT_LIMIT


def test_error_exit_codes(tmp_path, fig_file):
    assert main(["solve-string", "--scenario", str(tmp_path / "missing.json"), "--out", "x"]) == EXIT_ERROR
    assert main(["solve-string", "--scenario", str(fig_file), "--mode", "ml-crg",
                 "--out", str(tmp_path / "p.json")]) == EXIT_ERROR
    assert main(["train-ml", "--logs", str(tmp_path), "--out", str(tmp_path / "m")]) == EXIT_ERROR
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["solve-arc", "--scenario", str(fig_file)])
    assert exc.value.code == EXIT_USAGE


def test_train_and_eval_round_trip(tmp_path, capsys):
    logs = tmp_path / "logs"
    logs.mkdir()
    for seed in range(3):
        scn = tmp_path / f"s{seed}.json"
        main(["gen-scenario", "--seed", str(seed), "--preset", "tight-turn", "--out", str(scn)])
        main(["solve-string", "--scenario", str(scn), "--out", str(tmp_path / "p.json"),
              "--log", str(logs / f"run{seed}.csv")])
    model, samples = tmp_path / "m.tree", tmp_path / "samples.csv"
    assert main(["train-ml", "--logs", str(logs), "--out", str(model), "--samples-out", str(samples),
                 "--folds", "3"]) == EXIT_OK
    capsys.readouterr()
    assert main(["eval-ml", "--model", str(model), "--test", str(samples)]) == EXIT_OK
    scores = json.loads(capsys.readouterr().out)
    assert 0.0 <= scores["sensitivity"] <= 1.0
    with open(samples, newline="") as fh:
        assert scores["n_samples"] == sum(1 for _ in csv.DictReader(fh))


def test_report_files(tmp_path, fig_file):
    out = tmp_path / "rep"
    assert main(["report", "--scenario", str(fig_file), "--methods", "crg,seq,arc", "--max-delay", "50",
                 "--interval", "25", "--out", str(out)]) == EXIT_OK
    with open(out / "cost_breakdown.csv", newline="") as fh:
        totals = {r["method"]: float(r["total"]) for r in csv.DictReader(fh)}
    assert totals == {"crg": 50.0, "seq": 300.0, "arc": 50.0}
    with open(out / "comparison.csv", newline="") as fh:
        crg = next(csv.DictReader(fh))
    assert crg["gap_percent"] == "0.0000"


def test_bench_runs(capsys):
    assert main(["bench", "--sizes", "50", "--repeats", "2"]) == EXIT_OK
    assert "gini_split" in capsys.readouterr().out
