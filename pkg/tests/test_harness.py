import json

import numpy as np
import pytest

from pcabo import harness
from pcabo.cli import main
from pcabo.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    doe_rows,
    plan,
    read_run_csv,
    run_experiment,
    summarize,
    timing_free_csv,
)

TINY = dict(
    budget_factor=5,
    budget_offset=10,
    de_budget_scale=40,
    gpr_restarts=2,
    lhs_iters=20,
)


def tiny_config(out, **kw):
    data = {"problems": [{"name": "sphere", "dims": [2]}], "algorithms": ["bo", "pcabo"], "repetitions": 3,
            "output_dir": str(out), **TINY}
    data.update(kw)
    return data


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = ExperimentConfig.from_dict(tiny_config(out))
    return out, run_experiment(cfg)


def test_one_csv_per_run_and_a_summary(experiment):
    out, summary = experiment
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert len(csvs) == 6
    assert csvs[0] == "bo__sphere__D2__i1__r000.csv"
    assert (out / "summary.json").is_file()
    assert summary["failed_runs"] == []
    on_disk = json.loads((out / "summary.json").read_text())
    assert {(c["algorithm"], c["problem"], c["dimension"]) for c in on_disk["cells"]} == {
        ("bo", "sphere", 2), ("pcabo", "sphere", 2)}


def test_csv_schema(experiment):
    out, _ = experiment
    path = out / "pcabo__sphere__D2__i1__r001.csv"
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    rec = read_run_csv(path)
    assert len(rec["iteration"]) == 20 - 4
    np.testing.assert_array_equal(rec["evaluations"], np.arange(5, 21))
    assert np.all(np.diff(rec["best_so_far"]) <= 0)
    assert np.all(rec["target_precision"] >= 0)


def test_summary_fields(experiment):
    _, summary = experiment
    cells = {c["algorithm"]: c for c in summary["cells"]}
    pca = cells["pcabo"]
    for key in ("mean_precision", "ci_low", "ci_high", "final_test", "cpu_ratio", "mean_reduced_dim"):
        assert key in pca
    assert set(pca["final_test"]) >= {"statistic", "p", "p_adjusted", "reject"}
    assert np.all(np.diff(pca["mean_precision"]) <= 1e-12)
    assert np.all(np.array(pca["ci_low"]) <= np.array(pca["ci_high"]))
    assert cells["bo"]["final_test"] is None
    assert cells["bo"]["mean_reduced_dim"] == 2


def test_shared_doe_across_algorithms(experiment):
    out, _ = experiment
    for rep in range(3):
        a = doe_rows(out, f"bo__sphere__D2__i1__r{rep:03d}")
        b = doe_rows(out, f"pcabo__sphere__D2__i1__r{rep:03d}")
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(doe_rows(out, "bo__sphere__D2__i1__r000"), doe_rows(out, "bo__sphere__D2__i1__r001"))


def test_rerun_is_identical_without_timing(experiment, tmp_path):
    out, _ = experiment
    run_experiment(ExperimentConfig.from_dict(tiny_config(tmp_path)))
    for path in sorted(out.glob("*.csv")):
        assert timing_free_csv(path) == timing_free_csv(tmp_path / path.name)


def test_worker_pool_matches_sequential(experiment, tmp_path):
    out, _ = experiment
    summary = run_experiment(ExperimentConfig.from_dict(tiny_config(tmp_path, workers=2)))
    assert summary["failed_runs"] == []
    for path in sorted(out.glob("*.csv")):
        assert timing_free_csv(path) == timing_free_csv(tmp_path / path.name)


def test_plan_shares_seeds_across_algorithms():
    cfg = ExperimentConfig.from_dict(tiny_config("unused", algorithms=["bo", "pcabo", "random"]))
    tasks = plan(cfg)
    assert len(tasks) == 9
    by_rep = {}
    for t in tasks:
        by_rep.setdefault(t.repetition, set()).add(t.seed)
    assert all(len(s) == 1 for s in by_rep.values())
    assert len({next(iter(s)) for s in by_rep.values()}) == 3


def _fake_run(precision, elapsed, rdim=2.0, rep=0):
    precision = np.asarray(precision, dtype=float)
    n = len(precision)
    return {
        "iteration": np.arange(1.0, n + 1),
        "evaluations": np.arange(1.0, n + 1),
        "best_so_far": precision,
        "target_precision": precision,
        "reduced_dim": np.full(n, rdim),
        "elapsed_seconds": np.linspace(0, elapsed, n),
        "instance": 1,
        "repetition": rep,
    }


def test_constant_records_give_zero_width_band():
    runs = [_fake_run([3.0, 3.0, 3.0], 1.0, rep=i) for i in range(4)]
    cell = summarize({("sphere", 2): {"bo": runs}})["cells"][0]
    np.testing.assert_array_equal(cell["ci_low"], cell["ci_high"])
    np.testing.assert_array_equal(cell["mean_precision"], [3.0, 3.0, 3.0])


def test_identical_timing_gives_unit_ratio():
    bo = [_fake_run([2.0, 1.0], t, rep=i) for i, t in enumerate([1.0, 2.0, 3.0])]
    pca = [_fake_run([2.0, 0.5], t, rdim=1.0, rep=i) for i, t in enumerate([1.0, 2.0, 3.0])]
    cells = {c["algorithm"]: c for c in summarize({("sphere", 2): {"bo": bo, "pcabo": pca}})["cells"]}
    assert cells["pcabo"]["cpu_ratio"] == 1.0
    assert cells["pcabo"]["cpu_test"]["p"] == 1.0
    assert cells["pcabo"]["reduction_fraction"] == pytest.approx(0.5)


def test_holm_families_use_their_own_levels():
    rng = np.random.default_rng(0)
    cells = {}
    for problem in ("sphere", "rastrigin"):
        bo = [_fake_run([1.0, rng.uniform(1, 2)], rng.uniform(1, 2), rep=i) for i in range(10)]
        pca = [_fake_run([1.0, rng.uniform(0, 0.5)], rng.uniform(3, 4), rep=i) for i in range(10)]
        cells[(problem, 2)] = {"bo": bo, "pcabo": pca}
    out = summarize(cells, precision_level=0.05, cpu_level=0.01)
    tests = [c for c in out["cells"] if c["algorithm"] == "pcabo"]
    assert all(c["final_test"]["level"] == 0.05 and c["cpu_test"]["level"] == 0.01 for c in tests)
    assert all(c["final_test"]["reject"] and c["cpu_test"]["reject"] for c in tests)
    assert all(c["final_test"]["test"] == "wilcoxon_rank_sum" for c in tests)


def test_failed_run_is_recorded_and_experiment_continues(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setitem(harness.ALGORITHMS, "pcabo", broken)
    summary = run_experiment(ExperimentConfig.from_dict(tiny_config(tmp_path, repetitions=2)))
    assert len(summary["failed_runs"]) == 2
    assert all("boom" in f["error"] for f in summary["failed_runs"])
    assert len(list(tmp_path.glob("bo__*.csv"))) == 2


@pytest.mark.parametrize("bad", [
    {"problems": [{"name": "nope", "dims": [2]}]},
    {"problems": [{"name": "sphere", "dims": [2]}], "repetitions": 1},
    {"problems": [{"name": "sphere", "dims": [2]}], "algorithms": ["cmaes"]},
    {"problems": [{"name": "sphere", "dims": [2]}], "colour": "blue"},
    {"algorithms": ["bo"]},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(tiny_config(tmp_path))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg


def test_cli_list_problems(capsys):
    assert main(["list-problems"]) == 0
    out = capsys.readouterr().out
    assert "rastrigin\tadequate" in out and "gallagher\tweak" in out


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(tmp_path / "out", repetitions=2)))
    assert main(["run", "--config", str(cfg), "--seed", "4", "--reps", "2"]) == 0
    saved = json.loads((tmp_path / "out" / "config.json").read_text())
    assert saved["seed"] == 4
    (tmp_path / "out" / "summary.json").unlink()
    assert main(["summarize", "--input", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "summary.json").is_file()


def test_cli_paper_budget_flag(tmp_path, monkeypatch):
    seen = {}

    def fake_run(config):
        seen["scale"] = config.de_budget_scale
        return {"cells": [], "failed_runs": []}

    monkeypatch.setattr("pcabo.cli.run_experiment", fake_run)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(tmp_path)))
    assert main(["run", "--config", str(cfg), "--paper-budget"]) == 0
    assert seen["scale"] == 20020


def test_cli_config_errors(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"problems": [{"name": "nope", "dims": [2]}]}')
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["summarize", "--input", str(tmp_path / "nowhere")]) == 1


def test_cli_runtime_errors(tmp_path, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(tiny_config(blocker / "out")))
    assert main(["run", "--config", str(cfg)]) == 2

    monkeypatch.setitem(harness.ALGORITHMS, "pcabo", lambda *a, **k: 1 / 0)
    cfg.write_text(json.dumps(tiny_config(tmp_path / "out", repetitions=2)))
    assert main(["run", "--config", str(cfg)]) == 2
