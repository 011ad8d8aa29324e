import csv
import json

import pytest

from rankalloc import cli, experiment, metrics
from rankalloc.cli import main

SMALL = """\
workload: {horizon: 20}
scenarios:
  HIGH_LOAD: {}
  TIGHT_DEADLINES: {max_interarrival: 3.0, deadline_scale: 1.2}
learner: {train_every: 5, epochs: 2}
experiment:
  bidders: [heuristic_b2, regression, ranking]
  seeds: {base: 0, count: 20}
  charts: false
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_everything(tmp_path, small_cfg):
    out = tmp_path / "o"
    assert main(["run", "--config", str(small_cfg), "--out", str(out)]) == 0
    runs = _rows(out / "runs.csv")
    assert len(runs) == 2 * 3 * 20
    man = json.loads((out / "manifest.json").read_text())
    assert man["complete"] and man["version"] and len(man["config_hash"]) == 64
    assert len(_rows(out / "aggregate.csv")) == 6
    assert len(_rows(out / "paired.csv")) == 2 * 20 * 4
    assert len(_rows(out / "tradeoff.csv")) == 2 * 3
    slope = _rows(out / "slope.csv")
    assert {r["seed"] for r in slope} == {str(s) for s in range(20)}
    # every distribution value re-joins to its runs.csv cell
    by_key = {(r["scenario"], r["bidder"], r["seed"]): r for r in runs}
    dist = _rows(out / "distribution.csv")
    assert len(dist) == len(runs) * 4
    for d in dist:
        assert float(d["value"]) == float(by_key[d["scenario"], d["bidder"], d["seed"]][d["metric"]])
    trade = {(r["scenario"], r["bidder"]): r for r in _rows(out / "tradeoff.csv")}
    arrow = trade["HIGH_LOAD", "heuristic_b2"]
    assert float(arrow["arrow_to_energy"]) == float(trade["HIGH_LOAD", "ranking"]["energy_mean"])


def test_rerun_byte_identical(tmp_path, small_cfg):
    for d in ("a", "b"):
        assert main(["run", "--config", str(small_cfg), "--out", str(tmp_path / d), "--seeds", "4"]) == 0
    for name in ("runs.csv", "aggregate.csv", "paired.csv", "distribution.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bidder_isolation(tmp_path, small_cfg):
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "all"), "--seeds", "3"])
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "two"), "--seeds", "3",
          "--bidder", "heuristic_b2", "--bidder", "ranking"])
    full = (tmp_path / "all" / "runs.csv").read_text().splitlines()
    two = (tmp_path / "two" / "runs.csv").read_text().splitlines()
    assert two == [line for line in full if ",regression," not in line]


def test_charts_rendered(tmp_path, small_cfg):
    out = tmp_path / "o"
    assert main(["run", "--config", str(small_cfg), "--out", str(out), "--seeds", "2", "--scenario", "HIGH_LOAD"]) == 0
    assert main(["figures", "--out", str(out)]) == 0
    for name in ("distribution.svg", "slope.svg", "tradeoff.svg"):
        assert (out / name).read_text().lstrip().startswith("<?xml")


def test_figures_reemit_identical(tmp_path, small_cfg):
    out = tmp_path / "o"
    main(["run", "--config", str(small_cfg), "--out", str(out), "--seeds", "3"])
    before = {n: (out / n).read_bytes() for n in ("distribution.csv", "slope.csv", "tradeoff.csv")}
    for n in before:
        (out / n).unlink()
    assert main(["figures", "--out", str(out), "--no-charts"]) == 0
    assert before == {n: (out / n).read_bytes() for n in before}


def test_env_var_sets_output(tmp_path, small_cfg, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--config", str(small_cfg), "--seeds", "2", "--bidder", "heuristic_b2"]) == 0
    assert (tmp_path / "env" / "runs.csv").exists()
    assert main(["run", "--config", str(small_cfg), "--seeds", "2", "--bidder", "heuristic_b2",
                 "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "runs.csv").exists()


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("bidding:\n  alpha: oops\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "bad.yaml:2" in capsys.readouterr().err
    assert main(["run", "--seeds", "x"]) == 1


def test_partial_failure_keeps_files(tmp_path, small_cfg, monkeypatch):
    real = experiment.run_cell
    calls = []

    def flaky(*args, **kw):
        calls.append(1)
        if len(calls) == 4:
            raise RuntimeError("boom")
        return real(*args, **kw)

    monkeypatch.setattr(experiment, "run_cell", flaky)
    out = tmp_path / "o"
    assert main(["run", "--config", str(small_cfg), "--out", str(out), "--seeds", "3"]) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["complete"] is False and "boom" in man["error"]
    assert len(metrics.read_runs(out / "runs.csv")) == 3 == man["cells_done"]


def test_figures_without_runs(tmp_path):
    assert main(["figures", "--out", str(tmp_path)]) == 2


def test_oracle_exit_codes(monkeypatch):
    assert main(["oracle", "--instances", "30"]) == 0
    monkeypatch.setattr(cli.oracle, "check_equivalence", lambda *a, **k: ["instance 0 differs"])
    assert main(["oracle", "--instances", "1"]) == 3


def test_print_defaults(capsys):
    assert main(["run", "--print-defaults"]) == 0
    text = capsys.readouterr().out
    assert main(["defaults"]) == 0
    assert capsys.readouterr().out == text
    for key in ("alpha", "lambda", "gamma1", "psi", "train_every", "recon_weight", "max_interarrival"):
        assert f"{key}:" in text


def test_parse_seeds():
    assert cli.parse_seeds("3") == (0, 1, 2)
    assert cli.parse_seeds("5-7") == (5, 6, 7)
    assert cli.parse_seeds("2,9") == (2, 9)


def test_parallel_matches_serial(tmp_path, small_cfg):
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "s"), "--seeds", "2"])
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "p"), "--seeds", "2", "--jobs", "2"])
    assert (tmp_path / "s" / "runs.csv").read_bytes() == (tmp_path / "p" / "runs.csv").read_bytes()
