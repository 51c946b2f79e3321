import json

import pytest

from psndyn import cli, io
from psndyn.errors import UsageError

SMALL = """
[experiment]
duration = 60.0
n_nodes = 8
[perturbation]
perturb_interval = 20.0
perturb_burst = 5.0
[analysis]
window = 2.0
embed_delay = 2
theiler = 10
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def test_parse_simulate():
    ns = cli.parse_args(["simulate", "--config", "paper.cfg", "--duty", "0.4", "--out", "x"])
    assert (ns.command, ns.duty, ns.config) == ("simulate", 0.4, "paper.cfg")


def test_parse_sweep_grid():
    ns = cli.parse_args(["sweep", "--grid", "0.1:0.8:0.1", "--perturb", "both", "--out", "x"])
    assert ns.grid == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    assert cli._perturb_flags(ns.perturb) == [False, True]
    assert cli.parse_grid("0.2,0.5") == [0.2, 0.5]


@pytest.mark.parametrize("argv", [
    ["simulate", "--duty", "1.5", "--out", "x"],
    ["sweep", "--grid", "0.5:0.1:0.1", "--out", "x"],
    ["sweep", "--grid", "0.1:1.2:0.5", "--out", "x"],
    ["sweep", "--perturb", "sometimes", "--out", "x"],
    ["pca"],
    ["explode"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(UsageError):
        cli.parse_args(argv)
    assert cli.main(argv) == 2
    assert "usage error" in capsys.readouterr().err


def test_simulate_pca_transitions(tmp_path, cfg):
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", cfg, "--duty", "0.7", "--perturb", "on", "--out", str(out)]) == 0
    man = io.read_manifest(out)
    assert man["kind"] == "run" and man["complete"] and man["seed"] == 0
    assert set(man["artifacts"]) >= {"cwnd.csv", "events.csv", "counters.csv"}
    assert cli.main(["pca", "--run", str(out), "--flows", "0,3"]) == 0
    rows = io.read_csv(out / "pca" / "duty_0.70_perturbed_flow03.csv")
    assert len(rows) == 30 and list(rows[0]) == ["window_index", "pc1", "pc2", "perturbed_flag"]
    assert {r["perturbed_flag"] for r in rows} == {"0", "1"}
    assert cli.main(["transitions", "--run", str(out), "--flows", "3"]) == 0
    dot = out / "graphs" / "duty_0.70_perturbed_flow03.dot"
    assert dot.read_text().startswith("digraph flow3 {")
    assert (out / "transitions.manifest.json").exists()


def test_rerun_reproduces_hashes_and_guards(tmp_path, cfg):
    out = tmp_path / "run"
    argv = ["simulate", "--config", cfg, "--duty", "0.5", "--out", str(out)]
    assert cli.main(argv) == 0
    first = io.read_manifest(out)["artifacts"]
    assert cli.main(argv) == 0
    assert io.read_manifest(out)["artifacts"] == first
    other = ["simulate", "--config", cfg, "--duty", "0.6", "--out", str(out)]
    assert cli.main(other) == 2
    assert cli.main(other + ["--force"]) == 0
    assert io.read_manifest(out)["config"]["duty"] == 0.6


def test_sweep_and_report(tmp_path, cfg, capsys):
    out = tmp_path / "sweep"
    argv = ["sweep", "--config", cfg, "--grid", "0.2,0.8", "--perturb", "both", "--out", str(out)]
    assert cli.main(argv) == 0
    man = io.read_manifest(out)
    assert len(man["cells"]) == 4 and man["complete"]
    assert cli.main(["stats", "--run", str(out)]) == 0
    rows = io.read_csv(out / "stats.csv")
    assert list(rows[0]) == ["flow", "duty", "sent", "dropped", "throughput", "n_states", "n_dims_99", "lyapunov"]
    assert len(rows) == 16 and len(io.read_csv(out / "stats_perturbed.csv")) == 16
    assert cli.main(["bifurcation", "--run", str(out), "--flows", "5"]) == 0
    assert {r["flow"] for r in io.read_csv(out / "bifurcation.csv")} == {"5"}
    capsys.readouterr()
    assert cli.main(["report", "--run", str(out), "--no-lyapunov"]) == 0
    table = capsys.readouterr().out
    assert "min_throughput" in table
    rep = out / "report"
    for name in ("event_trace.csv", "transit.csv", "bifurcation.csv", "pca_trajectories.csv",
                 "states_drops_dims.csv", "throughput.csv", "correlations.csv", "summary.csv"):
        assert (rep / name).exists(), name
    thr = io.read_csv(rep / "throughput.csv")
    assert all(r["throughput_perturbed"] and r["throughput_plain"] for r in thr)
    rm = json.loads((out / "report.manifest.json").read_text())
    assert rm["complete"] and len(rm["artifacts"]) == 10


def test_missing_run_dir(tmp_path, capsys):
    assert cli.main(["stats", "--run", str(tmp_path / "nope")]) == 1
    assert "error" in capsys.readouterr().err
