import json
import subprocess
import sys

import numpy as np
import pytest

from selfish_mmab.env import ConfigError
from selfish_mmab.harness import RunConfig, main, make_players, run_batch, write_outputs

SMALL = dict(algo="sic-gt", K=4, M=2, T=3000, means=[0.9, 0.7, 0.4, 0.2], n_seeds=3)


def test_batch_is_deterministic():
    a, sa = run_batch(RunConfig(**SMALL))
    b, sb = run_batch(RunConfig(**SMALL))
    assert a == b and sa == sb
    header = a.splitlines()[0].split(",")
    assert header[:8] == ["run_id", "seed", "algo", "K", "M", "T", "t", "cum_regret"]
    assert header[-2:] == ["punish_round", "phase"]


def test_workers_do_not_change_output():
    one, _ = run_batch(RunConfig(**SMALL))
    two, _ = run_batch(RunConfig(**SMALL, workers=2))
    assert one == two


def test_written_files_are_identical(tmp_path):
    paths = []
    for name in ("a", "b"):
        csv_text, summary = run_batch(RunConfig(**SMALL))
        paths.append(write_outputs(csv_text, summary, str(tmp_path / name)))
    for x, y in zip(*paths):
        assert open(x, "rb").read() == open(y, "rb").read()


@pytest.mark.parametrize("change,field", [
    (dict(M=5), "M"),
    (dict(algo="nope"), "algo"),
    (dict(sensing="statistic"), "sensing"),
    (dict(delta=0.1), "delta"),
    (dict(means=[0.9, 0.7]), "means"),
    (dict(means="random:0.5"), "means"),
    (dict(adversary={"kind": "ghost"}), "adversary"),
    (dict(checkpoints=[0]), "checkpoints"),
    (dict(algo="rsd-gt", delta=0.6), "delta"),
])
def test_validation_names_field(change, field):
    with pytest.raises(ConfigError) as e:
        RunConfig(**{**SMALL, **change}).validate()
    assert e.value.field == field


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict({"algo": "sic-gt", "horizon": 5})
    assert e.value.field == "horizon"


def test_mean_generators():
    cfg = RunConfig(K=4, means="uniform-gaps:0.9:0.2")
    assert cfg.build_means() == pytest.approx([0.9, 0.7, 0.5, 0.3])
    r = RunConfig(K=6, means="random:0.1").build_means()
    assert np.all(np.diff(r) <= -0.1 + 1e-12)
    h = RunConfig(algo="rsd-gt", K=4, M=2, delta=0.05, means=[0.9, 0.7, 0.4, 0.2]).build_means()
    assert h.shape == (2, 4)


def test_adversary_placed_last_by_default():
    cfg = RunConfig(**{**SMALL, "adversary": {"kind": "jammer", "arm": 1}})
    players = make_players(cfg)
    assert players[-1].name == "jammer" and players[0].name == "sic-gt"


def test_cli_bad_config_exit_code(capsys):
    assert main(["run", "--algo", "sic-gt", "--K", "3", "--M", "4", "--T", "100"]) == 2
    assert "invalid configuration: M:" in capsys.readouterr().err


def test_cli_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"algo": "sic-gt", "bogus": 1}))
    assert main(["run", "--config", str(p)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_cli_run_with_report(tmp_path):
    out = tmp_path / "runs" / "r"
    code = main(["run", "--algo", "sic-gt", "--K", "4", "--M", "2", "--T", "2000",
                 "--means", "0.9,0.7,0.4,0.2", "--seeds", "2", "--out", str(out), "--report"])
    assert code == 0
    assert (tmp_path / "runs" / "r.csv").exists() and (tmp_path / "runs" / "r.json").exists()
    assert list((tmp_path / "runs").glob("*.png"))
    summary = json.loads((tmp_path / "runs" / "r.json").read_text())
    assert summary["n_runs"] == 2


def test_cli_rsd_benchmark(tmp_path, capsys):
    p = tmp_path / "mu.json"
    p.write_text(json.dumps([[0.9, 0.5, 0.0], [0.8, 0.6, 0.0]]))
    assert main(["rsd-benchmark", "--means-file", str(p), "--samples", "1000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["exact"]["welfare"] == pytest.approx(1.4)


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "selfish_mmab.harness", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "rsd-benchmark" in proc.stdout
