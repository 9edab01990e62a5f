import csv
import math
import subprocess
import sys

import pytest
import yaml

import vqc_bsde.experiments as ex
from vqc_bsde.cli import main
from vqc_bsde.config import RunConfig, dump_config, load_config
from vqc_bsde.problems import BlackScholesParams, bs_closed_form
from vqc_bsde.solver import DivergenceError

TINY = {"num_paths": 40, "batch_size": 20, "epochs": 1, "num_steps": 2}


def write_config(tmp_path, name="c.yaml", **sections):
    data = {"schema_version": "1", **sections}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_rows(path):
    with path.open(newline="", encoding="utf-8") as fh:
        header, *rows = list(csv.reader(fh))
    return header, rows


def test_init_round_trip(tmp_path, capsys):
    path = tmp_path / "t.yaml"
    assert main(["init", "--config", str(path)]) == 0
    assert load_config(path) == RunConfig()
    assert path.read_text() == dump_config(RunConfig())
    assert main(["init", "--config", str(path)]) == 2
    assert main(["init", "--config", str(path), "--force"]) == 0


def test_oracle_single_strike(tmp_path):
    cfg = write_config(tmp_path, problem={"dim": 1},
                       sweep={"strikes": [100.0], "option_types": ["call"]})
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    header, rows = read_rows(tmp_path / "o" / "oracle.csv")
    assert header == ["sweep_value", "option_type_or_lambda", "oracle", "oracle_stderr"]
    assert len(rows) == 1
    assert float(rows[0][2]) == bs_closed_form(BlackScholesParams(num_options=1), 1.0)


def test_oracle_hjb_seeds_agree(tmp_path):
    cfg = write_config(tmp_path, problem={"family": "hjb", "dim": 100},
                       oracle={"mc_samples": 100_000}, sweep={"lambdas": [1.0]})
    estimates = []
    for seed in (1, 2):
        out = tmp_path / f"o{seed}"
        assert main(["oracle", "--config", cfg, "--out", str(out),
                     "--seed-override", str(seed)]) == 0
        _, rows = read_rows(out / "oracle.csv")
        estimates.append((float(rows[0][2]), float(rows[0][3])))
    (a, sa), (b, sb) = estimates
    assert a != b and abs(a - b) <= 4 * math.hypot(sa, sb)


@pytest.mark.parametrize("command", ["oracle", "train", "sweep"])
def test_malformed_config(tmp_path, command, capsys):
    cfg = write_config(tmp_path, problem={"strik": 100})
    out = tmp_path / "out"
    assert main([command, "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()
    assert "strik" in capsys.readouterr().out


def test_missing_config_flag(tmp_path):
    assert main(["train", "--out", str(tmp_path / "x")]) == 2


def test_train_constant(tmp_path, capsys):
    cfg = write_config(tmp_path, problem={"family": "constant", "dim": 2, "constant_value": 4.0},
                       model={"arch": "mlp", "hidden": [4]},
                       solver={"num_paths": 1000, "batch_size": 100, "epochs": 20})
    out = tmp_path / "run"
    assert main(["train", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_rows(out / "train_summary.csv")
    summary = dict(zip(header, rows[0]))
    assert float(summary["rel_err"]) <= 1e-3
    assert (out / "checkpoint.npz").exists()
    header, losses = read_rows(out / "losses.csv")
    assert header == ["iteration", "loss"] and len(losses) == 200
    assert "rel_err=" in capsys.readouterr().out


def test_train_black_scholes_one_dimension(tmp_path):
    cfg = write_config(tmp_path, problem={"dim": 1}, model={"arch": "mlp"})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    header, rows = read_rows(tmp_path / "r" / "train_summary.csv")
    assert float(dict(zip(header, rows[0]))["rel_err"]) <= 0.02


def test_train_divergence_exit(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise DivergenceError("non-finite loss", 0)
    monkeypatch.setattr("vqc_bsde.cli.run_single", boom)
    cfg = write_config(tmp_path, problem={"dim": 1})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 1


def test_sweep_one_value_one_seed(tmp_path):
    cfg = write_config(tmp_path, problem={"dim": 1}, model={"arch": "vqc", "n_qubits": 2},
                       solver=TINY, sweep={"strikes": [100.0], "option_types": ["put"],
                                           "repetitions": 1})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert len(read_rows(tmp_path / "s" / "results.csv")[1]) == 1
    assert len(read_rows(tmp_path / "s" / "summary.csv")[1]) == 1


def test_sweep_exit_codes(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, problem={"dim": 1}, model={"arch": "mlp", "hidden": [2]},
                       solver=TINY, sweep={"strikes": [100.0], "option_types": ["call"],
                                           "repetitions": 4})
    real = ex.train

    def some_fail(spec, config, approx, oracle_value=None):
        if config.seed % 2:
            raise DivergenceError("boom", 0)
        return real(spec, config, approx, oracle_value)

    monkeypatch.setattr(ex, "train", some_fail)
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "p")])
    _, rows = read_rows(tmp_path / "p" / "results.csv")
    statuses = {r[-1] for r in rows}
    assert statuses == {"ok", "failed"} and code == 3

    def all_fail(*a, **k):
        raise DivergenceError("boom", 0)

    monkeypatch.setattr(ex, "train", all_fail)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "f")]) == 1


@pytest.mark.parametrize("command,files", [
    ("train", ["losses.csv", "train_summary.csv"]),
    ("sweep", ["results.csv", "summary.csv"]),
])
def test_byte_identical_reruns(tmp_path, command, files):
    cfg = write_config(tmp_path, problem={"dim": 2}, model={"arch": "vqc", "n_qubits": 2},
                       solver=TINY, sweep={"strikes": [90.0, 110.0], "repetitions": 2})
    for out in ("a", "b"):
        assert main([command, "--config", cfg, "--out", str(tmp_path / out)]) == 0
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_workers_do_not_change_bytes(tmp_path):
    cfg = write_config(tmp_path, problem={"family": "hjb", "dim": 2},
                       model={"arch": "mlp", "hidden": [3]}, solver=TINY,
                       oracle={"mc_samples": 200}, sweep={"lambdas": [1.0, 5.0], "repetitions": 2})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("results.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vqc_bsde", "sweep", "--config",
                           str(tmp_path / "nope.yaml")], capture_output=True, text=True)
    assert proc.returncode == 2 and "config error" in proc.stdout
