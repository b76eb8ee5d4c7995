import json
from pathlib import Path

import pytest

from tubekernels import cli
from tubekernels import config as cfgmod
from tubekernels.errors import ConfigError, NumericalError

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = ROOT / "configs" / "default.toml"
POINT_QUERY = ROOT / "configs" / "point-query.toml"


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_shipped_configs_load():
    cfg = cfgmod.load(DEFAULT)
    assert cfg == cfgmod.ExperimentConfig()
    assert cfgmod.load(POINT_QUERY).kernel.lambdas == [200.0, 400.0]


def test_snapshot_round_trip():
    cfg = cfgmod.load(DEFAULT)
    assert cfgmod.from_snapshot(cfgmod.snapshot(cfg)) == cfg


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        cfgmod.load(write(tmp_path, "sed = 3\n"))
    with pytest.raises(ConfigError, match="scaling.near_graph"):
        cfgmod.load(write(tmp_path, "[scaling.near_graph]\nlambda = 3\n"))


def test_type_errors(tmp_path):
    with pytest.raises(ConfigError, match="expected an integer"):
        cfgmod.load(write(tmp_path, "seed = 1.5\n"))
    with pytest.raises(ConfigError):
        cfgmod.load(write(tmp_path, "seed = \n"))


@pytest.mark.parametrize("text,match", [
    ("[scaling]\nvalidity_eps_prime = 0.2\n", "1/6"),
    ("[scaling.diagonal.cutoff]\nepsilon = 1.2\n", "small-support"),
    ("[scaling.near_graph]\nt1 = 1.0\n", "outside the cutoff support"),
    ("[weyl.model]\nd = 3\ntau = 0.5\naction = \"subtorus\"\ngenerators = [[1, 0, 0], [0, 1, 0]]\nnu = [0, 0]\n",
     "d >= 2 d_G"),
    ("[rapid_decay]\nladder = [400.0, 100.0]\n", "increasing"),
    ("workers = 0\n", "workers"),
    ("[kernel.model]\naction = \"sphere\"\n", "action"),
])
def test_hypothesis_guards(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        cfgmod.load(write(tmp_path, text))


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        cfgmod.load("/nonexistent/config.toml")


def test_run_symplectic_check(tmp_path, capsys):
    code = cli.main(["run", "symplectic-check", str(DEFAULT), "-o", str(tmp_path)])
    assert code == cli.EXIT_OK
    rep = json.loads((tmp_path / "symplectic-check" / "report.json").read_text())
    assert rep["fits"]["passes"] == 100
    assert cfgmod.from_snapshot(rep["config_snapshot"]) == cfgmod.load(DEFAULT)
    assert "PASS symplectic-check" in capsys.readouterr().out


def test_run_kernel_point_query(tmp_path):
    assert cli.main(["run", "kernel", str(POINT_QUERY), "-o", str(tmp_path)]) == cli.EXIT_OK
    lines = (tmp_path / "kernel" / "kernel.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "lambda" and header[-4:] == ["re", "im", "n_modes", "trunc_bound"]
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "2.0000000000000000e+02"
    assert int(first[-2]) > 0
    # 17 significant digits
    assert len(first[-4].lstrip("-").split("e")[0].replace(".", "")) == 17


def test_rerun_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        cli.main(["run", "kernel", str(POINT_QUERY), "-o", str(tmp_path / name)])
    assert (tmp_path / "a/kernel/kernel.csv").read_bytes() == (tmp_path / "b/kernel/kernel.csv").read_bytes()


def test_config_error_exit_code(tmp_path):
    bad = write(tmp_path, "[scaling]\nvalidity_eps_prime = 0.5\n")
    assert cli.main(["run", "scaling", str(bad)]) == cli.EXIT_CONFIG


def test_numerical_guard_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise NumericalError("forced")

    monkeypatch.setitem(cli.EXPERIMENTS, "qsymbol", boom)
    assert cli.main(["run", "qsymbol", str(DEFAULT), "-o", str(tmp_path)]) == cli.EXIT_NUMERIC


def test_criterion_failure_exit_code(tmp_path):
    code = cli.main(["run", "qsymbol", str(DEFAULT), "-o", str(tmp_path), "--set", "qsymbol.tol=1e-9"])
    assert code == cli.EXIT_FAIL


def test_scalar_overrides(tmp_path):
    cfg = cli.load_config(str(DEFAULT), ["scaling.near_graph.lam=200", "seed=7", "output_dir=elsewhere"])
    assert cfg.scaling.near_graph.lam == 200.0 and cfg.seed == 7 and cfg.output_dir == "elsewhere"
    with pytest.raises(ConfigError, match="not a scalar"):
        cli.load_config(str(DEFAULT), ["weyl.ladder=[1.0, 2.0]"])
    with pytest.raises(ConfigError, match="unknown config key"):
        cli.load_config(str(DEFAULT), ["scaling.bogus=1"])
    with pytest.raises(ConfigError, match="1/6"):
        cli.load_config(str(DEFAULT), ["scaling.validity_eps_prime=0.3"])


def test_worker_count_from_environment(monkeypatch):
    cfg = cfgmod.ExperimentConfig()
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.resolve_workers(cfg) == 3
    monkeypatch.setenv(cli.WORKERS_ENV, "zero")
    with pytest.raises(ConfigError):
        cli.resolve_workers(cfg)
    monkeypatch.delenv(cli.WORKERS_ENV)
    assert cli.resolve_workers(cfg) == 1


def test_parallel_run_keeps_order():
    cfg = cfgmod.ExperimentConfig()
    reps = cli.run_experiments(["qsymbol", "symplectic-check"], cfg, workers=2)
    assert [r.experiment for r in reps] == ["qsymbol", "symplectic-check"]
