import json
import math

import pytest

from branching_volterra.cli import main
from branching_volterra.config import (
    ConfigError,
    ExperimentConfig,
    parse_offspring,
    parse_test_function,
)

BASE_INI = """
[kernel]
hurst = 0.5
drift_mu = 0.0
intensity_lambda = 1.0
dim = 1

[branching]
offspring = deterministic(2)
rate_v = 1.0

[simulation]
grid_dt = 0.05
horizon_t = 3.0
snapshot_times = 1.0, 2.0, 3.0
root_seed = 42
replicates = 60
threads = 1
with_positions = false

[lln]
test_functions = box(-1, 1)

[kernel_table]
times = 1.0, 2.0
s_count = 4
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(BASE_INI + f"\n[output]\ndir = {tmp_path / 'out'}\nprefix = t\n")
    return path


# -- configuration -------------------------------------------------------------


def test_round_trip_is_stable():
    cfg = ExperimentConfig.from_ini(BASE_INI)
    text = cfg.to_ini()
    assert ExperimentConfig.from_ini(text).to_ini() == text


def test_overrides_take_precedence():
    cfg = ExperimentConfig.from_ini(BASE_INI, overrides=["kernel.hurst=0.7", "simulation.replicates=5"])
    assert cfg.kernel.hurst == 0.7
    assert cfg.replicates == 5


def test_validation_reports_key_path():
    with pytest.raises(ConfigError, match="kernel.hurst"):
        ExperimentConfig.from_ini(BASE_INI, overrides=["kernel.hurst=1.2"])
    with pytest.raises(ConfigError, match="branching.offspring"):
        ExperimentConfig.from_ini("[kernel]\nhurst=0.5\n")
    with pytest.raises(ConfigError, match="simulation.grid_dt"):
        ExperimentConfig.from_ini(BASE_INI, overrides=["simulation.grid_dt=0"])


def test_offspring_and_test_function_syntax():
    assert parse_offspring("poisson(2.0)").psi_prime1 == 2.0
    assert parse_offspring("table(0.5, 0.25, 0.25)").table == (0.5, 0.25, 0.25)
    f = parse_test_function("gaussian(2, 0.5)", dim=1)
    assert (f.amplitude, f.width) == (2.0, 0.5)
    f = parse_test_function("box(-1, 1)", dim=2)
    assert f.lo == (-1.0, -1.0)
    with pytest.raises(ConfigError):
        parse_offspring("binomial(2)")
    with pytest.raises(ConfigError):
        parse_test_function("box(-1, 1", dim=1)


# -- subcommands ----------------------------------------------------------------


def test_kernel_subcommand_brownian_column(config_path, tmp_path, capsys):
    assert main(["kernel", "-c", str(config_path)]) == 0
    rows = (tmp_path / "out" / "t_kernel.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    assert header == ["t", "s", "K", "sigma_sq", "sigma1_sq", "sigma2_sq"]
    for row in rows[1:]:
        vals = dict(zip(header, map(float, row.split(","))))
        assert vals["sigma_sq"] == vals["t"]  # exactly, for H = 1/2, mu = 0
        assert vals["K"] == 1.0
        assert vals["sigma1_sq"] + vals["sigma2_sq"] == pytest.approx(vals["t"], rel=1e-12)


def test_simulate_subcommand_count_summary(config_path, tmp_path, capsys):
    assert main(["simulate", "-c", str(config_path)]) == 0
    data = json.loads((tmp_path / "out" / "t_simulate.json").read_text())
    for mean, se, oracle in zip(data["mean_count"], data["se_count"], data["expected_count_oracle"]):
        assert abs(mean - oracle) < 3 * se
    assert data["root_seed"] == 42
    assert data["config"]["branching"]["offspring"] == "deterministic(2)"


def test_malformed_config_exits_2(config_path, capsys):
    code = main(["simulate", "-c", str(config_path), "--set", "kernel.hurst=1.2"])
    assert code == 2
    assert "kernel.hurst" in capsys.readouterr().err


def test_capped_run_exits_3(config_path, capsys):
    code = main([
        "simulate", "-c", str(config_path),
        "--set", "simulation.max_particles=8",
        "--set", "simulation.horizon_t=30.0",
        "--set", "simulation.snapshot_times=30.0",
        "--set", "simulation.replicates=1",
    ])
    assert code == 3


def test_moments_subcommand(config_path, tmp_path, capsys):
    assert main(["moments", "-c", str(config_path), "--set", "moments.t=1.0"]) == 0
    data = json.loads((tmp_path / "out" / "t_moments.json").read_text())
    assert data["expected_count"] == pytest.approx(math.e)
    assert data["functionals"][0]["conditional_variance"] >= 0.0


def test_conditions_subcommand(config_path, tmp_path):
    assert main(["conditions", "-c", str(config_path), "--set", "lln.probe_times=32,64,128"]) == 0
    data = json.loads((tmp_path / "out" / "t_conditions.json").read_text())
    assert data["decay_decreasing"] and data["memory_cut_decreasing"]
    csv_rows = (tmp_path / "out" / "t_conditions.csv").read_text().strip().splitlines()
    assert len(csv_rows) == 4


def test_lln_subcommand_pass_and_violation(config_path, tmp_path, capsys):
    args = [
        "lln", "-c", str(config_path),
        "--set", "simulation.with_positions=true",
        "--set", "simulation.snapshot_times=3.0",
        "--set", "simulation.replicates=48",
        "--set", "lln.ratio_rel_tol=0.2",
    ]
    assert main(args) == 0
    data = json.loads((tmp_path / "out" / "t_lln.json").read_text())
    assert data["pass"] and data["reports"][0]["n_surviving"] == 48
    # absurdly tight tolerance must flag a violation (exit 1)
    assert main(args[:-2] + ["--set", "lln.ratio_rel_tol=1e-9"]) == 1


def test_thread_count_does_not_change_artifacts(config_path, tmp_path):
    base = [
        "lln", "-c", str(config_path),
        "--set", "simulation.with_positions=true",
        "--set", "simulation.snapshot_times=3.0",
        "--set", "simulation.replicates=32",
    ]
    assert main(base + ["--threads", "1", "--output", str(tmp_path / "a")]) == 0
    assert main(base + ["--threads", "6", "--output", str(tmp_path / "b")]) == 0
    for name in ("t_lln.json", "t_lln.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_snapshot_and_event_dumps(config_path, tmp_path):
    assert main([
        "simulate", "-c", str(config_path),
        "--set", "simulation.replicates=3",
        "--set", "simulation.with_positions=true",
        "--set", "output.dump_snapshots=true",
        "--set", "output.dump_events=true",
    ]) == 0
    csv_rows = (tmp_path / "out" / "t_snapshots.csv").read_text().strip().splitlines()
    assert csv_rows[0] == "replicate,t,particle_id,generation,x_1"
    assert len(csv_rows) > 3
    events = [json.loads(line) for line in (tmp_path / "out" / "t_events.jsonl").read_text().splitlines()]
    assert {"birth", "death"} >= {e["type"] for e in events}
    roots = [e for e in events if e["type"] == "birth" and e["id"] == "1"]
    assert len(roots) == 3  # one root per replicate
