import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from decisionfp.errors import MissingArtifact, ParseError, ValidationError
from decisionfp.grids import Grid2
from decisionfp.harness.cli import main
from decisionfp.harness.config import config_from_dict, config_key_line, load_config
from decisionfp.harness.experiment import (RunRecord, config_hash, half_plane_masses, run_experiment,
                                           run_sweep)
from decisionfp.harness.plots import emit_plots
from decisionfp.harness.svg import heatmap, line_plot, read_table
from decisionfp.model import PRESETS

GOLDEN = Path(__file__).parent / "golden"
CONFIGS = Path(__file__).resolve().parents[1] / "src" / "decisionfp" / "configs"

TINY = """
seed = 2
backends = ["reduced", "fp2d"]

[model]
preset = "decision"

[grids]
nx = 24
ny = 24
n1d = 201
t_end = 600.0
dt_2d = 50.0
dt_1d = 50.0
snapshots = 1

[sde]
compare_nx = 8

[sweep]
delta_lambda = [0.0, 0.04]
w_plus = [2.5685, 2.5705]
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg = config_from_dict({**_tiny_dict(), "output_dir": str(root)})
    return run_experiment(cfg)


def _tiny_dict():
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(TINY)


# configuration

def test_defaults():
    cfg = config_from_dict({})
    assert cfg.model == PRESETS["decision"]
    assert cfg.delta_lambda == 0.01
    assert cfg.backends == ("reduced", "fp2d")
    assert cfg.grids.nx == 128 and cfg.sweep is None


def test_lambda2_sets_both_inputs():
    cfg = config_from_dict({"model": {"lambda2": 12.0}})
    assert cfg.model.lambda1 == cfg.model.lambda2 == 12.0


def test_alias_preset_is_resolved():
    assert config_from_dict({"model": {"preset": "paper-s2"}}).preset == "literal"


@pytest.mark.parametrize("data, field", [
    ({"colour": 1}, "colour"),
    ({"model": {"gain": 1.0}}, "model.gain"),
    ({"model": {"preset": "nope"}}, "model.preset"),
    ({"model": {"lambda1": 16.0}}, "model.lambda1"),
    ({"model": {"beta": -1.0}}, "beta"),
    ({"model": {"alpha": "four"}}, "model.alpha"),
    ({"grids": {"nx": 12.5}}, "grids.nx"),
    ({"grids": {"dt_2d": 0.0}}, "grids.dt_2d"),
    ({"grids": {"nx": 100}}, "sde.compare_nx"),
    ({"grids": 5}, "grids"),
    ({"sde": {"n_paths": 0}}, "sde.n_paths"),
    ({"sweep": {"w_plus": []}}, "sweep.w_plus"),
    ({"three_well": {"w_plus": 2.0}}, "three_well.w_plus"),
    ({"three_well": {"well_depth": 1.0}}, "three_well.well_depth"),
    ({"backends": ["gpu"]}, "backends"),
    ({"cases": ["sideways"]}, "cases"),
    ({"seed": -1}, "seed"),
])
def test_validation_names_the_field(data, field):
    with pytest.raises(ValidationError) as info:
        config_from_dict(data)
    assert info.value.field == field


def test_parse_error_has_a_line_number(tmp_path):
    path = write(tmp_path, "seed = 1\n[grids]\nnx = = 3\n")
    with pytest.raises(ParseError) as info:
        load_config(path)
    assert info.value.line == 3


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "absent.toml")


def test_key_line(tmp_path):
    path = write(tmp_path, TINY)
    assert config_key_line(path, "grids.n1d") == 11


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_shipped_configs_validate(name):
    load_config(CONFIGS / name)


def test_hash_ignores_output_dir():
    a = config_from_dict({"output_dir": "a"})
    b = config_from_dict({"output_dir": "b"})
    c = config_from_dict({"seed": 1})
    assert config_hash(a) == config_hash(b) != config_hash(c)


# experiment

def test_run_layout(tiny_run):
    run_dir = Path(tiny_run.run_dir)
    for name in ("config.json", "observables.csv", "comparison.csv", "sweep.csv", "record.json",
                 "unbiased/manifold.csv", "unbiased/profiles.csv", "biased/fp2d_final.csv",
                 "biased/fp2d_final.json"):
        assert (run_dir / name).exists(), name
    assert not tiny_run.failed
    assert run_dir.name == tiny_run.config_hash


def test_run_observables(tiny_run):
    red = tiny_run.report("biased", "reduced")
    assert red["reaction_time"] > 0 and 0.5 < red["performance"] <= 1.0
    assert tiny_run.report("unbiased", "reduced")["performance"] == pytest.approx(0.5, abs=1e-9)
    fp = tiny_run.report("unbiased", "fp2d")
    assert np.isnan(fp["reaction_time"])
    assert fp["details"]["mirror_asymmetry"] < 1e-8
    assert tiny_run.comparison("unbiased", "projection", "reduced") >= 0
    with pytest.raises(KeyError):
        tiny_run.report("unbiased", "sde")


def test_sweep_rows_are_in_index_order(tiny_run):
    rows = tiny_run.sweep
    assert [r["index"] for r in rows] == [0, 1, 2, 3]
    assert [(r["w_plus"], r["delta_lambda"]) for r in rows] == [(2.5685, 0.0), (2.5685, 0.04), (2.5705, 0.0),
                                                                (2.5705, 0.04)]
    assert all(r["status"] == "ok" for r in rows)
    table = read_table(Path(tiny_run.run_dir) / "sweep.csv")
    assert list(table) == ["index", "w_plus", "delta_lambda", "reaction_time", "performance", "n_wells",
                           "protocol", "status"]


def test_sweep_is_independent_of_worker_count():
    data = _tiny_dict()
    one = run_sweep(config_from_dict(data))
    data["sweep"]["workers"] = 3
    three = run_sweep(config_from_dict(data))
    assert one == three


def test_record_round_trip(tiny_run):
    loaded = RunRecord.load(tiny_run.run_dir)
    assert loaded.config_hash == tiny_run.config_hash
    assert loaded.reports == json.loads(json.dumps(tiny_run.reports, default=float))
    with pytest.raises(MissingArtifact):
        RunRecord.load(Path(tiny_run.run_dir) / "unbiased")


def test_manifest_hashes_match(tiny_run):
    from decisionfp.harness.experiment import sha256_file

    for rel, digest in tiny_run.manifest.items():
        assert sha256_file(Path(tiny_run.run_dir) / rel) == digest


def test_rerun_is_byte_identical(tiny_run, tmp_path):
    cfg = config_from_dict({**_tiny_dict(), "output_dir": str(tmp_path)})
    again = run_experiment(cfg)
    first = Path(tiny_run.run_dir)
    for path in sorted(first.rglob("*.csv")):
        rel = path.relative_to(first)
        assert (Path(again.run_dir) / rel).read_bytes() == path.read_bytes(), rel


def test_backend_failure_is_recorded(tmp_path):
    cfg = config_from_dict({"model": {"preset": "literal"}, "backends": ["reduced"], "cases": ["unbiased"],
                            "grids": {"nx": 16, "ny": 16}, "sde": {"compare_nx": 8},
                            "output_dir": str(tmp_path)})
    record = run_experiment(cfg)
    assert len(record.failed) == 1
    assert "NoSaddle" in record.failed[0]["status"]


def test_half_plane_masses():
    grid = Grid2(8, 8, 0.0, 8.0)
    v = np.zeros((8, 8))
    v[5, 1] = 1.0  # nu1 > nu2
    v[2, 2] = 1.0  # on the diagonal
    lead1, lead2 = half_plane_masses(v, grid)
    assert (lead1, lead2) == (1.5, 0.5)


# plots

def test_plots(tiny_run):
    files = emit_plots(tiny_run.run_dir)
    names = sorted(str(f.relative_to(tiny_run.run_dir)) for f in files)
    assert names == ["biased/heatmap.svg", "biased/overlay.svg", "sweep_performance.svg",
                     "sweep_reaction_time.svg", "unbiased/heatmap.svg", "unbiased/overlay.svg"]
    overlay = (Path(tiny_run.run_dir) / "unbiased" / "overlay.svg").read_text()
    assert overlay.count('class="curve"') == 3 and overlay.count('class="legend"') == 3
    assert "reduced 1D Fokker-Planck" in overlay
    assert "biased/overlay.svg" in RunRecord.load(tiny_run.run_dir).manifest


def test_plot_without_artifacts(tmp_path):
    (tmp_path / "record.json").write_text(json.dumps({"config_hash": "x"}))
    with pytest.raises(MissingArtifact):
        emit_plots(tmp_path)


def test_golden_line_plot():
    x = np.linspace(0.0, 1.0, 6)
    svg = line_plot([("a", x, x ** 2), ("b", x, 1 - x)], "demo", "x", "y", markers=True)
    assert svg == (GOLDEN / "line_plot.svg").read_text()


def test_golden_heatmap():
    v = np.outer(np.arange(4.0), np.arange(3.0) + 1)
    assert heatmap(v, (0.0, 4.0), "demo") == (GOLDEN / "heatmap.svg").read_text()


def test_empty_line_plot():
    with pytest.raises(MissingArtifact):
        line_plot([], "t", "x", "y")


# command line

def test_cli_validate(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, TINY))]) == 0
    assert json.loads(capsys.readouterr().out)["grids"]["nx"] == 24


def test_cli_config_errors(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, "[grids]\nnx = = 3\n"))]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["run", str(write(tmp_path, "[grids]\nwidth = 3\n", "b.toml"))]) == 2
    assert "grids.width" in capsys.readouterr().err
    assert main(["sweep", str(write(tmp_path, "seed = 1\n", "c.toml"))]) == 2


def test_cli_plot_missing(tmp_path):
    assert main(["plot", str(tmp_path)]) == 2


def test_cli_numerical_failure(tmp_path):
    text = f'output_dir = "{tmp_path}"\nbackends = ["reduced"]\ncases = ["unbiased"]\n' \
           '[model]\npreset = "literal"\n[grids]\nnx = 16\nny = 16\n[sde]\ncompare_nx = 8\n'
    assert main(["run", "--no-plots", str(write(tmp_path, text))]) == 3


def test_cli_sweep_and_plot(tmp_path, capsys):
    text = f'output_dir = "{tmp_path / "out"}"\n' + TINY
    assert main(["sweep", str(write(tmp_path, text))]) == 0
    run_dir = capsys.readouterr().out.splitlines()[0]
    assert (Path(run_dir) / "sweep_reaction_time.svg").exists()
    assert main(["plot", run_dir]) == 0


def test_entry_point_and_env_root(tmp_path):
    env = dict(os.environ, DECISIONFP_OUTPUT_ROOT=str(tmp_path / "env"))
    cfg = write(tmp_path, "[sweep]\ndelta_lambda = [0.0]\nw_plus = [2.5685]\n")
    proc = subprocess.run([sys.executable, "-m", "decisionfp.harness.cli", "sweep", "--no-plots", str(cfg)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert Path(proc.stdout.splitlines()[0]).parent == tmp_path / "env"
