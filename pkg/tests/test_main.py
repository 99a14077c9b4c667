import json
from pathlib import Path

import pandas as pd
import pytest

from main import EXIT_CONFIG
from main import EXIT_FAILURE
from main import EXIT_OK
from main import apply_overrides
from main import build_parser
from main import main
from src.data.config_loader import ConfigLoader
from src.models.experiment import ExperimentKind

WORK_CONFIG = """\
[experiment]
kind = work_sweep
backend = exact
g_grid = 0.0, 0.1

[protocol]
n_steps = 5
"""


def _config(tmp_path: Path, text: str = WORK_CONFIG) -> str:
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_validate_accepts_good_config(tmp_path, capsys):
    path = _config(tmp_path)
    assert main(["validate", path]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{path}: ok"


def test_validate_lists_diagnostics(tmp_path, capsys):
    path = _config(tmp_path, "[experiment]\nkind = work_sweep\nbogus = 1\n")
    assert main(["validate", path]) == EXIT_CONFIG
    assert f"{path}: experiment.bogus: unknown key" in capsys.readouterr().out


def test_run_with_invalid_config_exits_with_config_code(tmp_path, capsys):
    path = _config(tmp_path, "[experiment]\nkind = cl_fig1\n")
    assert main(["run", path]) == EXIT_CONFIG
    assert capsys.readouterr().out.startswith("Error: backend:")


def test_run_writes_csv_and_sidecar(tmp_path, capsys):
    output = tmp_path / "results" / "work.csv"
    code = main(["--log-level", "WARNING", "run", _config(tmp_path), "--output", str(output), "--seed", "4"])
    assert code == EXIT_OK

    frame = pd.read_csv(output, comment="#")
    assert list(frame["g"]) == [0.0, 0.1]
    document = json.loads(output.with_name("work.csv.json").read_text(encoding="utf-8"))
    assert document["config"]["seed"] == 4
    assert document["invariants"]["failed"] == 0
    assert "Invariants: 2/2 passed" in capsys.readouterr().out


def test_runner_config_error_exits_with_config_code(tmp_path, capsys):
    path = _config(
        tmp_path,
        "[experiment]\nkind = cl_equilibration\nbackend = gaussian\ng_grid = 0.0, 0.5\n",
    )
    assert main(["run", path, "--output", str(tmp_path / "eq.csv")]) == EXIT_CONFIG
    assert "cl_equilibration needs every g > 0" in capsys.readouterr().out


def test_unwritable_output_exits_with_failure_code(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert main(["run", _config(tmp_path), "--output", str(blocker / "out.csv")]) == EXIT_FAILURE
    assert capsys.readouterr().out.startswith("Error:")


def test_overrides_prefer_flags_over_environment(monkeypatch):
    monkeypatch.setenv("QTHERMO_THREADS", "3")
    config = ConfigLoader.create_sample_config(ExperimentKind.WORK_SWEEP)

    args = build_parser().parse_args(["run", "x.ini"])
    assert apply_overrides(config, args).threads == 3

    args = build_parser().parse_args(["run", "x.ini", "--threads", "2", "--seed", "9", "--output", "o.csv"])
    overridden = apply_overrides(config, args)
    assert (overridden.threads, overridden.seed, overridden.output.path) == (2, 9, "o.csv")


def test_config_threads_beat_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QTHERMO_THREADS", "3")
    text = WORK_CONFIG.replace("backend = exact", "backend = exact\nthreads = 4")
    config = ConfigLoader.load_from_file(_config(tmp_path, text))

    assert apply_overrides(config, build_parser().parse_args(["run", "x.ini"])).threads == 4
    assert apply_overrides(config, build_parser().parse_args(["run", "x.ini", "--threads", "2"])).threads == 2


def test_environment_threads_fill_unset_config(tmp_path, monkeypatch):
    monkeypatch.setenv("QTHERMO_THREADS", "3")
    config = ConfigLoader.load_from_file(_config(tmp_path))
    assert "threads" not in config.model_fields_set
    assert apply_overrides(config, build_parser().parse_args(["run", "x.ini"])).threads == 3

    monkeypatch.delenv("QTHERMO_THREADS")
    assert apply_overrides(config, build_parser().parse_args(["run", "x.ini"])).threads == 1


def test_overrides_are_validated(monkeypatch):
    monkeypatch.delenv("QTHERMO_THREADS", raising=False)
    config = ConfigLoader.create_sample_config(ExperimentKind.WORK_SWEEP)
    assert apply_overrides(config, build_parser().parse_args(["run", "x.ini"])) is config
    args = build_parser().parse_args(["run", "x.ini", "--seed", "-1"])
    with pytest.raises(ValueError):
        apply_overrides(config, args)
