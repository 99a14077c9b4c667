from pathlib import Path

import pytest

from src.data.config_loader import ConfigLoader
from src.models.errors import ConfigValidationError
from src.models.experiment import Backend
from src.models.experiment import ExperimentKind
from src.models.gaussian import EquilibrationMode

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path: Path, text: str) -> str:
    path = tmp_path / "experiment.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    assert ConfigLoader.validate(str(path)) == []
    assert ConfigLoader.load_from_file(str(path)).kind.value == path.stem


def test_load_parses_grid_and_blocks(tmp_path):
    config = ConfigLoader.load_from_file(
        _write(
            tmp_path,
            "[experiment]\nkind = cl_fig1\nbackend = gaussian\ng_grid = 0.1, 0.5,\n  1.0\nseed = 3\n\n"
            "[protocol]\nmode = gibbs_replacement\nn_steps = 10\n",
        )
    )
    assert config.kind == ExperimentKind.CL_FIG1
    assert config.backend == Backend.GAUSSIAN
    assert config.g_grid == [0.1, 0.5, 1.0]
    assert config.seed == 3
    assert config.protocol.mode == EquilibrationMode.GIBBS_REPLACEMENT
    assert config.protocol.n_steps == 10


def test_empty_value_falls_back_to_default(tmp_path):
    config = ConfigLoader.load_from_file(
        _write(tmp_path, "[experiment]\nkind = work_sweep\n\n[protocol]\nmode =\n")
    )
    assert config.protocol.mode is None


def test_every_problem_is_reported(tmp_path):
    problems = ConfigLoader.validate(
        _write(
            tmp_path,
            "[experiment]\nkind = work_sweep\ng_grid = 0.2, 0.1\ncolour = blue\n\n"
            "[thermal]\nbeta = -1\n\n[extras]\nx = 1\n",
        )
    )
    assert "experiment.colour: unknown key" in problems
    assert "[extras]: unknown section" in problems
    assert any(problem.startswith("experiment.g_grid:") and "ascending" in problem for problem in problems)
    assert any(problem.startswith("thermal.beta:") for problem in problems)


def test_missing_kind_is_reported(tmp_path):
    problems = ConfigLoader.validate(_write(tmp_path, "[experiment]\nseed = 1\n"))
    assert any(problem.startswith("experiment.kind:") for problem in problems)


def test_backend_mismatch_is_reported(tmp_path):
    problems = ConfigLoader.validate(_write(tmp_path, "[experiment]\nkind = cl_fig1\nbackend = exact\n"))
    assert problems == ["backend: experiment cl_fig1 needs the gaussian backend"]


def test_non_numeric_grid(tmp_path):
    problems = ConfigLoader.validate(_write(tmp_path, "[experiment]\nkind = work_sweep\ng_grid = a, b\n"))
    assert problems[0].startswith("experiment.g_grid: not a comma-separated list")


def test_hot_bath_must_be_hotter(tmp_path):
    problems = ConfigLoader.validate(
        _write(tmp_path, "[experiment]\nkind = carnot_sweep\n\n[thermal]\nbeta_hot = 2.0\nbeta_cold = 1.0\n")
    )
    assert any("beta_hot must be smaller than beta_cold" in problem for problem in problems)


def test_unreadable_and_malformed_files(tmp_path):
    assert ConfigLoader.validate(str(tmp_path / "missing.ini"))[0].startswith("file: cannot read")
    assert ConfigLoader.validate(_write(tmp_path, "kind = work_sweep\n"))[0].startswith("file: malformed config")


def test_load_raises_with_diagnostics(tmp_path):
    with pytest.raises(ConfigValidationError) as excinfo:
        ConfigLoader.load_from_file(_write(tmp_path, "[experiment]\nkind = nonsense\n"))
    assert excinfo.value.diagnostics[0].startswith("experiment.kind:")


@pytest.mark.parametrize("kind", list(ExperimentKind))
def test_sample_configs_survive_ini_rendering(tmp_path, kind):
    sample = ConfigLoader.create_sample_config(kind)
    loaded = ConfigLoader.load_from_file(_write(tmp_path, ConfigLoader.to_ini(sample)))
    assert loaded == sample
