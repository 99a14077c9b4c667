import configparser
import logging
from pathlib import Path

from pydantic import ValidationError

from src.models.errors import ConfigValidationError
from src.models.experiment import GAUSSIAN_EXPERIMENTS
from src.models.experiment import Backend
from src.models.experiment import BathBlock
from src.models.experiment import ExperimentConfig
from src.models.experiment import ExperimentKind
from src.models.experiment import OutputBlock
from src.models.experiment import ProtocolBlock
from src.models.experiment import SystemBlock
from src.models.experiment import ThermalBlock

logger = logging.getLogger(__name__)

TOP_LEVEL_SECTION = "experiment"
BLOCK_SECTIONS = {
    "system": SystemBlock,
    "bath": BathBlock,
    "thermal": ThermalBlock,
    "protocol": ProtocolBlock,
    "output": OutputBlock,
}
TOP_LEVEL_KEYS = {"kind", "backend", "g_grid", "seed", "threads"}


def _parse_grid(raw: str) -> list[float]:
    return [float(item) for item in raw.replace("\n", ",").split(",") if item.strip()]


def _location(loc: tuple) -> str:
    parts = [str(part) for part in loc]
    if parts and parts[0] not in BLOCK_SECTIONS:
        parts.insert(0, TOP_LEVEL_SECTION)
    return ".".join(parts)


class ConfigLoader:

    @staticmethod
    def read_sections(file_path: str) -> dict[str, dict[str, str]]:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(file_path, encoding="utf-8") as handle:
                parser.read_file(handle)
        except OSError as e:
            raise ConfigValidationError([f"file: cannot read {file_path}: {e}"]) from e
        except configparser.Error as e:
            raise ConfigValidationError([f"file: malformed config {file_path}: {e.message}"]) from e
        return {name: dict(parser[name]) for name in parser.sections()}

    @staticmethod
    def diagnostics(sections: dict[str, dict[str, str]]) -> tuple[dict, list[str]]:
        """Raw key-value sections to a config payload plus every problem found."""
        problems: list[str] = []
        payload: dict = {}

        for name, values in sections.items():
            if name == TOP_LEVEL_SECTION:
                for key, raw in values.items():
                    if key not in TOP_LEVEL_KEYS:
                        problems.append(f"{name}.{key}: unknown key")
                    elif key == "g_grid":
                        try:
                            payload["g_grid"] = _parse_grid(raw)
                        except ValueError:
                            problems.append(f"{name}.g_grid: not a comma-separated list of numbers: {raw!r}")
                    else:
                        payload[key] = raw.strip()
            elif name in BLOCK_SECTIONS:
                known = set(BLOCK_SECTIONS[name].model_fields)
                block = {}
                for key, raw in values.items():
                    if key not in known:
                        problems.append(f"{name}.{key}: unknown key")
                    elif raw.strip():
                        block[key] = raw.strip()
                payload[name] = block
            else:
                problems.append(f"[{name}]: unknown section")

        return payload, problems

    @staticmethod
    def validate(file_path: str) -> list[str]:
        """Every diagnostic for the file; empty when the config is usable."""
        try:
            sections = ConfigLoader.read_sections(file_path)
        except ConfigValidationError as e:
            return list(e.diagnostics)

        payload, problems = ConfigLoader.diagnostics(sections)
        try:
            ExperimentConfig.model_validate(payload)
        except ValidationError as e:
            for error in e.errors():
                message = error["msg"].removeprefix("Value error, ")
                location = _location(error["loc"])
                problems.append(f"{location}: {message}" if error["loc"] else message)
        return problems

    @staticmethod
    def load_from_file(file_path: str) -> ExperimentConfig:
        problems = ConfigLoader.validate(file_path)
        if problems:
            raise ConfigValidationError(problems)
        payload, _ = ConfigLoader.diagnostics(ConfigLoader.read_sections(file_path))
        config = ExperimentConfig.model_validate(payload)
        logger.info(f"Loaded {config.kind.value} config from {file_path}")
        return config

    @staticmethod
    def create_sample_config(kind: ExperimentKind) -> ExperimentConfig:
        """Desk-scale defaults for each experiment."""
        backend = Backend.GAUSSIAN if kind in GAUSSIAN_EXPERIMENTS else Backend.EXACT
        output = OutputBlock(path=str(Path("results") / f"{kind.value}.csv"))

        if kind == ExperimentKind.CL_FIG1:
            return ExperimentConfig(
                kind=kind,
                backend=backend,
                g_grid=[0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
                system=SystemBlock(omega=1.0, mass=1.0),
                bath=BathBlock(n_osc=165, omega_max=1.2),
                thermal=ThermalBlock(beta=3.5, beta_s=1.0),
                protocol=ProtocolBlock(n_steps=200, t_wait_factor=10.0),
                output=output,
            )
        if kind == ExperimentKind.CL_EQUILIBRATION:
            return ExperimentConfig(
                kind=kind,
                backend=backend,
                g_grid=[0.3, 0.35, 0.4, 0.45],
                system=SystemBlock(omega=1.0, mass=1.0),
                bath=BathBlock(n_osc=1200, omega_max=1.3),
                thermal=ThermalBlock(beta=3.5, beta_s=1.0),
                protocol=ProtocolBlock(n_times=2000, t_max_factor=10.0),
                output=output,
            )
        if kind in (ExperimentKind.CARNOT_SWEEP, ExperimentKind.POWER_SWEEP):
            return ExperimentConfig(
                kind=kind,
                backend=backend,
                g_grid=[0.02, 0.05, 0.1, 0.15, 0.2],
                thermal=ThermalBlock(beta_hot=0.5, beta_cold=1.0),
                protocol=ProtocolBlock(n_steps=50, scale_b=1.0, scale_d=2.0),
                output=output,
            )
        if kind == ExperimentKind.INVARIANTS:
            return ExperimentConfig(
                kind=kind,
                backend=backend,
                g_grid=[0.2],
                protocol=ProtocolBlock(n_steps=20, n_instances=20),
                output=output,
            )
        return ExperimentConfig(
            kind=kind,
            backend=backend,
            g_grid=[0.0, 0.05, 0.1, 0.2, 0.4],
            thermal=ThermalBlock(beta=1.0, beta_s=0.5),
            protocol=ProtocolBlock(n_steps=50),
            output=output,
        )

    @staticmethod
    def to_ini(config: ExperimentConfig) -> str:
        """Render a config in the file format read by load_from_file."""
        parser = configparser.ConfigParser(interpolation=None)
        parser[TOP_LEVEL_SECTION] = {
            "kind": config.kind.value,
            "backend": config.backend.value,
            "g_grid": ", ".join(repr(g) for g in config.g_grid),
            "seed": str(config.seed),
        }
        if "threads" in config.model_fields_set:
            parser[TOP_LEVEL_SECTION]["threads"] = str(config.threads)
        dumped = config.model_dump(mode="json")
        for name in BLOCK_SECTIONS:
            parser[name] = {key: "" if value is None else str(value) for key, value in dumped[name].items()}

        lines: list[str] = []
        for name in parser.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{key} = {value}".rstrip() for key, value in parser[name].items())
            lines.append("")
        return "\n".join(lines)
