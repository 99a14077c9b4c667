import hashlib
import json
import logging
from pathlib import Path

from src import __version__
from src.models.experiment import CSV_SCHEMA_VERSION
from src.models.experiment import ExperimentConfig
from src.models.experiment import SweepResult

logger = logging.getLogger(__name__)


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON echo of the config."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResultsWriter:

    @staticmethod
    def sidecar_path(csv_path: str | Path) -> Path:
        path = Path(csv_path)
        return path.with_suffix(path.suffix + ".json")

    @staticmethod
    def write_csv(result: SweepResult, csv_path: str | Path) -> Path:
        path = Path(csv_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(f"# schema={CSV_SCHEMA_VERSION} experiment={result.kind.value}\n")
            result.to_frame().to_csv(handle, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @staticmethod
    def write_sidecar(result: SweepResult, config: ExperimentConfig, csv_path: str | Path) -> Path:
        path = ResultsWriter.sidecar_path(csv_path)
        document = {
            "config": config.model_dump(mode="json"),
            "config_hash": config_hash(config),
            "version": __version__,
            "schema": CSV_SCHEMA_VERSION,
            "metadata": result.metadata,
            "invariants": result.summary(),
        }
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(json.dumps(document, sort_keys=True, indent=2))
            handle.write("\n")
        return path

    @staticmethod
    def write(result: SweepResult, config: ExperimentConfig, csv_path: str | Path | None = None) -> tuple[Path, Path]:
        target = Path(csv_path or config.output.path)
        csv_file = ResultsWriter.write_csv(result, target)
        sidecar = ResultsWriter.write_sidecar(result, config, target)
        logger.info(f"Wrote {len(result.rows)} rows to {csv_file} and summary to {sidecar}")
        return csv_file, sidecar
