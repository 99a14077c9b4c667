from .config_loader import ConfigLoader
from .results_writer import ResultsWriter

__all__ = ["ConfigLoader", "ResultsWriter"]
