from .invariant_suite import InvariantSuite
from .sweep_runner import SweepRunner
from .sweep_runner import build_system

__all__ = ["InvariantSuite", "SweepRunner", "build_system"]
