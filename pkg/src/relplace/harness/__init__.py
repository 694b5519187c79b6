"""CLI, experiment configs and run logs."""

from .cli import build_parser, main
from .config import ExperimentConfig, merge_into
from .runlog import RunLog, environment_fingerprint

__all__ = ["build_parser", "main", "ExperimentConfig", "merge_into",
           "RunLog", "environment_fingerprint"]
