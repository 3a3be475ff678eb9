"""Experiment harness: configuration, seeded runs, CSV summaries and the CLI."""
from .config import ConfigError, ExperimentConfig, apply_settings, load_config, parse_kv
from .runner import (ComparisonReport, CsvFormatError, RunError, RunResult, read_metrics, run,
                     summarize)

__all__ = ["ComparisonReport", "ConfigError", "CsvFormatError", "ExperimentConfig", "RunError",
           "RunResult", "apply_settings", "load_config", "parse_kv", "read_metrics", "run",
           "summarize"]
