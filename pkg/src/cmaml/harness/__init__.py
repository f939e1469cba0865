"""Configuration, experiment commands, metrics CSVs, SVG plots and the CLI."""
from .config import ConfigError, ExperimentConfig, ExperimentSettings, FineTuneConfig, apply_overrides
from .experiments import (
    cmd_ablate_eta,
    cmd_compare,
    cmd_finetune,
    cmd_meta_train,
    cmd_oracle_check,
    oracle_check_config,
    unique_dir,
)
from .metrics import FIELDS, HEADER, MetricsParseError, aggregate, append_rows, parse_csv, read_csv
from .plots import emit_plots, render_svg

__all__ = [
    "ConfigError", "ExperimentConfig", "ExperimentSettings", "FineTuneConfig", "apply_overrides",
    "cmd_ablate_eta", "cmd_compare", "cmd_finetune", "cmd_meta_train", "cmd_oracle_check",
    "oracle_check_config", "unique_dir", "FIELDS", "HEADER", "MetricsParseError", "aggregate",
    "append_rows", "parse_csv", "read_csv", "emit_plots", "render_svg",
]
