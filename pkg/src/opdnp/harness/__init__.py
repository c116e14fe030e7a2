"""Configuration, scenario orchestration, persistence and the ``opdnp`` CLI."""

from .config import (ConfigError, ScenarioConfig, SCENARIOS, config_from_dict, parse_config,
                     serialize)
from .runner import RunManifest, run_scenario, read_results_csv, write_results_csv
from .export import export_plot_data
