"""Configuration, experiment orchestration, persistence and plotting."""
from .config import ExperimentConfig, config_from_dict, load_config
from .experiment import RunRecord, run_experiment, run_sweep
from .plots import emit_plots

__all__ = ["ExperimentConfig", "RunRecord", "config_from_dict", "emit_plots", "load_config", "run_experiment",
           "run_sweep"]
