"""Moving-frame Born-Oppenheimer dynamics for spins in rotating fields and a gas-loaded piston."""
from .config import ConfigError, ExperimentConfig, parse_config, render
from .experiments import ExperimentError, run
from .report import RunReport, write_outputs

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentError", "RunReport", "parse_config", "render",
           "run", "write_outputs"]
__version__ = "0.1.0"
