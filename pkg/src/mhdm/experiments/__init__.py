"""Configuration-driven experiments and the ``mhdm`` command line.

``config`` parses the flat key-value format, ``presets`` holds the named
one-dimensional experiments, ``runner`` executes them and writes CSV
artifacts, ``cli`` is the entry point.
"""

from .config import ExperimentConfig, dump_config, load_config, parse_config
from .presets import PRESETS, load_preset, preset_names
from .runner import make_noise, run_cell, run_experiment

__all__ = [
    "ExperimentConfig", "dump_config", "load_config", "parse_config",
    "PRESETS", "load_preset", "preset_names",
    "make_noise", "run_cell", "run_experiment",
]
