"""Renewal-measure, stable-density and criterion diagnostics for infinite-mean lattice walks."""

from .config import ExperimentConfig, load_config, preset_config
from .dists import LatticeLaw, build_law, make_finite_law, make_pareto_lattice
from .errors import BudgetError, ConfigError, InvariantError, SrtlabError
from .regvar import SlowlyVarying, TailIndexFunction
from .renewal import RenewalTable, renewal_measure_onesided, renewal_measure_twosided
from .stable import StableDensity

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ConfigError", "ExperimentConfig", "InvariantError", "LatticeLaw", "RenewalTable",
    "SlowlyVarying", "SrtlabError", "StableDensity", "TailIndexFunction", "build_law", "load_config",
    "make_finite_law", "make_pareto_lattice", "preset_config", "renewal_measure_onesided",
    "renewal_measure_twosided",
]
