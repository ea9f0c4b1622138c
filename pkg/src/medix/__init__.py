"""Median-based filtering of out-of-distribution samples from unlabeled wild data."""

from .errors import ConfigError, MedixError
from .stats import element_wise_median, geometric_median, l2_distance, loo_median
from .filter import FilterConfig, FilterResult, deviation_sweep, err_rates, medix_filter

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FilterConfig",
    "FilterResult",
    "MedixError",
    "deviation_sweep",
    "element_wise_median",
    "err_rates",
    "geometric_median",
    "l2_distance",
    "loo_median",
    "medix_filter",
]
