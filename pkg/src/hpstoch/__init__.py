"""Stochastic Hamilton-Pontryagin mechanics on sampled semimartingale paths."""

from .errors import (
    ConfigError,
    GradientValidationError,
    IntegratorStepError,
    InvalidArgument,
    SingularLegendreError,
)
from .paths import (
    INF,
    Ball,
    Box,
    NoiseSpec,
    SamplePath,
    StoppingTimes,
    Sublevel,
    TimeGrid,
    first_exit_time,
    first_hitting_time,
    hit_exit_window,
    make_uniform_grid,
    sample_noise,
    stop_path,
)

__version__ = "0.1.0"
