"""Monte Carlo estimates of false-positive rates and power when several
correlated eye-tracking reading measures are tested for one effect."""

from .criteria import CriterionSpec, Decision, decide, default_criteria
from .datagen import (
    MEASURES, Dataset, apply_effect, calibrate_effect, effect_size_grid, generate_base,
    latin_square_condition,
)
from .lmm import FitResult, MeasureTest, ModelSpec, fit, lrt, profiled_deviance
from .mcrunner import McAggregate, RunConfig, run, run_iteration
from .numerics import RngStream, binom_ci95, chisq1_sf
from .params import ParamRange, ParamSet, default_range, endpoint, sample_paramset

__version__ = "0.1.0"
