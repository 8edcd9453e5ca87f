"""Operator-splitting solver for rough differential equations dY = f(Y) dX."""

from .convergence_lab import (EXACT_AGREEMENT, DavieReport, Problem,
                              RateReport, common_indices, davie_defect,
                              dyadic_sup_rate, fit_rate, holder_rate,
                              rational_rate)
from .errors import NumericFailure
from .model import (CheckReport, SecondOrderMap, VectorField, canonical_z,
                    check_z_bound, check_z_cocycle, check_z_lipschitz,
                    constant_field, convention_defect_max, linear_field,
                    rough_probe_z, sine_field, transposed_z, validate_gradient,
                    zero_z)
from .rough_path import (Grid, RoughDriver, SampledPath, chen_defect,
                         chen_defect_many, hoelder_seminorm,
                         lift_piecewise_linear, make_uniform_grid,
                         scalar_driver, smooth_path, synth_midpoint_path)
from .splitting_solver import (MilsteinTrajectory, SplitTrajectory,
                               eval_joined, solve_milstein,
                               solve_ode_reference, solve_split, split_step,
                               write_trajectory_csv)

__version__ = "0.1.0"

__all__ = [
    "EXACT_AGREEMENT",
    "CheckReport",
    "DavieReport",
    "Grid",
    "MilsteinTrajectory",
    "NumericFailure",
    "Problem",
    "RateReport",
    "RoughDriver",
    "SampledPath",
    "SecondOrderMap",
    "SplitTrajectory",
    "VectorField",
    "canonical_z",
    "chen_defect",
    "chen_defect_many",
    "check_z_bound",
    "check_z_cocycle",
    "check_z_lipschitz",
    "common_indices",
    "constant_field",
    "convention_defect_max",
    "davie_defect",
    "dyadic_sup_rate",
    "eval_joined",
    "fit_rate",
    "hoelder_seminorm",
    "holder_rate",
    "lift_piecewise_linear",
    "linear_field",
    "make_uniform_grid",
    "rational_rate",
    "rough_probe_z",
    "scalar_driver",
    "sine_field",
    "smooth_path",
    "solve_milstein",
    "solve_ode_reference",
    "solve_split",
    "split_step",
    "synth_midpoint_path",
    "transposed_z",
    "validate_gradient",
    "write_trajectory_csv",
    "zero_z",
]
