from ctdd.ctdd import Workbench
from ctdd.config import ExperimentConfig, load_config
from ctdd.fundamental import DataDictionary, Variant, build_dictionary, dd_simulate, identify, membership_residual
from ctdd.lqr import (
    LqrSolution,
    LqrSpec,
    optimality_gap_sweep,
    solve_dd_lqr_io,
    solve_dd_lqr_state,
    solve_model_lqr_poly,
    solve_reference_analytic_example,
    solve_reference_riccati,
)

__all__ = (
    'Workbench',
    'ExperimentConfig',
    'load_config',
    'DataDictionary',
    'Variant',
    'build_dictionary',
    'dd_simulate',
    'identify',
    'membership_residual',
    'LqrSolution',
    'LqrSpec',
    'optimality_gap_sweep',
    'solve_dd_lqr_io',
    'solve_dd_lqr_state',
    'solve_model_lqr_poly',
    'solve_reference_analytic_example',
    'solve_reference_riccati',
)
