"""Multilevel accelerated proximal imaging for radio interferometry.

Data-space multilevel FISTA (IML-FISTA) for the reweighted analysis-sparsity
problem with a SARA dictionary, plus the forward-backward and FISTA
baselines, a synthetic observation simulator and a benchmark harness.
"""

from .coverage import AntennaArray, NoiseSpec, ObservationSpec, PhantomSpec, generate_phantom, generate_tracks
from .cost import CostMeter
from .measurement import MeasurementOperator, UVCoverage, dirty_image, operator_norm_sq
from .metrics import log_snr, snr
from .multilevel import Hierarchy, LevelSelector, build_selector, ml_step
from .prox import prox_weighted_l1_positive, smooth_grad_reg, update_weights
from .sara import SaraDictionary
from .solvers import (
    IterationTrace, Problem, SolverConfig, reweighted_solve, solve, solve_fb, solve_fista, solve_iml_fista,
)

__version__ = "0.1.0"

__all__ = [
    "AntennaArray", "CostMeter", "Hierarchy", "IterationTrace", "LevelSelector", "MeasurementOperator",
    "NoiseSpec", "ObservationSpec", "PhantomSpec", "Problem", "SaraDictionary", "SolverConfig", "UVCoverage",
    "build_selector", "dirty_image", "generate_phantom", "generate_tracks", "log_snr", "ml_step",
    "operator_norm_sq", "prox_weighted_l1_positive", "reweighted_solve", "smooth_grad_reg", "snr", "solve",
    "solve_fb", "solve_fista", "solve_iml_fista", "update_weights",
]
