"""Semi-discrete sliced-Wasserstein gradient dynamics.

Exact per-direction 1D optimal transport, the sliced quadratic energy
and its gradient via target cell barycenters, monitored gradient
descent, criticality residuals, instability perturbation probes, and
cell-structure analysis of the fixed-direction estimator.
"""

from .directions import DirectionSet, equispaced_circle, sampled_sphere
from .targets import (CellTable, EmpiricalCloud, IsotropicGaussian,
                      LineSegmentUniform, ProjectedTarget, SlicedUniformDisk,
                      shell_cloud)
from .ot1d import SortPermutation, sort_projection, w2sq_semidiscrete, \
    wpp_discrete
from .swgrad import (GradientReport, OnDiagonal, PointCloud, SlicedEvaluator,
                     energy, estimator_fl, grad_general_p, grad_p2)
from .descent import (DescentConfig, DescentTrace, check_separation_bound,
                      run_descent, sphere_mean_abs_coordinate,
                      step_size_sweep, uniform_box_cloud)
from .landscape import (CellDescriptor, PerturbationCurve, TieInDirection,
                        alternating_field, analyze_cell, dumbbell_cloud,
                        gaussian_line_critical_cloud, kink_scan,
                        line_scale_alpha, perturb_split_translation,
                        perturb_vector_field, quadratic_envelope_interval,
                        segment_critical_cloud)

__version__ = "0.1.0"

__all__ = [
    "DirectionSet", "equispaced_circle", "sampled_sphere",
    "CellTable", "ProjectedTarget", "SlicedUniformDisk", "IsotropicGaussian",
    "EmpiricalCloud", "LineSegmentUniform", "shell_cloud",
    "SortPermutation", "sort_projection", "wpp_discrete", "w2sq_semidiscrete",
    "PointCloud", "GradientReport", "OnDiagonal", "SlicedEvaluator",
    "energy", "grad_p2", "grad_general_p", "estimator_fl",
    "DescentConfig", "DescentTrace", "run_descent", "check_separation_bound",
    "step_size_sweep", "uniform_box_cloud", "sphere_mean_abs_coordinate",
    "PerturbationCurve", "CellDescriptor", "TieInDirection",
    "segment_critical_cloud", "gaussian_line_critical_cloud",
    "line_scale_alpha", "dumbbell_cloud", "alternating_field",
    "perturb_vector_field", "perturb_split_translation",
    "quadratic_envelope_interval", "analyze_cell", "kink_scan",
    "__version__",
]
