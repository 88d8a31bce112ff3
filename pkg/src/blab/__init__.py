"""Numerical laboratory for Bergman kernels and the Fisher geometry of proper maps."""

from .domains import BALL, DISK, POLYDISK, annulus, ellipse, make_domain, parse_domain
from .geometry import bergman_metric, diastasis, isometry_defect, realify, transformation_residual
from .infogeo import (
    StatModel,
    Tolerances,
    bergman_density,
    deficiency,
    factorization_residual,
    fisher_matrix,
    gaussian_fisher,
    injectivity_verdict,
    ratio_invariance,
    score_equality_gap,
)
from .kernels import default_kernel, eval_kernel, make_kernel, parse_kernel
from .maps import local_inverses, make_map, parse_map, pushforward_density, registered_maps
from .numerics import build_quadrature, integrate

__version__ = "0.1.0"
