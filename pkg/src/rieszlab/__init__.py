"""Numerical toolkit for singular-kernel bilinear operators, the interaction
stress reformulation, and stability analysis of nonlocal Euler dynamics."""

from .grid import (
    CellSet,
    ExponentTriple,
    Grid,
    GridFunction,
    dyadic_dilate,
    lebesgue_norm,
    make_grid,
    rescale_domain,
    weak_norm,
    weak_norm_upper,
)
from .operators import (
    OperatorParams,
    SymTensorField,
    ThetaQuadrature,
    bilinear_op,
    cell_averaged_kernel,
    dyadic_envelope,
    interaction_force_direct,
    interaction_force_divergence,
    interaction_potential,
    interaction_stress,
    interaction_tensor,
    radial_kernel_stress,
    riesz_kernel,
    riesz_potential,
    truncated_dyadic,
    truncated_unit,
)

__version__ = "0.1.0"
