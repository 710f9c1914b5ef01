"""Simplex, spherical and bilinear spherical averaging operators on grids,
with Monte Carlo verification of their L^p-improving, quasi-Banach and
restricted strong-type inequalities."""

from ._kernels import backend_name
from .geometry import (
    DegenerateConfigurationError,
    Rotation,
    SimplexConfig,
    SpherePoint,
    is_unit_simplex_tuple,
    regular_simplex_vertices,
    sample_rotation,
    sample_sphere_point,
    select_independent_frames,
)
from .gridfn import ExponentTuple, GridFunction, holder_consistent, lp_norm, rasterize, restrict_to_cube
from .operators import (
    McEstimate,
    adjoint_residual,
    bilinear_spherical_average,
    cube_decomposition_bound,
    empirical_difference_histogram,
    l1_pairing,
    majorization_rhs,
    pushforward_density,
    simplex_average,
    spherical_average,
    support_radius_check,
)
from .shapes import ShapeSet

__version__ = "0.1.0"
