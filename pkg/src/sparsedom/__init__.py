"""Sparse domination of pseudodifferential operators on a periodic grid.

Modules
-------
grid       sampling grid, discrete Fourier pair, Littlewood-Paley bands
dyadic     cubes, shifted dyadic lattices, dilations, three-lattice cover
sparse     sparse families and their constructions
operators  symbols, pseudodifferential operators, maximal operators
weights    A_q, RH_q and A_infinity characteristics
forms      sparse operators/forms, weighted right-hand sides, Besov norms
verify     experiment runner and CLI
"""

from .dyadic import Box, Cube, DyadicLattice, carleson_constant, dilate, lattices, rho_cube, standard_lattice, three_lattice_cover
from .forms import FormParams, besov_norm, mapped_sparse_op, nested_sparse_op, sparse_form, sparse_form_alpha, sparse_op, weighted_rhs
from .grid import GridFunction, GridSpec, LPFamily, band_project, forward_transform, inverse_transform, littlewood_paley_family, sample
from .operators import Symbol, apply_pdo, grand_maximal, maximal, propagator
from .sparse import (
    HypothesisError,
    SparseFamily,
    VerificationError,
    augment,
    build_sparse_form_family,
    cz_decompose,
    lerner_nazarov_decompose,
    local_oscillation,
    stopping_family,
    verify_eta_sparse,
)
from .weights import Weight, ainfty_characteristic, ap_characteristic, power_weight, rh_characteristic, sharp_rh_exponent

__version__ = "0.1.0"
