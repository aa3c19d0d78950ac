"""Spectral solvers for d-bar problems, CGO solutions and DS II inverse scattering."""

from .grid import (
    Field2D,
    GridMismatchError,
    OffLatticeError,
    Space,
    SpaceError,
    SpectralGrid2D,
    circular_shift,
    fft2_forward,
    fft2_inverse,
)
from .krylov import GmresConfig, GmresReport, gmres_solve
from .regularizer import (
    TaylorCoeffs,
    WnTable,
    build_wn_table,
    dbar_inverse,
    dbar_inverse_shifted,
    taylor_coeffs_at,
)
from .cgo import CgoConfig, CgoSolution, Convention, Potential, apply_K0, born_terms, solve_direct, solve_iterated

__version__ = "0.1.0"
