"""
Fourier-space integral equations for complex geometrical optics solutions.

Two formulations are provided.  :func:`solve_direct` works with the
unknown ``S = xi * F(m)`` and is adequate while the modulated potential has
its transform well inside the box.  :func:`solve_iterated` splits ``S``
into a part ``f`` near the origin and a rotated part ``h(xi + P)`` near
``-P`` and solves the once-substituted equation for ``h``; it is valid for
every lattice-admissible ``k``.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .grid import Field2D, GridMismatchError, LatticePoint, Space, SpectralGrid2D, shift_array
from .krylov import GmresConfig, GmresReport, gmres_solve
from .regularizer import WnTable, boundary_ratio, warn_if_not_decaying


class Convention(enum.Enum):
    """How the spectral parameter enters the modulation ``exp(s (conj(k z) - k z))``."""

    FULL = "full"  # s = 1, pole at 2i conj(k)
    HALF = "half"  # s = 1/2, pole at i conj(k)

    @property
    def scale(self) -> float:
        return 1.0 if self is Convention.FULL else 0.5


class PotentialDecayWarning(UserWarning):
    """The potential is not negligible on the edge of the physical box."""


class SolverFailure(RuntimeError):
    """GMRES did not reach the requested tolerance."""

    def __init__(self, message: str, report: GmresReport):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Potential:
    q: Field2D
    convention: Convention = Convention.FULL
    decay_tol: float = 1e-12

    def __post_init__(self) -> None:
        self.q.require(Space.PHYSICAL)
        ratio = boundary_ratio(self.q.values)
        if ratio > self.decay_tol:
            warnings.warn(f"potential is {ratio:.2e} of its peak on the box edge", PotentialDecayWarning, stacklevel=3)

    @property
    def grid(self) -> SpectralGrid2D:
        return self.q.grid

    def shift_point(self, k: complex) -> LatticePoint:
        """Lattice point of the pole ``2i conj(k)`` (full) or ``i conj(k)`` (half)."""
        return self.grid.lattice_point(2.0 * self.convention.scale * 1j * np.conj(k))

    def modulation(self, k: complex) -> np.ndarray:
        z = self.grid.Z
        return np.exp(self.convention.scale * (np.conj(k) * np.conj(z) - k * z))


@dataclass(frozen=True)
class CgoConfig:
    M: int = 11
    hybrid_radius: float = 1.0
    gmres: GmresConfig = GmresConfig()


def make_table(grid: SpectralGrid2D, cfg: CgoConfig) -> WnTable:
    return WnTable(grid, cfg.M, cfg.hybrid_radius)


def _ensure_table(grid: SpectralGrid2D, cfg: CgoConfig, table: Optional[WnTable]) -> WnTable:
    if table is None:
        return make_table(grid, cfg)
    if table.grid != grid:
        raise GridMismatchError("kernel table was built for a different grid")
    return table


@dataclass
class CgoSolution:
    """
    Solution for one spectral parameter.

    ``unknown`` is ``h`` for the iterated formulation and ``S`` for the direct
    one; the other quantities are derived lazily.
    """

    k: complex
    potential: Potential
    method: str
    unknown: Field2D
    report: GmresReport
    table: WnTable = field(repr=False)
    shift: LatticePoint = (0, 0)
    wall_time: float = 0.0

    @property
    def grid(self) -> SpectralGrid2D:
        return self.potential.grid

    @property
    def h(self) -> Field2D:
        if self.method != "iterated":
            raise AttributeError("h is only defined for the iterated formulation")
        return self.unknown

    @cached_property
    def f(self) -> Field2D:
        """Near-origin part of ``S`` (iterated formulation only)."""
        h = self.h.values
        u = self.table.inverse_xi_array(h, self.shift)
        q = self.potential.q.values
        return Field2D(self.grid, Space.FOURIER, self.grid.forward_array(-1j * q * np.conj(u)))

    @cached_property
    def S(self) -> Field2D:
        if self.method == "direct":
            return self.unknown
        return Field2D(self.grid, Space.FOURIER, self.f.values + shift_array(self.h.values, self.shift))

    @cached_property
    def m(self) -> Field2D:
        """``F^{-1}(S/xi)``, i.e. ``psi exp(-s k z) - 1``."""
        if self.method == "direct":
            vals = self.table.inverse_xi_array(self.unknown.values)
        else:
            P = self.grid.wavenumber(self.shift)
            demod = np.exp(-1j * (P.real * self.grid.X + P.imag * self.grid.Y))
            vals = self.table.inverse_xi_array(self.f.values) + demod * self.table.inverse_xi_array(self.h.values, self.shift)
        return Field2D(self.grid, Space.PHYSICAL, vals)

    @cached_property
    def psi(self) -> Field2D:
        s = self.potential.convention.scale
        return Field2D(self.grid, Space.PHYSICAL, (self.m.values + 1.0) * np.exp(s * self.k * self.grid.Z))

    def value_at_pole(self) -> complex:
        """``h`` at the pole lattice point (wrapped cyclically if outside the box)."""
        return complex(self.h.values[self.grid.index_of(self.shift)])

    def defect(self) -> float:
        """Max-norm defect of the defining equation relative to ``max|b|``."""
        q = self.potential.q.values
        grid = self.grid
        if self.method == "direct":
            qe = q * self.potential.modulation(self.k)
            S = self.unknown.values
            b = -1j * grid.forward_array(qe)
            lhs = _direct_operator(grid, self.table, qe)(S.ravel()).reshape(grid.shape)
        else:
            b = -1j * grid.forward_array(q)
            lhs = _iterated_operator(grid, self.table, q, self.shift)(self.unknown.flat).reshape(grid.shape)
        scale = float(np.max(np.abs(b))) or 1.0
        return float(np.max(np.abs(lhs - b))) / scale


def _k0_array(grid: SpectralGrid2D, table: WnTable, q: np.ndarray, S: np.ndarray, s_phys=None) -> np.ndarray:
    u = table.inverse_xi_array(S, (0, 0), s_phys=s_phys)
    return -1j * grid.forward_array(q * np.conj(u))


def apply_K0(h: Field2D, Q: Potential, table: WnTable) -> Field2D:
    """``K0(h) = -i F(q conj(F^{-1}(h/xi)))`` with the regularised division."""
    h.require(Space.FOURIER, Q.grid)
    if table.grid != Q.grid:
        raise GridMismatchError("kernel table was built for a different grid")
    return Field2D(Q.grid, Space.FOURIER, _k0_array(Q.grid, table, Q.q.values, h.values))


def _direct_operator(grid: SpectralGrid2D, table: WnTable, qe: np.ndarray):
    shape = grid.shape

    def op(v: np.ndarray) -> np.ndarray:
        S = v.reshape(shape)
        return (S - _k0_array(grid, table, qe, S)).ravel()

    return op


def _iterated_operator(grid: SpectralGrid2D, table: WnTable, q: np.ndarray, p: LatticePoint):
    shape = grid.shape

    def op(v: np.ndarray) -> np.ndarray:
        h = v.reshape(shape)
        u = table.inverse_xi_array(h, p)
        inner = -1j * q * np.conj(u)
        f = grid.forward_array(inner)
        return (h - _k0_array(grid, table, q, f, s_phys=inner)).ravel()

    return op


def solve_direct(
    Q: Potential,
    k: complex = 0.0,
    cfg: CgoConfig = CgoConfig(),
    *,
    table: Optional[WnTable] = None,
    raise_on_failure: bool = False,
) -> CgoSolution:
    """
    Solve ``S + i F(Q E conj(F^{-1}(S/xi))) = -i F(Q E)`` with ``E`` the modulation.

    The operator conjugates ``S``, so GMRES runs over the reals.
    """
    grid = Q.grid
    table = _ensure_table(grid, cfg, table)
    t0 = time.perf_counter()
    qe = Q.q.values * Q.modulation(k)
    b = -1j * grid.forward_array(qe)
    warn_if_not_decaying(b, "modulated potential transform")
    x, report = gmres_solve(_direct_operator(grid, table, qe), b.ravel(), cfg.gmres, field="real")
    sol = CgoSolution(complex(k), Q, "direct", Field2D(grid, Space.FOURIER, x.reshape(grid.shape)), report, table, (0, 0), time.perf_counter() - t0)
    if raise_on_failure and not report.converged:
        raise SolverFailure(f"direct solve at k={k} stopped at residual {report.residual:.2e}", report)
    return sol


def solve_iterated(
    Q: Potential,
    k: complex,
    cfg: CgoConfig = CgoConfig(),
    *,
    table: Optional[WnTable] = None,
    raise_on_failure: bool = False,
) -> CgoSolution:
    """
    Solve ``h - K0(-i F(q conj(F^{-1}[h/(xi - P)]))) = -i F(q)`` for ``h``.

    Both conjugations cancel, so the operator is complex-linear and GMRES
    runs over the complex numbers.  ``k`` must put the pole ``P`` exactly on
    the wavenumber lattice.
    """
    grid = Q.grid
    table = _ensure_table(grid, cfg, table)
    p = Q.shift_point(k)
    t0 = time.perf_counter()
    q = Q.q.values
    b = -1j * grid.forward_array(q)
    x, report = gmres_solve(_iterated_operator(grid, table, q, p), b.ravel(), cfg.gmres, field="complex")
    sol = CgoSolution(complex(k), Q, "iterated", Field2D(grid, Space.FOURIER, x.reshape(grid.shape)), report, table, p, time.perf_counter() - t0)
    if raise_on_failure and not report.converged:
        raise SolverFailure(f"iterated solve at k={k} stopped at residual {report.residual:.2e}", report)
    return sol


def born_terms(Q: Potential, k: complex, table: Optional[WnTable] = None, cfg: CgoConfig = CgoConfig()) -> Tuple[Field2D, Field2D]:
    """
    First two Neumann iterates ``S0 = -i F(Q E)`` and ``S1 = K(S0)``.

    For lattice-admissible ``k`` the first is a rotation of ``-i F(Q)`` and
    the second is evaluated with the pole placed at the rotation point, which
    keeps both accurate when ``S0`` sits near the edge of the box.
    """
    grid = Q.grid
    table = _ensure_table(grid, cfg, table)
    q = Q.q.values
    try:
        p = Q.shift_point(k)
    except ValueError:
        p = None
    if p is None:
        qe = q * Q.modulation(k)
        S0 = -1j * grid.forward_array(qe)
        S1 = _k0_array(grid, table, qe, S0)
        return Field2D(grid, Space.FOURIER, S0), Field2D(grid, Space.FOURIER, S1)
    h0 = -1j * grid.forward_array(q)
    S0 = shift_array(h0, p)
    u = table.inverse_xi_array(h0, p)
    # Q E conj(exp(-i P.x) u) = Q conj(u) when E = exp(-i P.x).
    S1 = -1j * grid.forward_array(q * np.conj(u))
    return Field2D(grid, Space.FOURIER, S0), Field2D(grid, Space.FOURIER, S1)


__all__ = [
    "CgoConfig",
    "CgoSolution",
    "Convention",
    "Potential",
    "PotentialDecayWarning",
    "SolverFailure",
    "apply_K0",
    "born_terms",
    "make_table",
    "solve_direct",
    "solve_iterated",
]
