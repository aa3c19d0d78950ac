"""
Spectrally accurate inversion of the d-bar operator.

The singular division ``S(xi)/(xi - P)`` is regularised by removing the
anti-holomorphic Taylor polynomial of ``S`` at ``P`` multiplied by a
Gaussian.  The remainder is smooth and is inverted by FFT; the removed part
has an analytically known inverse transform built from the kernels

    W_n = F^{-1}( conj(xi)^n exp(-|xi|^2) / xi ),

which are tabulated once per grid and Taylor order.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammainc

from .grid import (
    Field2D,
    LatticePoint,
    Space,
    SpectralGrid2D,
    check_lattice_point,
    shift_array,
)

MAX_ORDER = 20
SERIES_TERM_CAP = 60
SERIES_RTOL = 1e-17
BOUNDARY_DECAY_TOL = 1e-13


class BoundaryDecayWarning(UserWarning):
    """Data is not negligible at the edge of the computational box."""


class TaylorBoundWarning(UserWarning):
    """Taylor coefficients exceed the heuristic size bound."""


def _kernel_prefactor(n: int) -> complex:
    return 1j * (2j) ** n * math.factorial(n)


def wn_closed_form(z: np.ndarray, n: int) -> np.ndarray:
    """
    Closed-form kernel ``W_n(z)``.

    Uses ``1 - exp(-t) sum_{k<=n} t^k/k!`` written as the regularised lower
    incomplete gamma function ``P(n+1, t)`` with ``t = |z|^2/4``; the
    explicit difference cancels catastrophically for moderate ``n``.
    Undefined at ``z = 0``.
    """
    z = np.asarray(z, dtype=complex)
    t = np.abs(z) ** 2 / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        return _kernel_prefactor(n) * gammainc(n + 1, t) / z ** (n + 1)


def wn_series(z: np.ndarray, n: int, *, rtol: float = SERIES_RTOL, cap: int = SERIES_TERM_CAP) -> np.ndarray:
    """
    Power-series kernel ``W_n(z)``, accurate near the origin.

    ``W_n = i (2i)^n n! (conj(z)/4)^(n+1) exp(-t) sum_k t^k / (k+n+1)!``
    with ``t = |z|^2/4``.  Summation stops once every new term falls below
    ``rtol`` relative to the partial sum, or after ``cap`` terms.
    """
    z = np.asarray(z, dtype=complex)
    t = np.abs(z) ** 2 / 4.0
    term = np.full(t.shape, 1.0 / math.factorial(n + 1))
    acc = np.zeros(t.shape)
    for k in range(cap):
        acc += term
        term = term * t / (k + n + 2)
        if np.all(term <= rtol * acc):
            break
    return _kernel_prefactor(n) * (np.conj(z) / 4.0) ** (n + 1) * np.exp(-t) * acc


def wn_hybrid(z: np.ndarray, n: int, hybrid_radius: float = 1.0) -> np.ndarray:
    """Series inside ``|z| < hybrid_radius``, closed form outside."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    inner = np.abs(z) < hybrid_radius
    out[inner] = wn_series(z[inner], n)
    out[~inner] = wn_closed_form(z[~inner], n)
    return out


@dataclass(frozen=True)
class TaylorCoeffs:
    """``c_n = (1/n!) d^n S / d conj(xi)^n`` at the expansion point."""

    coeffs: np.ndarray
    point: LatticePoint = (0, 0)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> complex:
        return complex(self.coeffs[n])


class WnTable:
    """
    Kernels ``W_0 .. W_M`` on the physical nodes of ``grid`` plus a small
    per-pole cache of the arrays needed by :meth:`inverse_xi_array`.

    The table is immutable apart from that cache, so it may be shared by
    concurrent callers.
    """

    def __init__(self, grid: SpectralGrid2D, M: int, hybrid_radius: float = 1.0, *, pole_cache: int = 4):
        if int(M) != M or M < 0:
            raise ValueError(f"Taylor order must be a non-negative integer, got {M!r}")
        if M > MAX_ORDER:
            raise ValueError(f"Taylor order {M} exceeds the supported maximum {MAX_ORDER}")
        if not hybrid_radius > 0:
            raise ValueError("hybrid_radius must be positive")
        self.grid = grid
        self.M = int(M)
        self.hybrid_radius = float(hybrid_radius)
        self._pole_cache_size = pole_cache
        self._poles: "OrderedDict[LatticePoint, _PoleData]" = OrderedDict()

        z = grid.Z
        kernels = np.empty((self.M + 1,) + grid.shape, dtype=complex)
        for n in range(self.M + 1):
            kernels[n] = wn_hybrid(z, n, self.hybrid_radius)
            bad = ~np.isfinite(kernels[n])
            if bad.any():
                jy, jx = np.argwhere(bad)[0]
                raise FloatingPointError(f"W_{n} is not finite at node (j_x={jx}, j_y={jy})")
        kernels.setflags(write=False)
        self.kernels = kernels
        self._kernels_flat = kernels.reshape(self.M + 1, -1)

        # Quadrature rows for the Taylor coefficients and for d S / d xi:
        # d^n S/d conj(xi)^n (P) = (-i/2)^n F(z^n s)(P), d S/d xi (P) = (-i/2) F(conj(z) s)(P).
        w = grid.quad_weight
        zf = z.ravel()
        rows = np.empty((self.M + 2, zf.size), dtype=complex)
        zn = np.ones_like(zf)
        for n in range(self.M + 1):
            rows[n] = (-0.5j) ** n * w * zn / math.factorial(n)
            zn = zn * zf
        rows[self.M + 1] = -0.5j * w * np.conj(zf)
        self._moment_rows = rows

    def __getstate__(self):
        return {"grid": self.grid, "M": self.M, "hybrid_radius": self.hybrid_radius, "pole_cache": self._pole_cache_size}

    def __setstate__(self, state) -> None:
        self.__init__(state["grid"], state["M"], state["hybrid_radius"], pole_cache=state["pole_cache"])

    def kernel(self, n: int) -> Field2D:
        return Field2D(self.grid, Space.PHYSICAL, self.kernels[n])

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        """``sum_n c_n W_n`` on the physical nodes."""
        return (np.asarray(coeffs) @ self._kernels_flat).reshape(self.grid.shape)

    def _pole(self, p: LatticePoint) -> "_PoleData":
        data = self._poles.get(p)
        if data is not None:
            self._poles.move_to_end(p)
            return data
        data = _PoleData.build(self, p)
        self._poles[p] = data
        # Keep the origin resident; evict the oldest other pole.
        while len(self._poles) > self._pole_cache_size + 1:
            for key in self._poles:
                if key != (0, 0):
                    del self._poles[key]
                    break
        return data

    def moments(self, s: np.ndarray, p: LatticePoint = (0, 0)) -> np.ndarray:
        """Taylor coefficients ``c_0..c_M`` and ``dS/dxi`` at pole ``p`` from physical samples ``s``."""
        return self._pole(p).moment_rows @ s.ravel()

    def inverse_xi_array(self, S: np.ndarray, p: LatticePoint = (0, 0), s_phys: Optional[np.ndarray] = None) -> np.ndarray:
        """
        ``F^{-1}[S / (xi - P)]`` for a Fourier array ``S`` and pole ``P`` at lattice point ``p``.

        ``s_phys`` may supply ``F^{-1} S`` when the caller already has it.
        """
        grid = self.grid
        pd = self._pole(p)
        if s_phys is None:
            s_phys = grid.inverse_array(S)
        mom = pd.moment_rows @ s_phys.ravel()
        c = mom[: self.M + 1]
        R = S.ravel() * pd.inv_dist
        R[pd.support] -= (c @ pd.basis) * pd.inv_dist[pd.support]
        if pd.pole_flat is not None:
            # Removable point: the limit of (S - G)/(xi - P) is dS/dxi at P.
            R[pd.pole_flat] = mom[self.M + 1]
        out = grid.inverse_array(R.reshape(grid.shape))
        kern = self.combine(c)
        if pd.demod is not None:
            kern = kern * pd.demod
        out += kern
        return out


# Beyond this distance from the pole exp(-r^2) r^20 < 1e-18, so the Gaussian
# part is dropped there.
GAUSSIAN_CUTOFF = 9.0


@dataclass
class _PoleData:
    moment_rows: np.ndarray
    support: np.ndarray
    basis: np.ndarray
    inv_dist: np.ndarray
    pole_flat: Optional[int]
    demod: Optional[np.ndarray] = field(default=None)

    @classmethod
    def build(cls, table: WnTable, p: LatticePoint) -> "_PoleData":
        grid = table.grid
        P = grid.wavenumber(p)
        d = (grid.XI - P).ravel()
        support = np.flatnonzero(np.abs(d) < GAUSSIAN_CUTOFF)
        ds = d[support]
        basis = np.empty((table.M + 1, ds.size), dtype=complex)
        basis[0] = np.exp(-np.abs(ds) ** 2)
        for n in range(1, table.M + 1):
            basis[n] = basis[n - 1] * np.conj(ds)
        pole_flat = None
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_dist = 1.0 / d
        if grid.in_range(p):
            jy, jx = grid.index_of(p)
            pole_flat = jy * grid.n_x + jx
            inv_dist[pole_flat] = 0.0
        if p == (0, 0):
            return cls(table._moment_rows, support, basis, inv_dist, pole_flat, None)
        # exp(-i P.x): the Taylor sums at P are transforms evaluated at P.
        mod = np.exp(-1j * (P.real * grid.X + P.imag * grid.Y))
        rows = table._moment_rows * mod.ravel()[None, :]
        return cls(rows, support, basis, inv_dist, pole_flat, np.conj(mod))


def build_wn_table(grid: SpectralGrid2D, M: int, hybrid_radius: float = 1.0) -> WnTable:
    """Tabulate ``W_0..W_M`` on the nodes of ``grid``."""
    return WnTable(grid, M, hybrid_radius)


def boundary_ratio(values: np.ndarray) -> float:
    """Largest modulus on the outermost ring relative to the global maximum."""
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    edge = max(
        np.max(np.abs(values[0, :])),
        np.max(np.abs(values[-1, :])),
        np.max(np.abs(values[:, 0])),
        np.max(np.abs(values[:, -1])),
    )
    return float(edge) / peak


def warn_if_not_decaying(values: np.ndarray, what: str, tol: float = BOUNDARY_DECAY_TOL) -> float:
    ratio = boundary_ratio(values)
    if ratio > tol:
        warnings.warn(f"{what} is {ratio:.2e} of its peak at the box edge (target {tol:.0e})", BoundaryDecayWarning, stacklevel=3)
    return ratio


def taylor_coeffs_at(S: Field2D, p, M: int, table: Optional[WnTable] = None) -> TaylorCoeffs:
    """
    Taylor coefficients of ``S`` in ``conj(xi)`` about the lattice point ``p``.

    Each coefficient is a single quadrature sum of ``z^n F^{-1} S`` against
    ``exp(-i P.x)``, which equals the transform evaluated at ``P`` without a
    second FFT.
    """
    S.require(Space.FOURIER)
    p = check_lattice_point(p)
    warn_if_not_decaying(S.values, "Fourier data")
    if table is None or table.grid != S.grid or table.M < M:
        table = WnTable(S.grid, M)
    s = S.grid.inverse_array(S.values)
    c = table.moments(s, p)[: M + 1]
    grid = S.grid
    diameter = 2.0 * np.pi * math.hypot(grid.l_x, grid.l_y)
    peak = S.max_abs()
    bound = np.array([peak * diameter**n / math.factorial(n) for n in range(M + 1)])
    if not np.all(np.isfinite(c)):
        raise FloatingPointError("non-finite Taylor coefficient")
    if np.any(np.abs(c) > bound * (1 + 1e-12) + 1e-300):
        warnings.warn("Taylor coefficients exceed max|S| diam^n / n!", TaylorBoundWarning, stacklevel=2)
    return TaylorCoeffs(np.asarray(c), p)


def _check_table(g: Field2D, table: WnTable) -> None:
    if g.grid != table.grid:
        from .grid import GridMismatchError

        raise GridMismatchError("field and kernel table use different grids")


def inverse_xi(S: Field2D, table: WnTable, p=(0, 0)) -> Field2D:
    """``F^{-1}[S/(xi - P)]`` with the singularity at lattice point ``p`` regularised."""
    S.require(Space.FOURIER)
    _check_table(S, table)
    p = check_lattice_point(p)
    return Field2D(S.grid, Space.PHYSICAL, table.inverse_xi_array(S.values, p))


def dbar_inverse(g: Field2D, table: WnTable, *, check_decay: bool = True) -> Field2D:
    """Solve ``dbar u = g`` for decaying ``u``: ``u = -2i F^{-1}(F g / xi)``."""
    g.require(Space.PHYSICAL)
    _check_table(g, table)
    if check_decay:
        warn_if_not_decaying(g.values, "input")
    gh = g.grid.forward_array(g.values)
    return Field2D(g.grid, Space.PHYSICAL, -2j * table.inverse_xi_array(gh, (0, 0), s_phys=g.values))


def dbar_inverse_shifted(g: Field2D, p, table: WnTable, *, check_decay: bool = True) -> Field2D:
    """
    ``dbar^{-1} g`` for data whose transform is concentrated near ``-P``.

    The transform is rotated by ``P`` so the concentration sits at the
    origin, divided by ``xi - P`` with the pole regularised, and the result
    demodulated by ``exp(-i P.x)``.
    """
    g.require(Space.PHYSICAL)
    _check_table(g, table)
    p = check_lattice_point(p)
    gh = g.grid.forward_array(g.values)
    shifted = shift_array(gh, (-p[0], -p[1]))
    if check_decay:
        warn_if_not_decaying(shifted, "shifted Fourier data")
    if p == (0, 0):
        return dbar_inverse(g, table, check_decay=False)
    P = g.grid.wavenumber(p)
    demod = np.exp(-1j * (P.real * g.grid.X + P.imag * g.grid.Y))
    return Field2D(g.grid, Space.PHYSICAL, -2j * demod * table.inverse_xi_array(shifted, p))


__all__ = [
    "BoundaryDecayWarning",
    "TaylorBoundWarning",
    "TaylorCoeffs",
    "WnTable",
    "boundary_ratio",
    "build_wn_table",
    "dbar_inverse",
    "dbar_inverse_shifted",
    "inverse_xi",
    "taylor_coeffs_at",
    "wn_closed_form",
    "wn_hybrid",
    "wn_series",
]
