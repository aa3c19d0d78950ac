"""
Davey-Stewartson II by inverse scattering.

The forward map solves one CGO problem per lattice wavenumber ``k`` and
reads off the reflection coefficient; the time dependence is an explicit
phase; the inverse map solves the same kind of problem with the roles of
``z`` and ``k`` exchanged on the dual grid.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .cgo import (
    CgoConfig,
    Convention,
    Potential,
    PotentialDecayWarning,
    _direct_operator,
    _iterated_operator,
)
from .grid import Field2D, Space, SpectralGrid2D
from .krylov import gmres_solve
from .regularizer import BoundaryDecayWarning, WnTable

Method = Literal["iterated", "direct"]
WORKERS_ENV = "DBAR_NUM_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class SweepResult:
    values: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    failed: np.ndarray


@dataclass
class ReflectionMap:
    """Reflection coefficient on the wavenumber lattice of ``grid`` at time ``t``."""

    grid: SpectralGrid2D
    r: Field2D
    t: float = 0.0
    failed: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.r.require(Space.FOURIER, self.grid)


@dataclass
class Ds2State:
    """Potential at time ``t``; ``mask`` marks the nodes actually computed."""

    q: Field2D
    t: float = 0.0
    mask: Optional[np.ndarray] = None
    failed: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None

    @property
    def grid(self) -> SpectralGrid2D:
        return self.q.grid

    def l2_norm(self) -> float:
        return l2_norm(self.q)

    def energy(self) -> float:
        return energy(self)


# ---------------------------------------------------------------------------
# Sweeps over independent CGO solves

_TABLES: Dict[Tuple, WnTable] = {}


def _table_for(grid: SpectralGrid2D, cfg: CgoConfig) -> WnTable:
    key = (grid, cfg.M, cfg.hybrid_radius)
    tab = _TABLES.get(key)
    if tab is None:
        _TABLES.clear()
        tab = WnTable(grid, cfg.M, cfg.hybrid_radius)
        _TABLES[key] = tab
    return tab


def _solve_chunk(grid: SpectralGrid2D, q: np.ndarray, params: Sequence[complex], cfg: CgoConfig, method: str):
    """Extracted value ``i h(P)`` (or its two-sided direct equivalent) for each parameter."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", (BoundaryDecayWarning, PotentialDecayWarning))
        pot = Potential(grid.field(q), Convention.HALF)
    table = _table_for(grid, cfg)
    b = (-1j * grid.forward_array(q)).ravel()
    out = np.empty(len(params), dtype=complex)
    res = np.empty(len(params))
    its = np.empty(len(params), dtype=int)
    ok = np.empty(len(params), dtype=bool)
    i0 = grid.origin_index
    for n, k in enumerate(params):
        if method == "iterated":
            p = pot.shift_point(k)
            x, rep = gmres_solve(_iterated_operator(grid, table, q, p), b, cfg.gmres, field="complex")
            out[n] = 1j * x.reshape(grid.shape)[grid.index_of(p)]
            res[n], its[n], ok[n] = rep.residual, rep.iterations, rep.converged
        else:
            # Two-sided formulation: r = (i/2)(S_+(0) - S_-(0)) with potentials +q and -q.
            qe = q * pot.modulation(k)
            vals = []
            worst, total, conv = 0.0, 0, True
            for sgn in (1.0, -1.0):
                bb = (-1j * sgn * grid.forward_array(qe)).ravel()
                x, rep = gmres_solve(_direct_operator(grid, table, sgn * qe), bb, cfg.gmres, field="real")
                vals.append(x.reshape(grid.shape)[i0])
                worst, total, conv = max(worst, rep.residual), total + rep.iterations, conv and rep.converged
            out[n] = 0.5j * (vals[0] - vals[1])
            res[n], its[n], ok[n] = worst, total, conv
    return out, res, its, ~ok


def sweep(
    grid: SpectralGrid2D,
    q: np.ndarray,
    params: Sequence[complex],
    cfg: CgoConfig,
    method: Method = "iterated",
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Solve independent CGO problems for every parameter in ``params``.

    Results are assembled by position, so they do not depend on the worker
    count.
    """
    if method not in ("iterated", "direct"):
        raise ValueError(f"unknown method {method!r}")
    params = list(params)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(params) < 2:
        vals, res, its, bad = _solve_chunk(grid, q, params, cfg, method)
        return SweepResult(vals, res, its, bad)
    nchunks = min(len(params), 4 * workers)
    bounds = np.linspace(0, len(params), nchunks + 1).astype(int)
    chunks = [params[bounds[i] : bounds[i + 1]] for i in range(nchunks)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_solve_chunk, [grid] * nchunks, [q] * nchunks, chunks, [cfg] * nchunks, [method] * nchunks))
    return SweepResult(*(np.concatenate([p[i] for p in parts]) for i in range(4)))


def _require_square(grid: SpectralGrid2D) -> None:
    if not grid.is_square:
        raise ValueError("the DS II pipeline needs n_x == n_y and l_x == l_y")


# ---------------------------------------------------------------------------
# Forward map, time evolution, inverse map


def forward_scattering(
    q0: Field2D | Potential,
    cfg: CgoConfig = CgoConfig(),
    *,
    method: Method = "iterated",
    workers: Optional[int] = None,
) -> ReflectionMap:
    """``r(k) = i h(i conj(k))`` for every ``k`` on the wavenumber lattice."""
    q = q0.q if isinstance(q0, Potential) else q0
    q.require(Space.PHYSICAL)
    grid = q.grid
    _require_square(grid)
    ks = grid.XI.ravel()
    out = sweep(grid, q.values, ks, cfg, method, workers)
    return ReflectionMap(
        grid,
        Field2D(grid, Space.FOURIER, out.values.reshape(grid.shape)),
        0.0,
        out.failed.reshape(grid.shape),
        out.residuals.reshape(grid.shape),
    )


def reflection_phase(grid: SpectralGrid2D, t: float) -> np.ndarray:
    return np.exp(-0.5j * t * (grid.XI1**2 - grid.XI2**2))


def evolve_reflection(r: ReflectionMap, t: float) -> ReflectionMap:
    """Advance by ``t``: multiply by ``exp(-i t (k_1^2 - k_2^2)/2)``."""
    vals = r.r.values * reflection_phase(r.grid, t)
    return ReflectionMap(r.grid, r.r.with_values(vals), r.t + t, r.failed, r.residuals)


def dual_potential(r: ReflectionMap) -> Field2D:
    """
    ``conj(r)`` as a physical-space field on the dual grid.

    The dual nodes are ``(j - n/2)/l`` while the lattice runs over
    ``(j - n/2 + 1)/l``, hence a rotation by one index; the wrapped entry is
    the lattice corner where ``r`` is negligible.
    """
    dual = r.grid.dual()
    vals = np.conj(np.roll(r.r.values, (1, 1), axis=(0, 1)))
    return Field2D(dual, Space.PHYSICAL, vals)


def centered_sublattice(grid: SpectralGrid2D, width: int) -> np.ndarray:
    """Boolean mask selecting the central ``width x width`` block of nodes."""
    if width <= 0 or width > min(grid.n_x, grid.n_y):
        raise ValueError(f"sub-lattice width {width} out of range")
    mask = np.zeros(grid.shape, dtype=bool)
    cy, cx = grid.n_y // 2, grid.n_x // 2
    lo = width // 2
    mask[cy - lo : cy - lo + width, cx - lo : cx - lo + width] = True
    return mask


def inverse_scattering(
    r: ReflectionMap,
    cfg: CgoConfig = CgoConfig(),
    *,
    method: Method = "iterated",
    workers: Optional[int] = None,
    mask: Optional[np.ndarray] = None,
) -> Ds2State:
    """
    Reconstruct ``q(z, t)`` from ``r(k, t)``.

    The CGO problem is solved on the dual grid with potential ``conj(r)``
    and spectral parameter ``z``; ``q(z) = i h(i conj(z))``.  ``mask``
    restricts the reconstruction to a subset of nodes.
    """
    grid = r.grid
    _require_square(grid)
    pot = dual_potential(r)
    dual = pot.grid
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    zs = grid.Z[mask]
    out = sweep(dual, pot.values, zs, cfg, method, workers)
    q = np.zeros(grid.shape, dtype=complex)
    q[mask] = out.values
    failed = np.zeros(grid.shape, dtype=bool)
    failed[mask] = out.failed
    residuals = np.zeros(grid.shape)
    residuals[mask] = out.residuals
    return Ds2State(Field2D(grid, Space.PHYSICAL, q), r.t, None if mask.all() else mask, failed, residuals)


# ---------------------------------------------------------------------------
# Diagnostics


def _cos2_multiplier(grid: SpectralGrid2D) -> np.ndarray:
    """``xi_1^2/|xi|^2`` with 0 at the origin."""
    r2 = grid.XI1**2 + grid.XI2**2
    out = np.zeros(grid.shape)
    nz = r2 > 0
    out[nz] = grid.XI1[nz] ** 2 / r2[nz]
    return out


def _riesz_ratio(grid: SpectralGrid2D) -> np.ndarray:
    """Multiplier ``xi_2/xi_1`` of ``dx^{-1} dy``, 0 on the line ``xi_1 = 0``."""
    out = np.zeros(grid.shape)
    nz = grid.XI1 != 0
    out[nz] = grid.XI2[nz] / grid.XI1[nz]
    return out


def compute_phi(q: Field2D) -> Field2D:
    """Mean-free solution of ``Laplacian(phi) = -2 (|q|^2)_xx``."""
    q.require(Space.PHYSICAL)
    grid = q.grid
    uh = grid.forward_array(np.abs(q.values) ** 2)
    return Field2D(grid, Space.PHYSICAL, grid.inverse_array(-2.0 * _cos2_multiplier(grid) * uh))


def l2_norm(q: Field2D) -> float:
    g = q.grid
    return float(np.sqrt(np.sum(np.abs(q.values) ** 2) * g.h_x * g.h_y))


def energy_terms(q: Field2D) -> np.ndarray:
    """
    The four integrals making up the conserved energy.

    Returns ``[int |q_x|^2, -int |q_y|^2, -int (|q|^2 - mean)^2,
    1/2 int (phi^2 + (dx^{-1} dy phi)^2)]``.  The box mean is removed from
    ``|q|^2`` because ``phi`` is mean-free; on the torus this keeps the
    quartic and ``phi`` terms consistent with their whole-plane values.
    """
    q.require(Space.PHYSICAL)
    g = q.grid
    dA = g.h_x * g.h_y
    qh = g.forward_array(q.values)
    qx = g.inverse_array(1j * g.XI1 * qh)
    qy = g.inverse_array(1j * g.XI2 * qh)
    u = np.abs(q.values) ** 2
    uh = g.forward_array(u)
    phih = -2.0 * _cos2_multiplier(g) * uh
    phi = g.inverse_array(phih).real
    psi = g.inverse_array(_riesz_ratio(g) * phih).real
    du = u - u.mean()
    return np.array(
        [
            np.sum(np.abs(qx) ** 2) * dA,
            -np.sum(np.abs(qy) ** 2) * dA,
            -np.sum(du**2) * dA,
            0.5 * np.sum(phi**2 + psi**2) * dA,
        ]
    )


def energy(state: Ds2State | Field2D) -> float:
    q = state.q if isinstance(state, Ds2State) else state
    return float(np.sum(energy_terms(q)))


def energy_scale(state: Ds2State | Field2D) -> float:
    """Sum of the magnitudes of the energy terms, used to normalise drifts."""
    q = state.q if isinstance(state, Ds2State) else state
    return float(np.sum(np.abs(energy_terms(q))))


__all__ = [
    "Ds2State",
    "ReflectionMap",
    "SweepResult",
    "centered_sublattice",
    "compute_phi",
    "default_workers",
    "dual_potential",
    "energy",
    "energy_scale",
    "energy_terms",
    "evolve_reflection",
    "forward_scattering",
    "inverse_scattering",
    "l2_norm",
    "reflection_phase",
    "sweep",
]
