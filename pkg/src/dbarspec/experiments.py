"""
Reproduction experiments: d-bar convergence sweeps, shifted versus plain
inversion, the scattering round trip and the DS II cross-validation.

Each function returns plain rows plus a verdict so the CLI and the tests can
share them.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cgo import CgoConfig
from .direct import Diagnostics, TimeStepperConfig, evolve_direct
from .grid import Field2D, SpectralGrid2D
from .ist import (
    Ds2State,
    ReflectionMap,
    centered_sublattice,
    energy,
    energy_scale,
    evolve_reflection,
    forward_scattering,
    inverse_scattering,
    l2_norm,
)
from .krylov import GmresConfig
from .oracles import dbar_test_input, dbar_test_solution, gaussian
from .regularizer import BoundaryDecayWarning, WnTable, dbar_inverse, dbar_inverse_shifted

# Test problem exp(-a (z - b)(conj(z) - c)) on a box with l = 4.
DBAR_A, DBAR_B, DBAR_C, DBAR_L = 0.5, 1.0, 1j, 4.0

# (n, l, mid-box k, near-edge k), all with l = 4.
SHIFT_ROWS: Tuple[Tuple[int, float, complex, complex], ...] = (
    (8, 4.0, 0.25 * (1 + 2j), 0.5 * (1 + 1j)),
    (16, 4.0, 0.5 * (1 + 2j), 1 + 1j),
    (32, 4.0, 1 + 2j, 2 * (1 + 1j)),
    (64, 4.0, 2 * (1 + 2j), 4 * (1 + 1j)),
    (128, 4.0, 4 * (1 + 2j), 8 * (1 + 1j)),
    (256, 4.0, 8 * (1 + 2j), 16 * (1 + 1j)),
)

# (n, l, published reconstruction error) for exp(-x^2 - y^2), M = 11.
ROUNDTRIP_ROWS: Tuple[Tuple[int, float, float], ...] = (
    (8, 0.7515, 7.09e-03),
    (16, 1.075, 3.1872e-04),
    (32, 1.5, 1.665e-06),
    (64, 2.1213, 1.736e-09),
    (128, 3.2, 2.40e-13),
    (256, 4.2, 5.0e-14),
)


def dbar_test_error(n: int, M: int, l: float = DBAR_L, k: complex = 0.0, shifted: bool = False, hybrid_radius: float = 1.0) -> float:
    """Max-norm error of the d-bar inverse on the Gaussian test problem."""
    grid = SpectralGrid2D.square(n, l)
    table = WnTable(grid, M, hybrid_radius)
    z = grid.Z
    g = grid.field(dbar_test_input(z, DBAR_A, DBAR_B, DBAR_C, k))
    exact = dbar_test_solution(z, DBAR_A, DBAR_B, DBAR_C, k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryDecayWarning)
        if shifted:
            p = grid.lattice_point(2j * np.conj(k))
            u = dbar_inverse_shifted(g, p, table)
        else:
            u = dbar_inverse(g, table)
    return float(np.max(np.abs(u.values - exact)))


def is_monotone(errors: Sequence[float], floor: float = 1e-14, exceptions: int = 1) -> bool:
    """Non-increasing up to ``floor``-sized wiggles, allowing a few exceptions."""
    bad = sum(1 for a, b in zip(errors, errors[1:]) if b > a and b > floor and b > 1.5 * a)
    return bad <= exceptions


@dataclass
class ConvergenceResult:
    m_sweep: List[Tuple[int, float]]
    n_sweep: List[Tuple[int, float]]
    passed: bool
    checks: Dict[str, bool] = field(default_factory=dict)

    def rows(self):
        return [("M", m, e) for m, e in self.m_sweep] + [("n", n, e) for n, e in self.n_sweep]


def dbar_convergence(
    Ms: Sequence[int] = tuple(range(0, 16)),
    ns: Sequence[int] = (8, 16, 32, 64, 128, 256),
    n_fixed: int = 128,
    M_fixed: int = 11,
    l: float = DBAR_L,
) -> ConvergenceResult:
    m_sweep = [(M, dbar_test_error(n_fixed, M, l)) for M in Ms]
    n_sweep = [(n, dbar_test_error(n, M_fixed, l)) for n in ns]
    e_m = dict(m_sweep)
    checks = {
        "m_sweep_monotone": is_monotone([e for _, e in m_sweep]),
        "plateau_by_M11": e_m.get(11, np.inf) <= 1e-12 and all(e <= 1e-12 for M, e in m_sweep if M >= 11),
        "n_sweep_1e-11_by_128": all(e <= 1e-11 for n, e in n_sweep if n >= 128),
    }
    return ConvergenceResult(m_sweep, n_sweep, all(checks.values()), checks)


@dataclass
class ShiftRow:
    n: int
    l: float
    k: complex
    err_unshifted: float
    err_shifted: float
    placement: str


def shift_comparison(rows: Sequence[Tuple[int, float, complex, complex]] = SHIFT_ROWS, M: int = 11, include_zero: bool = True) -> Tuple[List[ShiftRow], bool]:
    out: List[ShiftRow] = []
    ok = True
    for n, l, k_mid, k_edge in rows:
        for k, placement in ((k_mid, "mid"), (k_edge, "edge")):
            eu = dbar_test_error(n, M, l, k, shifted=False)
            es = dbar_test_error(n, M, l, k, shifted=True)
            out.append(ShiftRow(n, l, k, eu, es, placement))
            if placement == "edge" and n >= 64:
                ok = ok and es <= 1e-3 * eu
    if include_zero:
        n, l = rows[-1][0], rows[-1][1]
        eu = dbar_test_error(n, M, l, 0.0, shifted=False)
        es = dbar_test_error(n, M, l, 0.0, shifted=True)
        out.append(ShiftRow(n, l, 0j, eu, es, "zero"))
        ok = ok and abs(eu - es) <= 1e-13
    return out, ok


@dataclass
class RoundtripRow:
    n: int
    l: float
    error: float
    published: float
    seconds: float
    failed_solves: int

    @property
    def within_10x(self) -> bool:
        return self.published / 10 <= self.error <= self.published * 10 or self.error <= self.published


def roundtrip_row(n: int, l: float, published: float = float("nan"), cfg: CgoConfig = CgoConfig(), workers: Optional[int] = None) -> Tuple[RoundtripRow, ReflectionMap, Ds2State]:
    grid = SpectralGrid2D.square(n, l)
    q0 = gaussian(grid)
    t0 = time.perf_counter()
    r = forward_scattering(q0, cfg, workers=workers)
    q = inverse_scattering(r, cfg, workers=workers)
    secs = time.perf_counter() - t0
    err = float(np.max(np.abs(q.q.values - q0.values)))
    failed = int(r.failed.sum() + q.failed.sum())
    return RoundtripRow(n, l, err, published, secs, failed), r, q


def roundtrip(rows: Sequence[Tuple[int, float, float]] = ROUNDTRIP_ROWS[:5], cfg: CgoConfig = CgoConfig(), workers: Optional[int] = None) -> Tuple[List[RoundtripRow], bool]:
    out = [roundtrip_row(n, l, pub, cfg, workers)[0] for n, l, pub in rows]
    return out, all(r.within_10x for r in out)


@dataclass
class CompareResult:
    n: int
    l: float
    t: float
    n_t: int
    max_diff: float
    energy_drift: float
    l2_drift: float
    ist_l2_drift: Optional[float]
    ist_energy_drift: Optional[float]
    points: int
    ist_state: Ds2State
    direct_state: Ds2State
    diagnostics: Diagnostics

    @property
    def passed(self) -> bool:
        return self.energy_drift <= 1e-12 and self.max_diff <= 1e-4


def ds2_compare(
    n: int = 128,
    l: float = 3.2,
    t: float = 0.8,
    n_t: int = 10_000,
    cfg: CgoConfig = CgoConfig(),
    *,
    sublattice: int = 0,
    workers: Optional[int] = None,
    r0: Optional[ReflectionMap] = None,
    dispersion: float = 0.5,
    stride: int = 0,
    q0: Optional[Field2D] = None,
) -> CompareResult:
    """
    IST pipeline versus the direct time stepper on the same data.

    ``sublattice > 0`` reconstructs only a centred block of that width.
    """
    grid = SpectralGrid2D.square(n, l)
    q0 = gaussian(grid) if q0 is None else q0
    if r0 is None:
        r0 = forward_scattering(q0, cfg, workers=workers)
    mask = centered_sublattice(grid, sublattice) if sublattice else None
    ist = inverse_scattering(evolve_reflection(r0, t), cfg, workers=workers, mask=mask)
    diags = Diagnostics()
    direct = evolve_direct(q0, TimeStepperConfig(n_t=n_t, t_final=t, dispersion=dispersion, stride=stride), diagnostics=diags)
    sel = np.ones(grid.shape, dtype=bool) if mask is None else mask
    diff = float(np.max(np.abs(ist.q.values[sel] - direct.q.values[sel])))
    e0, e1 = energy(q0), energy(direct.q)
    scale = energy_scale(q0)
    n0 = l2_norm(q0)
    ist_l2 = ist_e = None
    if mask is None:
        ist_l2 = abs(l2_norm(ist.q) - n0) / n0
        ist_e = abs(energy(ist.q) - e0) / scale
    return CompareResult(
        n,
        l,
        t,
        n_t,
        diff,
        abs(e1 - e0) / scale,
        abs(l2_norm(direct.q) - n0) / n0,
        ist_l2,
        ist_e,
        int(sel.sum()),
        ist,
        direct,
        diags,
    )


def compare_inversion_methods(r: ReflectionMap, cfg: CgoConfig = CgoConfig(), *, workers: Optional[int] = None, mask: Optional[np.ndarray] = None) -> float:
    """Max difference between reconstructions using plain and shifted d-bar inversion."""
    a = inverse_scattering(r, cfg, method="iterated", workers=workers, mask=mask)
    b = inverse_scattering(r, cfg, method="direct", workers=workers, mask=mask)
    sel = np.ones(r.grid.shape, dtype=bool) if mask is None else mask
    return float(np.max(np.abs(a.q.values[sel] - b.q.values[sel])))


def cgo_config(M: int = 11, tol: float = 1e-14, maxit: int = 200) -> CgoConfig:
    return CgoConfig(M=M, gmres=GmresConfig(tol=tol, max_iters=maxit))


__all__ = [
    "ROUNDTRIP_ROWS",
    "SHIFT_ROWS",
    "CompareResult",
    "ConvergenceResult",
    "RoundtripRow",
    "ShiftRow",
    "cgo_config",
    "compare_inversion_methods",
    "dbar_convergence",
    "dbar_test_error",
    "ds2_compare",
    "is_monotone",
    "roundtrip",
    "roundtrip_row",
    "shift_comparison",
]
