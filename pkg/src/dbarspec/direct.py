"""
Pseudospectral time stepping for DS II in Fourier space.

The equation is written as

    i dq^/dt = c (xi_1^2 - xi_2^2) q^ + F[ F^{-1}(cos(2 phi) F|q|^2) q ],

with ``cos(2 phi) = (xi_1^2 - xi_2^2)/|xi|^2`` set to 0 at the origin and
``c`` the dispersion coefficient.  The linear part is integrated exactly
with an integrating factor; the remainder uses classical RK4 (Lawson's
method).  With ``c = 1/2`` this is the flow generated by the inverse
scattering pipeline with reflection phase ``exp(-i t (k_1^2 - k_2^2)/2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .grid import Field2D, Space, SpectralGrid2D
from .ist import Ds2State, energy, l2_norm


class Scheme(enum.Enum):
    IFRK4 = "ifrk4"


class BlowUpError(FloatingPointError):
    """The solution became non-finite; carries the last finite state."""

    def __init__(self, last_state: Ds2State, step: int):
        super().__init__(f"non-finite field after step {step} (last finite time t={last_state.t:.6g})")
        self.last_state = last_state
        self.step = step


@dataclass(frozen=True)
class TimeStepperConfig:
    n_t: int = 10_000
    t_final: float = 0.8
    scheme: Scheme = Scheme.IFRK4
    dispersion: float = 0.5
    nonlinear: bool = True
    dealias: bool = False
    stride: int = 0

    def __post_init__(self) -> None:
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError(f"n_t must be a positive integer, got {self.n_t}")
        if not math.isfinite(self.t_final):
            raise ValueError("t_final must be finite")
        if self.stride < 0:
            raise ValueError("stride must be non-negative")
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def dt(self) -> float:
        return self.t_final / self.n_t


@dataclass
class Diagnostics:
    t: List[float] = field(default_factory=list)
    l2: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)

    def record(self, q: Field2D, t: float) -> None:
        self.t.append(t)
        self.l2.append(l2_norm(q))
        self.energy.append(energy(q))


def cos2_angle(grid: SpectralGrid2D) -> np.ndarray:
    """``(xi_1^2 - xi_2^2)/|xi|^2``, 0 at the origin."""
    r2 = grid.XI1**2 + grid.XI2**2
    out = np.zeros(grid.shape)
    nz = r2 > 0
    out[nz] = (grid.XI1[nz] ** 2 - grid.XI2[nz] ** 2) / r2[nz]
    return out


def dealias_mask(grid: SpectralGrid2D) -> np.ndarray:
    """Two-thirds rule mask on the wavenumber lattice."""
    kx = np.abs(grid.modes_x) <= grid.n_x // 3
    ky = np.abs(grid.modes_y) <= grid.n_y // 3
    return np.outer(ky, kx).astype(float)


def linear_symbol(grid: SpectralGrid2D, dispersion: float = 0.5) -> np.ndarray:
    """``L`` in ``dq^/dt = L q^ + N(q^)``."""
    return -1j * dispersion * (grid.XI1**2 - grid.XI2**2)


def _nonlinear(grid: SpectralGrid2D, c2: np.ndarray, mask: Optional[np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    def nl(qh: np.ndarray) -> np.ndarray:
        q = grid.inverse_array(qh)
        u = np.abs(q) ** 2
        out = -1j * grid.forward_array(grid.inverse_array(c2 * grid.forward_array(u)) * q)
        if mask is not None:
            out *= mask
        return out

    return nl


def ds2_rhs(q_hat: Field2D, dispersion: float = 0.5, *, nonlinear: bool = True) -> Field2D:
    """Time derivative ``dq^/dt`` (linear plus nonlinear part)."""
    q_hat.require(Space.FOURIER)
    grid = q_hat.grid
    out = linear_symbol(grid, dispersion) * q_hat.values
    if nonlinear:
        out = out + _nonlinear(grid, cos2_angle(grid), None)(q_hat.values)
    return Field2D(grid, Space.FOURIER, out)


def evolve_direct(
    q0: Field2D,
    cfg: TimeStepperConfig = TimeStepperConfig(),
    *,
    diagnostics: Optional[Diagnostics] = None,
    t0: float = 0.0,
) -> Ds2State:
    """
    Integrate from ``t0`` to ``t0 + cfg.t_final`` in ``cfg.n_t`` equal steps.

    Negative ``t_final`` integrates backwards.  When ``cfg.stride > 0`` and
    ``diagnostics`` is given, L2 norm and energy are recorded every
    ``stride`` steps (and at both ends).
    """
    q0.require(Space.PHYSICAL)
    grid = q0.grid
    dt = cfg.dt
    E = np.exp(linear_symbol(grid, cfg.dispersion) * dt / 2.0)
    E2 = E * E
    mask = dealias_mask(grid) if cfg.dealias else None
    if cfg.nonlinear:
        nl = _nonlinear(grid, cos2_angle(grid), mask)
    else:

        def nl(qh: np.ndarray) -> np.ndarray:
            return np.zeros_like(qh)

    qh = grid.forward_array(q0.values)
    if mask is not None:
        qh = qh * mask
    record = diagnostics is not None and cfg.stride > 0
    if record:
        diagnostics.record(q0, t0)
    last_good = qh
    for step in range(1, cfg.n_t + 1):
        k1 = nl(qh)
        k2 = nl(E * (qh + (dt / 2.0) * k1))
        k3 = nl(E * qh + (dt / 2.0) * k2)
        k4 = nl(E2 * qh + dt * E * k3)
        qh = E2 * qh + (dt / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        if not np.all(np.isfinite(qh)):
            last = Ds2State(Field2D(grid, Space.PHYSICAL, grid.inverse_array(last_good)), t0 + (step - 1) * dt)
            raise BlowUpError(last, step)
        last_good = qh
        if record and (step % cfg.stride == 0 or step == cfg.n_t):
            diagnostics.record(Field2D(grid, Space.PHYSICAL, grid.inverse_array(qh)), t0 + step * dt)
    return Ds2State(Field2D(grid, Space.PHYSICAL, grid.inverse_array(qh)), t0 + cfg.t_final)


__all__ = [
    "BlowUpError",
    "Diagnostics",
    "Scheme",
    "TimeStepperConfig",
    "cos2_angle",
    "dealias_mask",
    "ds2_rhs",
    "evolve_direct",
    "linear_symbol",
]
