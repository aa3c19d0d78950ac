"""
Computational torus, wavenumber lattice and continuous-FT normalization.

Every other module works with continuous Fourier transform semantics

    F f(xi) = (1/2pi) \\int f(x) exp(-i xi.x) dx,
    F^{-1} g(x) = (1/2pi) \\int g(xi) exp(i xi.x) dxi,

and relies on the discrete realisation defined here.  Arrays are stored
as ``values[j_y, j_x]`` (row-major, ``j_x`` fast) and wavenumbers are kept
in increasing order, so the lattice origin and any shift point are
reachable by plain index arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.fft as sfft

LatticePoint = Tuple[int, int]


class SpaceError(ValueError):
    """A field was passed to an operation expecting the other space."""


class GridMismatchError(ValueError):
    """Two fields (or a field and a table) live on different grids."""


class OffLatticeError(ValueError):
    """A requested shift does not coincide with a wavenumber lattice point."""


class Space(enum.Enum):
    PHYSICAL = "physical"
    FOURIER = "fourier"


@dataclass(frozen=True)
class SpectralGrid2D:
    """
    Uniform periodic grid on ``[-pi l_x, pi l_x) x [-pi l_y, pi l_y)``.

    Parameters
    ----------
    n_x, n_y : int
        Even mode counts.
    l_x, l_y : float
        Half-width scale; the wavenumber spacing is ``1/l_x`` (``1/l_y``).
    """

    n_x: int
    n_y: int
    l_x: float
    l_y: float

    def __post_init__(self) -> None:
        for name in ("n_x", "n_y"):
            n = getattr(self, name)
            if int(n) != n or n < 2 or n % 2:
                raise ValueError(f"{name} must be a positive even integer, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("l_x", "l_y"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be a positive real, got {val!r}")
            object.__setattr__(self, name, val)

    @classmethod
    def square(cls, n: int, l: float) -> "SpectralGrid2D":
        return cls(n, n, l, l)

    # Pickling ships only the defining parameters; cached arrays are rebuilt.
    def __getstate__(self):
        return {k: self.__dict__[k] for k in ("n_x", "n_y", "l_x", "l_y")}

    def __setstate__(self, state) -> None:
        self.__dict__.update(state)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_y, self.n_x)

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    @property
    def is_square(self) -> bool:
        return self.n_x == self.n_y and self.l_x == self.l_y

    @property
    def h_x(self) -> float:
        return 2.0 * np.pi * self.l_x / self.n_x

    @property
    def h_y(self) -> float:
        return 2.0 * np.pi * self.l_y / self.n_y

    @property
    def quad_weight(self) -> float:
        """Factor ``h_x h_y / 2pi`` turning node sums into continuous transforms."""
        return self.h_x * self.h_y / (2.0 * np.pi)

    @property
    def origin_index(self) -> Tuple[int, int]:
        """Array index ``(j_y, j_x)`` of the wavenumber ``xi = 0``."""
        return (self.n_y // 2 - 1, self.n_x // 2 - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.l_x * (-np.pi + 2.0 * np.pi * np.arange(self.n_x) / self.n_x)

    @cached_property
    def y(self) -> np.ndarray:
        return self.l_y * (-np.pi + 2.0 * np.pi * np.arange(self.n_y) / self.n_y)

    @cached_property
    def modes_x(self) -> np.ndarray:
        return np.arange(-self.n_x // 2 + 1, self.n_x // 2 + 1)

    @cached_property
    def modes_y(self) -> np.ndarray:
        return np.arange(-self.n_y // 2 + 1, self.n_y // 2 + 1)

    @cached_property
    def xi1(self) -> np.ndarray:
        return self.modes_x / self.l_x

    @cached_property
    def xi2(self) -> np.ndarray:
        return self.modes_y / self.l_y

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[None, :], self.shape)

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[:, None], self.shape)

    @cached_property
    def Z(self) -> np.ndarray:
        """Complex node coordinates ``z = x + i y``."""
        return self.x[None, :] + 1j * self.y[:, None]

    @cached_property
    def XI1(self) -> np.ndarray:
        return np.broadcast_to(self.xi1[None, :], self.shape)

    @cached_property
    def XI2(self) -> np.ndarray:
        return np.broadcast_to(self.xi2[:, None], self.shape)

    @cached_property
    def XI(self) -> np.ndarray:
        """Complex wavenumbers ``xi = xi_1 + i xi_2``."""
        return self.xi1[None, :] + 1j * self.xi2[:, None]

    @cached_property
    def _sign(self) -> np.ndarray:
        # (-1)^(m1 + m2): phase correction for nodes starting at -pi l.
        return np.outer((-1.0) ** self.modes_y, (-1.0) ** self.modes_x)

    @cached_property
    def _inverse_scale(self) -> float:
        return self.size / (2.0 * np.pi * self.l_x * self.l_y)

    def wavenumber(self, p: LatticePoint) -> complex:
        """Complex wavenumber of the integer lattice point ``p = (p1, p2)``."""
        return p[0] / self.l_x + 1j * p[1] / self.l_y

    def lattice_point(self, xi: complex, *, atol: float = 1e-9) -> LatticePoint:
        """Snap a complex wavenumber to its lattice point or raise."""
        a = complex(xi).real * self.l_x
        b = complex(xi).imag * self.l_y
        p = (int(round(a)), int(round(b)))
        if abs(a - p[0]) > atol or abs(b - p[1]) > atol:
            raise OffLatticeError(f"wavenumber {xi!r} is not on the lattice with spacing (1/{self.l_x}, 1/{self.l_y})")
        return p

    def index_of(self, p: LatticePoint) -> Tuple[int, int]:
        """Array index of lattice point ``p``, wrapped cyclically."""
        i0y, i0x = self.origin_index
        return ((i0y + p[1]) % self.n_y, (i0x + p[0]) % self.n_x)

    def in_range(self, p: LatticePoint) -> bool:
        return (-self.n_x // 2 < p[0] <= self.n_x // 2) and (-self.n_y // 2 < p[1] <= self.n_y // 2)

    def dual(self) -> "SpectralGrid2D":
        """Grid whose nodes are the wavenumbers of this one (shifted by one index) and vice versa."""
        return SpectralGrid2D(self.n_x, self.n_y, self.n_x / (2.0 * np.pi * self.l_x), self.n_y / (2.0 * np.pi * self.l_y))

    def field(self, values, space: Space = Space.PHYSICAL) -> "Field2D":
        return Field2D(self, space, np.asarray(values, dtype=complex))

    def zeros(self, space: Space = Space.PHYSICAL) -> "Field2D":
        return Field2D(self, space, np.zeros(self.shape, dtype=complex))

    # Raw-array transforms used in hot loops.
    def forward_array(self, f: np.ndarray) -> np.ndarray:
        fh = sfft.fft2(f)
        fh = np.roll(fh, (self.n_y // 2 - 1, self.n_x // 2 - 1), axis=(0, 1))
        fh *= self.quad_weight * self._sign
        return fh

    def inverse_array(self, fh: np.ndarray) -> np.ndarray:
        g = np.roll(fh * self._sign, (1 - self.n_y // 2, 1 - self.n_x // 2), axis=(0, 1))
        f = sfft.ifft2(g)
        f *= self._inverse_scale
        return f


@dataclass(frozen=True)
class Field2D:
    """Complex samples on a grid, tagged with the space they live in."""

    grid: SpectralGrid2D
    space: Space
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1 and v.size == self.grid.size:
            v = v.reshape(self.grid.shape)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values of shape {v.shape} do not match grid shape {self.grid.shape}")
        object.__setattr__(self, "values", v)
        if not isinstance(self.space, Space):
            object.__setattr__(self, "space", Space(self.space))

    @property
    def flat(self) -> np.ndarray:
        """Row-major view (``j_x`` fast)."""
        return self.values.ravel()

    def require(self, space: Space, grid: SpectralGrid2D | None = None) -> "Field2D":
        if self.space is not space:
            raise SpaceError(f"expected a {space.value}-space field, got {self.space.value}")
        if grid is not None and grid != self.grid:
            raise GridMismatchError("field grid differs from the expected grid")
        return self

    def with_values(self, values: np.ndarray) -> "Field2D":
        return Field2D(self.grid, self.space, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def fft2_forward(f: Field2D) -> Field2D:
    """Discrete approximation of the continuous transform on the lattice."""
    f.require(Space.PHYSICAL)
    return Field2D(f.grid, Space.FOURIER, f.grid.forward_array(f.values))


def fft2_inverse(f: Field2D) -> Field2D:
    """Inverse of :func:`fft2_forward`."""
    f.require(Space.FOURIER)
    return Field2D(f.grid, Space.PHYSICAL, f.grid.inverse_array(f.values))


def check_lattice_point(p) -> LatticePoint:
    """Validate an integer pair; fractional entries are off the lattice."""
    try:
        a, b = p
    except (TypeError, ValueError) as exc:
        raise OffLatticeError(f"lattice point must be an integer pair, got {p!r}") from exc
    out = []
    for v in (a, b):
        if isinstance(v, (complex, np.complexfloating)) or int(round(float(v))) != v:
            raise OffLatticeError(f"lattice point must be an integer pair, got {p!r}")
        out.append(int(round(float(v))))
    return (out[0], out[1])


def shift_array(values: np.ndarray, p: LatticePoint) -> np.ndarray:
    """``values(xi + p)`` as a cyclic rotation of a Fourier-space array."""
    return np.roll(values, (-p[1], -p[0]), axis=(0, 1))


def circular_shift(f: Field2D, p) -> Field2D:
    """
    Return ``f(xi + p)`` for an on-lattice point ``p = (p1, p2)``.

    ``p`` is given in lattice units, i.e. the wavenumber ``(p1/l_x, p2/l_y)``.
    """
    f.require(Space.FOURIER)
    p = check_lattice_point(p)
    return Field2D(f.grid, Space.FOURIER, shift_array(f.values, p))


__all__ = [
    "Field2D",
    "GridMismatchError",
    "LatticePoint",
    "OffLatticeError",
    "Space",
    "SpaceError",
    "SpectralGrid2D",
    "check_lattice_point",
    "circular_shift",
    "fft2_forward",
    "fft2_inverse",
    "shift_array",
]
