"""Closed-form test problems with known d-bar inverses and transforms."""

from __future__ import annotations

import numpy as np

from .grid import Field2D, Space, SpectralGrid2D


def _phi1(w: np.ndarray) -> np.ndarray:
    """``(1 - exp(-w))/w`` evaluated without cancellation near ``w = 0``."""
    w = np.asarray(w, dtype=complex)
    out = np.ones_like(w)
    nz = np.abs(w) > 1e-8
    out[nz] = -np.expm1(-w[nz]) / w[nz]
    small = ~nz
    out[small] = 1.0 - w[small] / 2.0
    return out


def dbar_test_input(z: np.ndarray, a: float, b: complex, c: complex, k: complex = 0.0) -> np.ndarray:
    """``exp(conj(k z) - k z) exp(-a (z - b)(conj(z) - c))``."""
    return np.exp(np.conj(k) * np.conj(z) - k * z - a * (z - b) * (np.conj(z) - c))


def dbar_test_solution(z: np.ndarray, a: float, b: complex, c: complex, k: complex = 0.0) -> np.ndarray:
    """
    Decaying solution ``u`` of ``dbar u = dbar_test_input``.

    Completing the square moves the modulation into the Gaussian centre,
    ``E g = C exp(-a (z - b')(conj(z) - c'))`` with ``b' = b + conj(k)/a`` and
    ``c' = c - k/a``; then ``u = C (1 - exp(-w)) / (a (z - b'))`` with
    ``w = a (z - b')(conj(z) - c')``, and ``C exp(-w)`` is the input itself.
    """
    z = np.asarray(z, dtype=complex)
    kc = np.conj(k)
    b1 = b + kc / a
    c1 = c - k / a
    C = np.exp(kc * c - k * b1)
    w = a * (z - b1) * (np.conj(z) - c1)
    out = np.empty(z.shape, dtype=complex)
    near = np.abs(w) < 1.0
    out[near] = C * (np.conj(z[near]) - c1) * _phi1(w[near])
    # Away from the centre use C exp(-w) = E g directly; C alone may underflow.
    far = ~near
    out[far] = (C - dbar_test_input(z[far], a, b, c, k)) / (a * (z[far] - b1))
    return out


def gaussian(grid: SpectralGrid2D, amplitude: complex = 1.0) -> Field2D:
    return Field2D(grid, Space.PHYSICAL, amplitude * np.exp(-np.abs(grid.Z) ** 2))


def gaussian_transform(grid: SpectralGrid2D, amplitude: complex = 1.0) -> Field2D:
    """Continuous transform of ``amplitude exp(-|z|^2)``: ``amplitude/2 exp(-|xi|^2/4)``."""
    return Field2D(grid, Space.FOURIER, 0.5 * amplitude * np.exp(-np.abs(grid.XI) ** 2 / 4.0))


__all__ = ["dbar_test_input", "dbar_test_solution", "gaussian", "gaussian_transform"]
