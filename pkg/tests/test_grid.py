"""Grid construction, continuous-FT normalisation and lattice shifts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbarspec.grid import (
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
from dbarspec.oracles import gaussian, gaussian_transform

from conftest import smooth_random_field


class TestSpectralGrid2D:
    def test_wavenumber_spacing_and_origin(self):
        g = SpectralGrid2D(16, 8, 2.0, 0.5)
        assert np.allclose(np.diff(g.xi1), 1 / 2.0)
        assert np.allclose(np.diff(g.xi2), 1 / 0.5)
        iy, ix = g.origin_index
        assert g.XI[iy, ix] == 0
        assert g.xi1[0] == (-16 // 2 + 1) / 2.0 and g.xi1[-1] == 8 / 2.0

    def test_node_coordinates(self):
        g = SpectralGrid2D.square(8, 1.5)
        assert g.x[0] == pytest.approx(-np.pi * 1.5)
        assert g.x[-1] + g.h_x == pytest.approx(np.pi * 1.5)
        assert g.Z.shape == (8, 8) and g.size == 64

    @pytest.mark.parametrize("n", [0, 3, -4, 7.5])
    def test_rejects_odd_or_nonpositive(self, n):
        with pytest.raises(ValueError):
            SpectralGrid2D(n, 8, 1.0, 1.0)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            SpectralGrid2D(8, 8, 0.0, 1.0)

    def test_frozen(self):
        g = SpectralGrid2D.square(8, 1.0)
        with pytest.raises(AttributeError):
            g.n_x = 16

    def test_lattice_point_snapping(self):
        g = SpectralGrid2D.square(16, 4.0)
        assert g.lattice_point(0.5 + 0.25j) == (2, 1)
        with pytest.raises(OffLatticeError):
            g.lattice_point(0.1 + 0j)

    def test_dual_grid_swaps_nodes_and_wavenumbers(self):
        g = SpectralGrid2D.square(16, 1.3)
        d = g.dual()
        # dual nodes are (j - n/2)/l, i.e. the lattice shifted down by one index
        assert np.allclose(d.x, (np.arange(16) - 8) / 1.3)
        assert np.allclose(d.dual().x, g.x)


class TestField2D:
    def test_flat_length_and_order(self):
        g = SpectralGrid2D(4, 2, 1.0, 1.0)
        vals = np.arange(8).reshape(2, 4)
        f = Field2D(g, Space.PHYSICAL, vals)
        assert f.flat.size == g.n_x * g.n_y
        assert list(f.flat.real[:4]) == [0, 1, 2, 3]  # j_x fastest

    def test_shape_mismatch(self):
        g = SpectralGrid2D.square(4, 1.0)
        with pytest.raises(GridMismatchError):
            Field2D(g, Space.PHYSICAL, np.zeros((4, 5)))

    def test_forward_of_fourier_field_is_an_error(self):
        g = SpectralGrid2D.square(4, 1.0)
        with pytest.raises(SpaceError):
            fft2_forward(g.zeros(Space.FOURIER))
        with pytest.raises(SpaceError):
            fft2_inverse(g.zeros(Space.PHYSICAL))


class TestTransforms:
    def test_gaussian_pair_forward(self):
        g = SpectralGrid2D.square(128, 4.0)
        err = np.max(np.abs(fft2_forward(gaussian(g)).values - gaussian_transform(g).values))
        assert err < 1e-13

    def test_gaussian_pair_inverse(self):
        g = SpectralGrid2D.square(128, 4.0)
        err = np.max(np.abs(fft2_inverse(gaussian_transform(g)).values - gaussian(g).values))
        assert err < 1e-13

    def test_gaussian_pair_rectangular(self):
        g = SpectralGrid2D(128, 64, 4.0, 2.5)
        err = np.max(np.abs(fft2_forward(gaussian(g)).values - gaussian_transform(g).values))
        assert err < 1e-13

    def test_zero(self):
        g = SpectralGrid2D.square(8, 1.0)
        assert not np.any(fft2_forward(g.zeros()).values)
        assert not np.any(fft2_inverse(g.zeros(Space.FOURIER)).values)

    def test_roundtrip(self, rng):
        g = SpectralGrid2D(32, 16, 2.0, 1.0)
        f = g.field(smooth_random_field(g, rng))
        back = fft2_inverse(fft2_forward(f)).values
        assert np.max(np.abs(back - f.values)) <= 1e-14 * np.max(np.abs(f.values))

    def test_parseval(self, rng):
        g = SpectralGrid2D.square(64, 2.5)
        f = g.field(smooth_random_field(g, rng))
        phys = np.sum(np.abs(f.values) ** 2) * g.h_x * g.h_y
        four = np.sum(np.abs(fft2_forward(f).values) ** 2) / (g.l_x * g.l_y)
        assert four == pytest.approx(phys, rel=1e-12)

    def test_dbar_derivative_of_gaussian(self):
        g = SpectralGrid2D.square(128, 4.0)
        fh = fft2_forward(gaussian(g)).values
        d = g.inverse_array(0.5j * g.XI * fh)
        exact = -g.Z * np.exp(-np.abs(g.Z) ** 2)
        assert np.max(np.abs(d - exact)) < 1e-11


class TestCircularShift:
    def test_zero_shift(self):
        g = SpectralGrid2D.square(8, 1.0)
        f = g.field(np.arange(64).reshape(8, 8), Space.FOURIER)
        assert np.array_equal(circular_shift(f, (0, 0)).values, f.values)

    @given(p1=st.integers(-20, 20), p2=st.integers(-20, 20))
    def test_shift_unshift_bit_identical(self, p1, p2):
        g = SpectralGrid2D(8, 16, 1.0, 2.0)
        vals = np.random.default_rng(abs(p1 * 41 + p2)).normal(size=(16, 8)) + 0j
        f = g.field(vals, Space.FOURIER)
        assert np.array_equal(circular_shift(circular_shift(f, (p1, p2)), (-p1, -p2)).values, vals)

    @pytest.mark.parametrize("p", [(1, 0), (0, 2), (-3, 1), (2, -2)])
    def test_delta_moves_to_minus_p(self, p):
        g = SpectralGrid2D.square(8, 1.0)
        vals = np.zeros(g.shape, dtype=complex)
        vals[g.origin_index] = 1.0
        out = circular_shift(g.field(vals, Space.FOURIER), p).values
        assert np.argwhere(out == 1.0).tolist() == [list(g.index_of((-p[0], -p[1])))]

    def test_off_lattice(self):
        g = SpectralGrid2D.square(8, 1.0)
        with pytest.raises(OffLatticeError):
            circular_shift(g.zeros(Space.FOURIER), (0.5, 0))
        with pytest.raises(SpaceError):
            circular_shift(g.zeros(Space.PHYSICAL), (1, 0))

    @given(p1=st.integers(-6, 6), p2=st.integers(-6, 6))
    def test_modulation_duality(self, p1, p2):
        g = SpectralGrid2D(32, 32, 2.0, 1.5)
        f = g.field(np.exp(-np.abs(g.Z - 0.3) ** 2) * (1 + 0.5j))
        P = g.wavenumber((p1, p2))
        lhs = fft2_forward(g.field(np.exp(1j * (P.real * g.X + P.imag * g.Y)) * f.values)).values
        rhs = circular_shift(fft2_forward(f), (-p1, -p2)).values
        assert np.max(np.abs(lhs - rhs)) < 1e-12
