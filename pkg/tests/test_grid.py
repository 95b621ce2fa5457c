import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsground.grid import (
    Field,
    GridSpec,
    backward,
    forward,
    laplacian,
    norms,
    read_field,
    shift_phase,
    tail_ratio,
    transform_backward,
    transform_forward,
    write_field,
    y_variation,
)
from nlsground.energy import Params, energy
from nlsground.profiles import soliton_1d

from conftest import random_smooth_field


class TestGridSpec:
    def test_defaults(self):
        g = GridSpec()
        assert (g.Nx, g.Ny, g.L, g.n, g.k) == (2048, 64, 40.0, 1, 1)
        assert g.vol == g.ell == pytest.approx(2 * np.pi)
        assert g.hx == 80 / 2048 and g.hy == g.ell / 64

    @pytest.mark.parametrize("kw", [dict(Nx=100), dict(Nx=8), dict(Ny=2), dict(Ny=12),
                                    dict(L=0.0), dict(ell=-1.0), dict(n=3)])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            GridSpec(**kw)

    def test_nodes_and_wavenumbers(self, tiny_grid):
        g = tiny_grid
        assert g.x[0] == -g.L and np.isclose(g.x[-1], g.L - g.hx)
        assert np.isclose(np.sort(np.abs(g.xi))[2], np.pi / g.L)
        assert np.isclose(np.sort(np.abs(g.mu))[2], 2 * np.pi / g.ell)

    def test_two_dimensional_shape(self):
        g = GridSpec(n=2, Nx=32, Ny=4)
        assert g.shape == (32, 32, 4) and g.cell == g.hx**2 * g.hy


class TestField:
    def test_values_are_frozen(self, tiny_grid):
        f = Field(tiny_grid, np.ones(tiny_grid.shape))
        with pytest.raises(ValueError):
            f.values[0, 0] = 2

    def test_rejects_nonfinite(self, tiny_grid):
        v = np.ones(tiny_grid.shape)
        v[3, 1] = np.nan
        with pytest.raises(FloatingPointError):
            Field(tiny_grid, v)

    def test_rejects_wrong_size(self, tiny_grid):
        with pytest.raises(ValueError):
            Field(tiny_grid, np.ones(7))

    def test_renormalized_hits_target(self, tiny_grid):
        f = random_smooth_field(tiny_grid, 1).renormalized(2.5)
        assert abs(f.mass() - 2.5) < 1e-12 * 2.5


class TestTransform:
    def test_constant_has_only_zero_mode(self, tiny_grid):
        g = tiny_grid
        s = transform_forward(Field(g, 3.0 * np.ones(g.shape)))
        expect = 3.0 * np.sqrt(2 * g.L * g.ell)
        assert np.isclose(s.modes[0, 0], expect, rtol=1e-13)
        rest = s.modes.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-12

    def test_cosine_in_y_has_two_modes(self, tiny_grid):
        g = tiny_grid
        u = Field.from_function(g, lambda x, y: np.cos(2 * np.pi * y / g.ell))
        m = np.abs(transform_forward(u).modes)
        nz = np.argwhere(m > 1e-10)
        assert sorted(map(tuple, nz)) == [(0, 1), (0, g.Ny - 1)]

    def test_round_trip(self, small_grid):
        u = Field(small_grid, np.random.default_rng(0).normal(size=small_grid.shape) * (1 + 1j))
        back = transform_backward(transform_forward(u))
        assert np.abs(back.values - u.values).max() < 1e-12 * np.abs(u.values).max()

    def test_parseval(self, small_grid):
        g = small_grid
        v = np.random.default_rng(1).normal(size=g.shape) + 1j
        lhs = np.sum(np.abs(v) ** 2) * g.cell
        rhs = np.sum(np.abs(forward(v, g)) ** 2)
        assert abs(lhs - rhs) < 1e-12 * lhs

    def test_mode_count_matches(self, tiny_grid):
        s = transform_forward(random_smooth_field(tiny_grid, 2))
        assert s.modes.size == tiny_grid.size
        assert np.allclose(backward(s.modes, tiny_grid), random_smooth_field(tiny_grid, 2).values)


class TestLaplacian:
    def test_y_eigenfunction(self, tiny_grid):
        g = tiny_grid
        k = 2 * np.pi / g.ell
        u = Field.from_function(g, lambda x, y: np.exp(1j * k * y) + 0 * x)
        assert np.abs(laplacian(u).values + k**2 * u.values).max() < 1e-12
        assert np.abs(laplacian(u, 3.0).values + 3 * k**2 * u.values).max() < 1e-12

    def test_x_eigenfunction(self, tiny_grid):
        g = tiny_grid
        u = Field.from_function(g, lambda x, y: np.cos(np.pi * x / g.L) + 0 * y)
        assert np.abs(laplacian(u).values + (np.pi / g.L) ** 2 * u.values).max() < 1e-13

    def test_anisotropic_weight_matches_finite_differences(self):
        # centered differences converge to the spectral result at second order
        errs = []
        for N in (32, 64, 128):
            g = GridSpec(Nx=16, Ny=N, L=5.0)
            u = Field.from_function(g, lambda x, y: np.exp(1j * 2 * np.pi * y / g.ell) + 0 * x)
            fd = 3.0 * (np.roll(u.values, -1, 1) - 2 * u.values + np.roll(u.values, 1, 1)) / g.hy**2
            errs.append(np.abs(laplacian(u, 3.0).values - fd).max())
        assert errs[0] / errs[1] > 3.9 and errs[1] / errs[2] > 3.9

    def test_second_order_against_finite_differences_2d(self):
        errs = []
        for N in (64, 128, 256):
            g = GridSpec(Nx=N, Ny=N // 4, L=np.pi)
            u = Field.from_function(g, lambda x, y: np.exp(np.sin(x) + np.cos(y)))
            v = u.values
            fd = ((np.roll(v, -1, 0) - 2 * v + np.roll(v, 1, 0)) / g.hx**2
                  + (np.roll(v, -1, 1) - 2 * v + np.roll(v, 1, 1)) / g.hy**2)
            errs.append(np.abs(laplacian(u).values - fd).max())
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_self_adjoint(self, small_grid):
        u = random_smooth_field(small_grid, 3)
        v = random_smooth_field(small_grid, 4)
        a = laplacian(u).inner(v)
        b = u.inner(laplacian(v))
        assert abs(a - b) < 1e-10 * max(1.0, abs(a))

    def test_rejects_nonpositive_weight(self, tiny_grid):
        with pytest.raises(ValueError):
            laplacian(Field(tiny_grid, np.ones(tiny_grid.shape)), 0.0)


class TestNorms:
    def test_zero_field(self, tiny_grid):
        nm = norms(Field(tiny_grid, np.zeros(tiny_grid.shape)), p=3)
        assert nm.mass_sq == nm.kinetic_x == nm.kinetic_y == nm.lp == 0

    def test_constant_field(self, tiny_grid):
        g = tiny_grid
        nm = norms(Field(g, np.ones(g.shape)))
        assert np.isclose(nm.mass_sq, 2 * g.L * g.ell, rtol=1e-14)
        assert abs(nm.kinetic_x) < 1e-20 and abs(nm.kinetic_y) < 1e-20

    def test_sech_mass(self):
        g = GridSpec()
        u = Field.y_constant(g, np.sqrt(2) / np.cosh(g.x))
        assert abs(norms(u).mass_sq - 4 * 2 * np.pi) < 1e-8

    def test_rejects_small_p(self, tiny_grid):
        with pytest.raises(ValueError):
            norms(Field(tiny_grid, np.ones(tiny_grid.shape)), p=0.5)

    def test_lp_of_constant(self, tiny_grid):
        g = tiny_grid
        nm = norms(Field(g, 2 * np.ones(g.shape)), p=3)
        assert np.isclose(nm.lp, 2 * (2 * g.L * g.ell) ** (1 / 3))


class TestShiftPhase:
    def test_identity_and_sign(self, tiny_grid):
        u = random_smooth_field(tiny_grid, 5)
        assert np.array_equal(shift_phase(u).values, u.values)
        assert np.allclose(shift_phase(u, 0.0, np.pi).values, -u.values, atol=1e-14)

    def test_soliton_shift_keeps_energy(self):
        g = GridSpec()
        u = soliton_1d(1.0, 1.0).sample(g)
        s = shift_phase(u, 5 * g.hx, 0.4)
        p = Params(1.0)
        assert abs(norms(s).mass_sq - norms(u).mass_sq) < 1e-10
        assert abs(energy(s, p).total - energy(u, p).total) < 1e-10

    def test_grid_shift_is_a_roll(self, tiny_grid):
        u = random_smooth_field(tiny_grid, 6)
        s = shift_phase(u, 3 * tiny_grid.hx)
        assert np.array_equal(s.values, np.roll(u.values, -3, axis=0))

    def test_subgrid_shift_of_band_limited_field(self, tiny_grid):
        g = tiny_grid
        k = np.pi / g.L * 2
        u = Field.from_function(g, lambda x, y: np.exp(1j * k * x) + 0 * y)
        s = shift_phase(u, 0.3 * g.hx)
        assert np.allclose(s.values, u.values * np.exp(1j * k * 0.3 * g.hx), atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(steps=st.integers(-40, 40), theta=st.floats(-7, 7), seed=st.integers(0, 1000))
    def test_norms_invariant(self, steps, theta, seed):
        g = GridSpec(Nx=64, Ny=8, L=10.0)
        u = random_smooth_field(g, seed)
        a, b = norms(u), norms(shift_phase(u, steps * g.hx, theta))
        for x, y in ((a.mass_sq, b.mass_sq), (a.kinetic_x, b.kinetic_x), (a.kinetic_y, b.kinetic_y)):
            assert abs(x - y) <= 1e-10 * max(1.0, abs(x))


class TestDiagnostics:
    def test_y_variation_of_constant_extension(self, tiny_grid):
        u = Field.y_constant(tiny_grid, np.exp(-tiny_grid.x**2))
        assert y_variation(u) < 1e-14

    def test_y_variation_of_harmonic(self, tiny_grid):
        g = tiny_grid
        k = 2 * np.pi / g.ell
        u = Field.from_function(g, lambda x, y: np.exp(1j * k * y) + 0 * x)
        assert np.isclose(y_variation(u), k)

    def test_tail_ratio_flags_wide_profiles(self):
        g = GridSpec(Nx=256, Ny=4, L=10.0)
        assert tail_ratio(soliton_1d(1.0, 1.0).sample(g)) < 1e-3
        assert tail_ratio(soliton_1d(0.01, 1.0).sample(g)) > 0.1


class TestFieldDump:
    def test_round_trip(self, tmp_path):
        g = GridSpec(n=2, Nx=16, Ny=4, L=3.0, ell=1.5)
        u = Field(g, np.arange(g.size).reshape(g.shape) * (1 - 2j))
        write_field(tmp_path / "u.nlsf", u)
        v = read_field(tmp_path / "u.nlsf")
        assert v.spec == g and np.array_equal(v.values, u.values)

    def test_layout(self, tmp_path):
        g = GridSpec(Nx=16, Ny=4)
        u = Field(g, np.arange(g.size, dtype=float).reshape(g.shape))
        write_field(tmp_path / "u.nlsf", u)
        raw = (tmp_path / "u.nlsf").read_bytes()
        assert raw[:4] == b"NLSF" and len(raw) == 4 + 16 + 16 + 16 * g.size
        data = np.frombuffer(raw[36:], dtype="<f8")
        # x outer, y inner: second stored value is u[0, 1]
        assert data[2] == 1.0 and data[1] == 0.0

    def test_rejects_garbage(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"nope")
        with pytest.raises(ValueError):
            read_field(tmp_path / "bad")
