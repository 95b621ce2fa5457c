import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsground.energy import (
    Params,
    el_residual,
    energy,
    energy_gradient,
    gn_quotient,
    h1_norm,
    lagrange_multiplier,
    localized_gn_report,
)
from nlsground.grid import Field, GridSpec, norms, shift_phase
from nlsground.profiles import pohozaev_report, soliton_1d

from conftest import random_smooth_field

SOLITON_GN_QUOTIENT = 0.17841241161527707


@pytest.fixture(scope="module")
def default_grid():
    return GridSpec()


@pytest.fixture(scope="module")
def soliton_field(default_grid):
    return soliton_1d(1.0, 1.0).sample(default_grid)


class TestParams:
    @pytest.mark.parametrize("alpha, n", [(2.0, 1), (0.0, 1), (-1.0, 1), (4 / 3, 2), (1.5, 2)])
    def test_rejects_non_subcritical(self, alpha, n):
        with pytest.raises(ValueError):
            Params(alpha, 1.0, n)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            Params(1.0, 0.0)

    def test_theta(self):
        assert Params(1.0).theta == 1.0
        assert Params(1.0, n=2).theta == 1.5


class TestEnergy:
    def test_zero_field(self, tiny_grid):
        e = energy(Field(tiny_grid, np.zeros(tiny_grid.shape)), Params(1.0))
        assert e.kinetic_x == e.kinetic_y == e.potential == e.total == 0

    def test_soliton_extension(self, soliton_field):
        assert abs(energy(soliton_field, Params(1.0)).total + 18 * np.pi / 5) < 1e-6

    def test_constant_field(self, tiny_grid):
        g = tiny_grid
        c = 1 / np.sqrt(2 * g.L * g.ell)
        a = 1.5
        e = energy(Field(g, c * np.ones(g.shape)), Params(a, 7.0))
        assert e.kinetic_x == pytest.approx(0, abs=1e-20) and e.kinetic_y == pytest.approx(0, abs=1e-20)
        assert np.isclose(e.potential, -c ** (2 + a) * 2 * g.L * g.ell / (2 + a), rtol=1e-13)

    def test_signs_and_sum(self, small_grid):
        e = energy(random_smooth_field(small_grid, 3), Params(1.0, 2.5))
        assert e.kinetic_x >= 0 and e.kinetic_y >= 0 and e.potential <= 0
        assert e.total == e.kinetic_x + e.kinetic_y + e.potential

    def test_lambda_weights_y_kinetic(self, small_grid):
        u = random_smooth_field(small_grid, 4)
        assert np.isclose(energy(u, Params(1.0, 3.0)).kinetic_y,
                          3 * energy(u, Params(1.0)).kinetic_y, rtol=1e-14)

    def test_grid_dimension_checked(self, tiny_grid):
        with pytest.raises(ValueError):
            energy(Field(tiny_grid, np.ones(tiny_grid.shape)), Params(1.0, n=2))

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.9])
    def test_y_constant_equals_vol_times_1d(self, default_grid, alpha):
        p = soliton_1d(1.0, alpha)
        e = energy(p.sample(default_grid), Params(alpha)).total
        assert abs(e - default_grid.vol * pohozaev_report(p).energy) < 1e-8

    @settings(max_examples=15, deadline=None)
    @given(steps=st.integers(-30, 30), theta=st.floats(-4, 4), seed=st.integers(0, 99))
    def test_shift_phase_invariance(self, steps, theta, seed):
        g = GridSpec(Nx=64, Ny=8, L=10.0)
        u = random_smooth_field(g, seed)
        p = Params(1.0, 0.7)
        a, b = energy(u, p), energy(shift_phase(u, steps * g.hx, theta), p)
        for x, y in zip((a.kinetic_x, a.kinetic_y, a.potential), (b.kinetic_x, b.kinetic_y, b.potential)):
            assert abs(x - y) < 1e-10 * max(1, abs(x))


class TestGradient:
    def test_soliton_gradient_is_minus_omega_u(self, default_grid):
        # alpha = 2 is critical on R x T and rejected by Params; alpha = 1 carries the same identity
        u = soliton_1d(1.0, 1.0).sample(default_grid)
        g = energy_gradient(u, Params(1.0))
        assert np.abs(g.values + u.values).max() < 1e-7

    def test_zero(self, tiny_grid):
        z = Field(tiny_grid, np.zeros(tiny_grid.shape))
        assert np.all(energy_gradient(z, Params(1.0)).values == 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_directional_derivative(self, small_grid, seed):
        u = random_smooth_field(small_grid, seed) * 0.3
        v = random_smooth_field(small_grid, seed + 100) * 0.3
        p = Params(1.0, 0.6)
        exact = energy_gradient(u, p).inner(v).real
        errs = []
        for eps in (1e-2, 1e-3, 1e-4):
            fd = (energy(u + v * eps, p).total - energy(u - v * eps, p).total) / (2 * eps)
            errs.append(abs(fd - exact))
        assert errs[0] / errs[1] > 50 and errs[1] < 1e-3 * abs(exact)

    def test_el_residual_of_soliton(self, soliton_field):
        assert el_residual(soliton_field, Params(1.0), omega=1.0) < 1e-6
        assert el_residual(soliton_field, Params(1.0)) < 1e-6


class TestMultiplier:
    def test_soliton_quadratic(self, soliton_field):
        assert abs(lagrange_multiplier(soliton_field, Params(1.0)) - 1.0) < 1e-7

    def test_soliton_higher_frequency(self, default_grid):
        u = soliton_1d(4.0, 1.5).sample(default_grid)
        assert abs(lagrange_multiplier(u, Params(1.5)) - 4.0) < 1e-6

    def test_constant_field(self, tiny_grid):
        c = 0.7
        u = Field(tiny_grid, c * np.ones(tiny_grid.shape))
        assert np.isclose(lagrange_multiplier(u, Params(1.2, 9.0)), c**1.2, rtol=1e-13)

    def test_zero_field(self, tiny_grid):
        with pytest.raises(ValueError):
            lagrange_multiplier(Field(tiny_grid, np.zeros(tiny_grid.shape)), Params(1.0))


class TestGagliardoNirenberg:
    def test_h1_convention(self, small_grid):
        u = random_smooth_field(small_grid, 8)
        nm = norms(u)
        assert np.isclose(h1_norm(u) ** 2, nm.mass_sq + nm.kinetic_x + nm.kinetic_y)

    @pytest.mark.parametrize("c", [0.1, 3.0, 17.0])
    def test_homogeneity(self, small_grid, c):
        u = random_smooth_field(small_grid, 9)
        p = Params(1.0)
        assert np.isclose(gn_quotient(u * c, p), gn_quotient(u, p), rtol=1e-12)

    def test_soliton_golden_value(self, soliton_field):
        assert np.isclose(gn_quotient(soliton_field, Params(1.0)), SOLITON_GN_QUOTIENT, rtol=1e-10)

    def test_spreading_gaussians_stay_bounded(self, default_grid):
        g = default_grid
        vals = [gn_quotient(Field.y_constant(g, np.exp(-g.x**2 / (2 * s * s))), Params(1.0))
                for s in (0.5, 1, 2, 4, 8)]
        assert max(vals) < 0.25 and min(vals) > 0

    def test_zero_field(self, tiny_grid):
        with pytest.raises(ValueError):
            gn_quotient(Field(tiny_grid, np.zeros(tiny_grid.shape)), Params(1.0))


class TestLocalizedGN:
    def test_translation_invariance(self, soliton_field):
        g = soliton_field.spec
        a = localized_gn_report(soliton_field).quotient
        for k in (1, 17, 300):
            b = localized_gn_report(shift_phase(soliton_field, k * g.hx, 0.3)).quotient
            assert abs(a - b) < 1e-8

    def test_soliton_below_bound(self, soliton_field):
        r = localized_gn_report(soliton_field)
        assert r.exponent == 4.0
        assert 0 < r.quotient < 0.6

    def test_two_bumps(self, default_grid):
        g = default_grid
        one = soliton_1d(1.0, 1.0)(g.x)
        two = one + soliton_1d(1.0, 1.0)(g.x - 30)
        r1 = localized_gn_report(Field.y_constant(g, one))
        r2 = localized_gn_report(Field.y_constant(g, two))
        assert abs(r1.sup_cell_mass - r2.sup_cell_mass) < 1e-6 * r1.sup_cell_mass
        assert r2.lhs > r1.lhs
        assert r2.quotient < 2 * r1.quotient

    def test_zero_field(self, tiny_grid):
        with pytest.raises(ValueError):
            localized_gn_report(Field(tiny_grid, np.zeros(tiny_grid.shape)))
