import numpy as np
import pytest

from nlsground.bifurcation import (
    BROKEN,
    RIGID,
    BifurcationResult,
    BracketError,
    ConsistencyError,
    classify,
    find_lambda_star,
    find_rho_star,
    is_nested,
    mapped_lambda_bracket,
    trial_field,
    trial_upper_bound,
)
from nlsground.grid import Field, GridSpec
from nlsground.minimize import MinimizeConfig, minimize_J, minimize_K, rho_to_lambda
from nlsground.profiles import soliton_1d

GRID = GridSpec(Nx=512, Ny=16)
CFG = MinimizeConfig(grid=GRID)


@pytest.fixture(scope="module")
def rho_coarse():
    return find_rho_star(2.0, 12.0, 0.4, 1.0, CFG)


@pytest.fixture(scope="module")
def rho_fine():
    return find_rho_star(2.0, 12.0, 0.2, 1.0, CFG)


class TestClassify:
    def test_constant_extension_is_rigid(self):
        u = soliton_1d(1.0, 1.0).sample(GRID)
        assert classify(u) == RIGID

    def test_modulated_field_is_broken(self):
        u = soliton_1d(1.0, 1.0).sample(GRID)
        y = GRID.mesh()[1]
        v = Field(GRID, u.values * (1 + 0.1 * np.cos(2 * np.pi * y / GRID.ell))).renormalized(1.0)
        assert classify(v) == BROKEN

    def test_threshold_monotone(self):
        u = soliton_1d(1.0, 1.0).sample(GRID)
        y = GRID.mesh()[1]
        v = Field(GRID, u.values * (1 + 1e-4 * np.cos(y)))
        labels = [classify(v, t) for t in (1e-6, 1e-5, 1e-4, 1e-3)]
        first = labels.index(RIGID)
        assert all(lab == RIGID for lab in labels[first:])

    def test_rejects_unconverged(self):
        r = minimize_K(2.0, 1.0, MinimizeConfig(grid=GRID, max_iter=1))
        with pytest.raises(ValueError):
            classify(r)


class TestRhoStar:
    def test_bracket(self, rho_coarse):
        r = rho_coarse
        assert not r.halted
        assert r.width <= 0.4
        assert r.is_monotone()
        assert r.bracket_contains_probes_consistently()
        # linear instability of the rigid state predicts a transition near 5.19
        assert r.bracket_lo < 5.3 and r.bracket_hi > 5.0

    def test_rigid_probes_match_trivial_value(self, rho_coarse):
        for p in rho_coarse.probes:
            if p.classification == RIGID:
                assert abs(p.value - p.trivial_value) < 5 * CFG.tol

    def test_broken_probes_improve_on_trivial_value(self, rho_coarse):
        broken = [p for p in rho_coarse.probes if p.classification == BROKEN]
        assert broken and all(p.gap > 0 for p in broken)

    def test_nested_under_refinement(self, rho_coarse, rho_fine):
        assert rho_fine.width <= 0.2
        assert is_nested(rho_fine, rho_coarse)

    @pytest.mark.parametrize("threshold", [1e-3, 1e-5])
    def test_threshold_sensitivity(self, rho_fine, threshold):
        lo, hi = rho_fine.bracket_at(threshold)
        step = 2 * rho_fine.width
        assert abs(lo - rho_fine.bracket_lo) <= step and abs(hi - rho_fine.bracket_hi) <= step
        assert rho_fine.is_monotone(threshold)

    def test_bad_bracket(self):
        with pytest.raises(BracketError):
            find_rho_star(8.0, 12.0, 0.5, 1.0, CFG)

    def test_degenerate_bracket(self):
        with pytest.raises(BracketError):
            find_rho_star(3.0, 3.0, 0.5, 1.0, CFG)

    def test_halts_on_unconverged_probe(self):
        r = find_rho_star(2.0, 12.0, 0.5, 1.0, MinimizeConfig(grid=GRID, max_iter=5))
        assert r.halted and "did not converge" in r.message


class TestLambdaStar:
    def test_overlaps_mapped_rho_bracket(self, rho_coarse):
        lo, hi = mapped_lambda_bracket(rho_coarse)
        res = find_lambda_star(0.05, 0.4, 0.02, 1.0, CFG, rho_result=rho_coarse)
        assert res.is_monotone() and res.width <= 0.02
        assert max(lo, res.bracket_lo) <= min(hi, res.bracket_hi)

    def test_inconsistent_brackets_fail_hard(self):
        fake = BifurcationResult("rho", 1.0, 1.0, 1.5, 1e-4, 0.5)
        with pytest.raises(ConsistencyError):
            find_lambda_star(0.05, 0.4, 0.1, 1.0, CFG, rho_result=fake)

    def test_degenerate_bracket(self):
        with pytest.raises(BracketError):
            find_lambda_star(0.2, 0.2, 0.01, 1.0, CFG)

    def test_large_lambda_probe_rigid(self):
        r = minimize_J(4.0, 1.0, CFG)
        assert r.converged and classify(r) == RIGID

    def test_mapped_bracket_order(self):
        fake = BifurcationResult("rho", 1.0, 4.0, 8.0, 1e-4, 0.5)
        lo, hi = mapped_lambda_bracket(fake)
        assert lo == rho_to_lambda(8.0, 1.0) < hi == rho_to_lambda(4.0, 1.0)


class TestTrialBound:
    @pytest.mark.parametrize("eps", [0.1, 0.3, 0.5])
    def test_gap_positive(self, eps):
        tb = trial_upper_bound(eps, 1.0, GridSpec())
        assert tb.gap > 0 and tb.lambda_cross > 0
        assert abs(tb.x_part - tb.x_part_closed) < 1e-8

    def test_unit_mass(self):
        assert abs(trial_field(0.3, 1.0, GridSpec()).mass() - 1) < 1e-8

    def test_gap_vanishes_with_epsilon(self):
        eps = np.array([0.2, 0.1, 0.05])
        gaps = np.array([trial_upper_bound(e, 1.0, GridSpec()).gap for e in eps])
        assert gaps[0] > gaps[1] > gaps[2] > 0
        # leading behaviour is quadratic in epsilon
        assert np.allclose(gaps / eps**2, gaps[-1] / eps[-1] ** 2, rtol=0.1)

    def test_affine_in_lambda(self):
        lams = [0.0, 0.05, 0.1, 0.2]
        tb = trial_upper_bound(0.3, 1.0, GridSpec(), lambdas=lams)
        vals = np.array([v for _, v in tb.sweep])
        slopes = np.diff(vals) / np.diff(lams)
        assert np.allclose(slopes, tb.y_kinetic, rtol=1e-12) and tb.y_kinetic > 0
        crossing = tb.x_part + tb.lambda_cross * tb.y_kinetic
        assert abs(crossing - tb.bound) < 1e-12

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2])
    def test_rejects_epsilon(self, eps):
        with pytest.raises(ValueError):
            trial_upper_bound(eps, 1.0, GRID)
