"""Locating the symmetry-breaking thresholds rho* and lambda*.

Each probe minimizes at one parameter value and classifies the minimizer
as rigid (y-independent) or broken by its y-variation
||grad_y u|| / ||u||.  Probes warm-start from the previous minimizer times
1 + 1e-3 cos(2 pi y / ell): an exactly y-independent start is a critical
point of the flow and would never leave the rigid branch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Optional, Union

import numpy as np

from .energy import Params
from .grid import Field, GridSpec, y_variation
from .minimize import (
    Init,
    MinimizeConfig,
    MinimizeResult,
    normalized_gradient_flow,
    rho_to_lambda,
    trivial_bound,
)
from .profiles import energy_exponent, ground_energy_at_mass, soliton_1d, omega_of_mass, QUAD_ABS
from .energy import energy

log = logging.getLogger(__name__)

RIGID = "rigid"
BROKEN = "broken"
DEFAULT_THRESHOLD = 1e-4
WARM_PERTURBATION = 1e-3


class BracketError(ValueError):
    """The initial bracket does not straddle the transition."""


class ConsistencyError(RuntimeError):
    """rho* and lambda* brackets are incompatible under the rescaling."""


def classify(u: Union[Field, MinimizeResult], threshold: float = DEFAULT_THRESHOLD) -> str:
    if isinstance(u, MinimizeResult):
        if not u.converged:
            raise ValueError("cannot classify a non-converged minimizer")
        u = u.u
    return RIGID if y_variation(u) < threshold else BROKEN


@dataclass
class Probe:
    parameter: float
    y_variation: float
    value: float
    omega: float
    converged: bool
    iterations: int
    residual: float
    classification: str
    trivial_value: float

    @property
    def gap(self) -> float:
        """trivial_value - value; positive when breaking symmetry pays off."""
        return self.trivial_value - self.value


@dataclass
class BifurcationResult:
    parameter: str
    alpha: float
    bracket_lo: float
    bracket_hi: float
    threshold: float
    bisection_tol: float
    probes: list = field(default_factory=list)
    halted: bool = False
    message: str = ""

    @property
    def width(self) -> float:
        return self.bracket_hi - self.bracket_lo

    def rigid_side_low(self) -> bool:
        """rho: rigid below the transition; lambda: rigid above it."""
        return self.parameter == "rho"

    def is_monotone(self, threshold: float | None = None) -> bool:
        """No rigid probe on the broken side of a broken probe."""
        t = self.threshold if threshold is None else threshold
        pts = sorted((p.parameter, p.y_variation < t) for p in self.probes if p.converged)
        flags = [r for _, r in pts]
        if not self.rigid_side_low():
            flags = flags[::-1]
        # flags must read rigid ... rigid broken ... broken
        seen_broken = False
        for r in flags:
            if not r and not seen_broken:
                seen_broken = True
            elif r and seen_broken:
                return False
        return True

    def classifications(self, threshold: float) -> list:
        return [RIGID if p.y_variation < threshold else BROKEN for p in self.probes]

    def bracket_at(self, threshold: float) -> tuple:
        """Tightest bracket implied by the converged probes under another threshold."""
        rigid = [p.parameter for p in self.probes if p.converged and p.y_variation < threshold]
        broken = [p.parameter for p in self.probes if p.converged and p.y_variation >= threshold]
        if self.rigid_side_low():
            return max(rigid, default=self.bracket_lo), min(broken, default=self.bracket_hi)
        return max(broken, default=self.bracket_lo), min(rigid, default=self.bracket_hi)

    def bracket_contains_probes_consistently(self) -> bool:
        lo, hi = self.bracket_lo, self.bracket_hi
        rigid_low = self.rigid_side_low()
        for p in self.probes:
            if not p.converged:
                continue
            rigid = p.classification == RIGID
            if p.parameter <= lo and rigid != rigid_low:
                return False
            if p.parameter >= hi and rigid == rigid_low:
                return False
        return lo < hi

    def to_dict(self) -> dict:
        d = asdict(self)
        d["width"] = self.width
        return d


def _warm(prev: Field, mass: float, eps: float) -> Field:
    spec = prev.spec
    y = spec.mesh()[-1]
    return Field(spec, prev.values * (1 + eps * np.cos(2 * np.pi * y / spec.ell))).renormalized(mass)


def _probe(param: float, kind: str, alpha: float, config: MinimizeConfig, warm: Optional[Field],
           threshold: float, eps: float):
    spec = config.grid
    if kind == "rho":
        mass, params = param, Params(alpha, 1.0, spec.n)
        trivial = trivial_bound(param, alpha, spec.vol)
    else:
        mass, params = 1.0, Params(alpha, param, spec.n)
        trivial = trivial_bound(1.0, alpha, spec.vol)
    init = Init.perturbed(eps) if warm is None else Init.supplied(_warm(warm, mass, eps))
    res = normalized_gradient_flow(mass, params, config.with_init(init))
    cls = (RIGID if res.y_variation < threshold else BROKEN) if res.converged else "failed"
    probe = Probe(param, res.y_variation, res.value, res.omega, res.converged, res.iterations,
                  res.residual, cls, trivial)
    log.info("probe %s=%.6g: %s (y_var=%.3g, iters=%d)", kind, param, cls, res.y_variation,
             res.iterations)
    return probe, res


def _bisect(kind: str, lo: float, hi: float, tol: float, alpha: float, config: MinimizeConfig,
            threshold: float, eps: float) -> BifurcationResult:
    if not lo < hi:
        raise BracketError(f"degenerate bracket [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError("bisection tolerance must be positive")
    out = BifurcationResult(kind, alpha, lo, hi, threshold, tol)
    # rho: rigid at lo, broken at hi; lambda: broken at lo, rigid at hi
    want_lo = RIGID if kind == "rho" else BROKEN
    want_hi = BROKEN if kind == "rho" else RIGID

    warm = None
    for end, want in ((lo, want_lo), (hi, want_hi)):
        probe, res = _probe(end, kind, alpha, config, None, threshold, eps)
        out.probes.append(probe)
        if not probe.converged:
            out.halted, out.message = True, f"probe at {end} did not converge"
            return out
        if probe.classification != want:
            raise BracketError(
                f"{kind}={end} classifies {probe.classification}, expected {want}"
            )
        warm = res.u

    while out.width > tol:
        mid = 0.5 * (out.bracket_lo + out.bracket_hi)
        probe, res = _probe(mid, kind, alpha, config, warm, threshold, eps)
        out.probes.append(probe)
        if not probe.converged:
            out.halted, out.message = True, f"probe at {mid} did not converge"
            return out
        warm = res.u
        if probe.classification == want_lo:
            out.bracket_lo = mid
        else:
            out.bracket_hi = mid
    return out


def find_rho_star(rho_lo: float, rho_hi: float, bisection_tol: float, alpha: float,
                  config: MinimizeConfig, threshold: float = DEFAULT_THRESHOLD,
                  perturbation: float = WARM_PERTURBATION) -> BifurcationResult:
    """Bracket the critical mass: minimizers rigid below, y-dependent above."""
    return _bisect("rho", rho_lo, rho_hi, bisection_tol, alpha, config, threshold, perturbation)


def find_lambda_star(lambda_lo: float, lambda_hi: float, bisection_tol: float, alpha: float,
                     config: MinimizeConfig, threshold: float = DEFAULT_THRESHOLD,
                     perturbation: float = WARM_PERTURBATION,
                     rho_result: Optional[BifurcationResult] = None) -> BifurcationResult:
    """Bracket the critical coupling of J_lambda (rigid above, broken below).

    When ``rho_result`` is given, its bracket is mapped through
    lambda = rho^{-4 alpha/(4 - alpha n)} and must overlap this one.
    """
    out = _bisect("lambda", lambda_lo, lambda_hi, bisection_tol, alpha, config, threshold,
                  perturbation)
    if rho_result is not None and not out.halted:
        mlo, mhi = mapped_lambda_bracket(rho_result, config.grid.n)
        if not brackets_overlap((mlo, mhi), (out.bracket_lo, out.bracket_hi)):
            raise ConsistencyError(
                f"mapped rho* bracket [{mlo:.6g}, {mhi:.6g}] misses lambda* bracket "
                f"[{out.bracket_lo:.6g}, {out.bracket_hi:.6g}]"
            )
    return out


def mapped_lambda_bracket(rho_result: BifurcationResult, n: int = 1) -> tuple:
    a = rho_result.alpha
    return (rho_to_lambda(rho_result.bracket_hi, a, n), rho_to_lambda(rho_result.bracket_lo, a, n))


def brackets_overlap(a: tuple, b: tuple) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])


def is_nested(inner: BifurcationResult, outer: BifurcationResult) -> bool:
    return outer.bracket_lo <= inner.bracket_lo and inner.bracket_hi <= outer.bracket_hi


# trial function for lambda* > 0 ------------------------------------------

@dataclass
class TrialBound:
    epsilon: float
    alpha: float
    x_part: float
    x_part_closed: float
    y_kinetic: float
    bound: float
    gap: float
    lambda_cross: float
    mass: float
    sweep: list

    def to_dict(self) -> dict:
        return asdict(self)


def trial_field(epsilon: float, alpha: float, spec: GridSpec) -> Field:
    """psi(x, y) = r(y)^{4/(4-alpha)} Q(r(y)^{2 alpha/(4-alpha)} x) with
    r(y) = c (1 + epsilon cos(2 pi y / ell)), int r^2 dy = 1, and Q the
    unit-mass Euclidean ground state."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if spec.n != 1:
        raise NotImplementedError("trial function is built for n = 1")
    c = 1.0 / np.sqrt(spec.ell * (1 + epsilon**2 / 2))
    r = c * (1 + epsilon * np.cos(2 * np.pi * spec.y / spec.ell))
    Q = soliton_1d(omega_of_mass(1.0, alpha), alpha)
    a, b = 4 / (4 - alpha), 2 * alpha / (4 - alpha)
    X, R = np.meshgrid(spec.x, r, indexing="ij")
    return Field(spec, R**a * Q(R**b * X))


def trial_upper_bound(epsilon: float, alpha: float, spec: GridSpec, lambdas=None) -> TrialBound:
    """Evaluate E_lambda(psi) against vol * I^{1/sqrt(vol)}.

    E_lambda(psi) = x_part + lambda * y_kinetic is affine in lambda, so the
    crossing lambda below which psi beats the trivial extension is
    (bound - x_part) / y_kinetic.
    """
    from scipy.integrate import quad

    psi = trial_field(epsilon, alpha, spec)
    e = energy(psi, Params(alpha, 1.0, 1))
    x_part = e.kinetic_x + e.potential
    y_kin = e.kinetic_y
    bound = trivial_bound(1.0, alpha, spec.vol)
    # closed form: I^1 * int r(y)^{(8+4a-2a)/(4-a)} dy
    c = 1.0 / np.sqrt(spec.ell * (1 + epsilon**2 / 2))
    s = energy_exponent(alpha)
    integral, _ = quad(lambda y: (c * (1 + epsilon * np.cos(2 * np.pi * y / spec.ell))) ** s,
                       0.0, spec.ell, epsabs=QUAD_ABS, epsrel=1e-13, limit=200)
    closed = ground_energy_at_mass(1.0, alpha) * integral
    gap = bound - x_part
    cross = gap / y_kin if y_kin > 0 else np.inf
    lambdas = [] if lambdas is None else list(lambdas)
    sweep = [(float(l), float(x_part + l * y_kin)) for l in lambdas]
    return TrialBound(epsilon, alpha, float(x_part), float(closed), float(y_kin), float(bound),
                      float(gap), float(cross), psi.mass(), sweep)
