"""Euclidean ground-state profiles and their exact identities.

For n = 1 the positive solution of  -u'' + omega u = u^{1+alpha}  is

    u(x) = A sech^{2/alpha}(B x),  A = ((alpha+2) omega / 2)^{1/alpha},
                                   B = alpha sqrt(omega) / 2.

For n = 2 the radial profile is obtained by shooting at omega = 1 and then
scaled, u_omega(r) = omega^{1/alpha} u_1(sqrt(omega) r).

Profile integrals use adaptive quadrature on the closed form so that the
identity checks do not depend on any grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .grid import Field, GridSpec

QUAD_ABS = 1e-12
QUAD_REL = 1e-13


def sech(z):
    """Overflow-free sech."""
    a = np.abs(np.asarray(z, dtype=float))
    e = np.exp(-a)
    return 2 * e / (1 + e * e)


@dataclass(frozen=True)
class SolitonProfile:
    omega: float
    alpha: float
    n: int = 1

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not 0 < self.alpha < 4 / self.n:
            raise ValueError(f"alpha must lie in (0, {4 / self.n}), got {self.alpha}")

    @property
    def A(self) -> float:
        """Peak amplitude u(0)."""
        if self.n == 1:
            return ((self.alpha + 2) * self.omega / 2) ** (1 / self.alpha)
        return self.omega ** (1 / self.alpha) * _radial_base(self.alpha)[2]

    @property
    def B(self) -> float:
        """Inverse width (decay rate of sech^{2/alpha} is 2B/alpha = sqrt(omega))."""
        return self.alpha * np.sqrt(self.omega) / 2

    @property
    def power(self) -> float:
        return 2 / self.alpha

    def __call__(self, x):
        """Profile value at x (n = 1) or at radius x (n = 2)."""
        if self.n == 1:
            return self.A * sech(self.B * np.asarray(x, dtype=float)) ** self.power
        r = np.abs(np.asarray(x, dtype=float))
        return self.omega ** (1 / self.alpha) * _radial_eval(self.alpha, np.sqrt(self.omega) * r)

    def derivative(self, x):
        """u'(x), n = 1 only."""
        self._need_1d()
        z = self.B * np.asarray(x, dtype=float)
        return -self.A * self.B * self.power * sech(z) ** self.power * np.tanh(z)

    def second_derivative(self, x):
        """u''(x) = A B^2 m (m sech^m - (m+1) sech^{m+2}) with m = 2/alpha."""
        self._need_1d()
        m = self.power
        s = sech(self.B * np.asarray(x, dtype=float))
        return self.A * self.B**2 * m * (m * s**m - (m + 1) * s ** (m + 2))

    def sample(self, spec: GridSpec) -> Field:
        """Trivial (y-constant) extension onto the grid."""
        if spec.n != self.n:
            raise ValueError(f"profile is {self.n}-dimensional, grid is {spec.n}-dimensional")
        if self.n == 1:
            return Field.y_constant(spec, self(spec.x))
        X1, X2 = np.meshgrid(spec.x, spec.x, indexing="ij")
        return Field.y_constant(spec, self(np.hypot(X1, X2)))

    def support(self) -> float:
        """Half-length beyond which the profile is below roundoff."""
        return 50.0 / self.B

    def _need_1d(self):
        if self.n != 1:
            raise NotImplementedError("closed-form derivatives exist only for n = 1")


def soliton_1d(omega: float, alpha: float) -> SolitonProfile:
    return SolitonProfile(float(omega), float(alpha), 1)


def soliton(omega: float, alpha: float, n: int = 1) -> SolitonProfile:
    return SolitonProfile(float(omega), float(alpha), n)


# n = 2 radial shooting ---------------------------------------------------

def _shoot(a: float, alpha: float, rmax: float):
    """Integrate the radial ODE from u(0) = a.  Returns (+1 overshoot | -1 undershoot, sol)."""

    def rhs(r, z):
        u, v = z
        return [v, -v / r + u - np.abs(u) ** alpha * u]

    def crosses(r, z):
        return z[0]

    crosses.terminal = True
    crosses.direction = -1

    def turns(r, z):
        return z[1]

    turns.terminal = True
    turns.direction = 1

    r0 = 1e-6
    b = (a - a ** (1 + alpha)) / 4
    sol = solve_ivp(rhs, (r0, rmax), [a + b * r0**2, 2 * b * r0], events=(crosses, turns),
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    return -1, sol


@lru_cache(maxsize=8)
def _radial_base(alpha: float):
    """Shooting solution at omega = 1: (r nodes, u nodes, u(0))."""
    rmax = 60.0
    lo, hi = 1.0 + 1e-9, 2.0
    while _shoot(hi, alpha, rmax)[0] < 0:
        hi *= 2
    while _shoot(lo, alpha, rmax)[0] > 0:
        lo = 1 + (lo - 1) / 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _shoot(mid, alpha, rmax)[0] > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15 * hi:
            break
    a = 0.5 * (lo + hi)
    _, sol = _shoot(a, alpha, rmax)
    # keep the part of the trajectory before it departs from the decaying branch
    r = np.linspace(sol.t[0], sol.t[-1], 4000)
    u = sol.sol(r)[0]
    good = u > 1e-9 * a
    cut = np.argmin(good) if not good.all() else r.size
    r, u = r[:cut], u[:cut]
    r = np.concatenate([[0.0], r])
    u = np.concatenate([[a], u])
    return r, u, a, CubicSpline(r, u, bc_type=((1, 0.0), "not-a-knot"))


def _radial_eval(alpha: float, r: np.ndarray) -> np.ndarray:
    rn, un, _, spline = _radial_base(alpha)
    r0 = np.asarray(r, dtype=float)
    r = np.atleast_1d(r0)
    out = np.zeros_like(r)
    inside = r <= rn[-1]
    out[inside] = spline(r[inside])
    # beyond the reliable range continue with the free decay e^{-r}/sqrt(r)
    tail = ~inside
    if tail.any():
        out[tail] = un[-1] * np.exp(-(r[tail] - rn[-1])) * np.sqrt(rn[-1] / r[tail])
    return out.reshape(r0.shape)


# integrals ---------------------------------------------------------------

def _integrate(fn, profile: SolitonProfile) -> float:
    """Integral over R^n of a radial integrand given as a function of x or r."""
    upper = profile.support()
    if profile.n == 1:
        val, _ = quad(fn, 0.0, upper, epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=500)
        return 2 * val
    val, _ = quad(lambda r: 2 * np.pi * r * fn(r), 0.0, upper, epsabs=QUAD_ABS,
                  epsrel=QUAD_REL, limit=500)
    return val


def soliton_mass(profile: SolitonProfile) -> float:
    """rho = ||u||_{L^2(R^n)}."""
    return float(np.sqrt(_integrate(lambda x: profile(x) ** 2, profile)))


@dataclass(frozen=True)
class MassCurve:
    alpha: float
    samples: list

    def is_increasing(self) -> bool:
        rhos = [r for _, r in self.samples]
        return all(b > a for a, b in zip(rhos, rhos[1:]))


def mass_curve(alpha: float, omegas, n: int = 1) -> MassCurve:
    omegas = sorted(float(w) for w in omegas)
    return MassCurve(alpha, [(w, soliton_mass(soliton(w, alpha, n))) for w in omegas])


def omega_of_mass(rho: float, alpha: float, n: int = 1) -> float:
    """Unique omega whose soliton has L^2 norm rho (bracketing root find in log omega)."""
    if not rho > 0:
        raise ValueError(f"mass must be positive, got {rho}")

    def gap(logw):
        return soliton_mass(soliton(np.exp(logw), alpha, n)) / rho - 1.0

    lo, hi = -2.0, 2.0
    while gap(lo) > 0:
        lo -= 4.0
    while gap(hi) < 0:
        hi += 4.0
    logw = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return float(np.exp(logw))


@dataclass(frozen=True)
class PohozaevReport:
    omega: float
    alpha: float
    mass_sq: float
    kinetic: float
    potential_int: float
    residual_poza: float
    residual_pozae: float
    ground_energy: float

    @property
    def energy(self) -> float:
        """Energy evaluated from its definition (independent of the identities)."""
        return 0.5 * self.kinetic - self.potential_int / (2 + self.alpha)


def pohozaev_report(profile: SolitonProfile) -> PohozaevReport:
    if profile.n != 1:
        raise NotImplementedError("identity report is implemented for n = 1")
    a, n = profile.alpha, profile.n
    mass_sq = _integrate(lambda x: profile(x) ** 2, profile)
    kinetic = _integrate(lambda x: profile.derivative(x) ** 2, profile)
    pot = _integrate(lambda x: profile(x) ** (2 + a), profile)
    res_poza = kinetic - a * n / (2 * (a + 2)) * pot
    res_pozae = profile.omega * mass_sq - (2 * a + 4 - a * n) / (a * n) * kinetic
    ground = (a * n - 4) / (2 * a * n) * kinetic
    return PohozaevReport(profile.omega, a, mass_sq, kinetic, pot, res_poza, res_pozae, ground)


def ground_energy(profile: SolitonProfile) -> float:
    return pohozaev_report(profile).ground_energy


def ground_energy_at_mass(rho: float, alpha: float) -> float:
    """I^rho for n = 1: energy of the soliton carrying L^2 norm rho."""
    return ground_energy(soliton_1d(omega_of_mass(rho, alpha), alpha))


def energy_exponent(alpha: float, n: int = 1) -> float:
    """I^rho = rho^e I^1 with e = (8 + 4 alpha - 2 alpha n)/(4 - alpha n)."""
    return (8 + 4 * alpha - 2 * alpha * n) / (4 - alpha * n)


def scaling_check(alpha: float, rho1: float, rho2: float) -> float:
    if not (rho1 > 0 and rho2 > 0):
        raise ValueError("masses must be positive")
    i1 = ground_energy_at_mass(rho1, alpha)
    i2 = i1 if rho1 == rho2 else ground_energy_at_mass(rho2, alpha)
    return abs(i2 / i1 - (rho2 / rho1) ** energy_exponent(alpha))


def ode_residual(profile: SolitonProfile, x=None, method: str = "analytic") -> float:
    """sup |-u'' + omega u - u^{1+alpha}| over sample points.

    ``analytic`` differentiates the closed form; ``spectral`` differentiates
    the samples on a periodic grid sized to the profile's own decay length.
    """
    a = profile.alpha
    if method == "analytic":
        if x is None:
            x = GridSpec().x
        u = profile(x)
        upp = profile.second_derivative(x)
    elif method == "spectral":
        half = 40.0 / (profile.power * profile.B)
        N = 4096
        h = 2 * half / N
        x = -half + h * np.arange(N)
        u = profile(x)
        k = 2 * np.pi * np.fft.fftfreq(N, h)
        upp = np.fft.ifft(-(k**2) * np.fft.fft(u)).real
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.max(np.abs(-upp + profile.omega * u - u ** (1 + a))))
