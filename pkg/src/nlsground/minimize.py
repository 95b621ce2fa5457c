"""Constrained minimization on L2 spheres by normalized gradient flow.

The default step is semi-implicit and shifted by the current Rayleigh
multiplier omega(u):

    u* = (1 + tau (omega - Delta_x - lambda Delta_y))^{-1} (u + tau |u|^alpha u)
    u  <- rho u* / ||u*||

Its fixed points solve the Euler-Lagrange equation exactly.  A step that
raises the energy is rejected and retried with tau halved, so the accepted
iterates always descend.

The rescaling u -> rho^{4/(4-an)} u(rho^{2a/(4-an)} x, y) maps the unit
sphere onto the sphere of radius rho and turns E into
rho^{(8-2an+4a)/(4-an)} E_lambda with lambda = rho^{-4a/(4-an)}; it is
implemented here by spectral resampling in x on a fixed grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .energy import Params, energy, lagrange_multiplier, el_residual
from .grid import Field, GridSpec, tail_ratio, y_variation
from .profiles import ground_energy_at_mass, omega_of_mass, soliton

log = logging.getLogger(__name__)

DESCENT_SLACK = 1e-12
MIN_TAU = 1e-10


class FlowDivergence(FloatingPointError):
    """Raised when the flow produces non-finite values."""


class UpperBoundViolation(ArithmeticError):
    """K^rho exceeded the trivial-extension value vol * I^{rho/sqrt(vol)}."""


@dataclass(frozen=True, eq=False)
class Init:
    """Initial guess for the flow.

    kinds: ``y_constant`` (trivially extended soliton of the matching 1D
    mass), ``perturbed`` (same times 1 + eps cos(2 pi y / ell)), ``random``
    (seeded band-limited modulation of a Gaussian envelope) and
    ``supplied`` (an explicit field, renormalized to the target mass).
    """

    kind: str = "y_constant"
    epsilon: float = 0.0
    seed: int = 0
    field: Optional[Field] = None

    def __post_init__(self):
        if self.kind not in ("y_constant", "perturbed", "random", "supplied"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("perturbation epsilon must lie in [0, 1]")
        if self.kind == "supplied" and self.field is None:
            raise ValueError("supplied init needs a field")

    @classmethod
    def y_constant(cls) -> "Init":
        return cls("y_constant")

    @classmethod
    def perturbed(cls, epsilon: float) -> "Init":
        return cls("perturbed", epsilon=epsilon)

    @classmethod
    def random(cls, seed: int) -> "Init":
        return cls("random", seed=seed)

    @classmethod
    def supplied(cls, u: Field) -> "Init":
        return cls("supplied", field=u)

    def describe(self) -> str:
        if self.kind == "perturbed":
            return f"perturbed({self.epsilon:g})"
        if self.kind == "random":
            return f"random({self.seed})"
        return self.kind


@dataclass(frozen=True)
class MinimizeConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    tau: float = 0.5
    tol: float = 1e-8
    max_iter: int = 50000
    init: Init = field(default_factory=Init)
    precondition: bool = True
    check_every: int = 10

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")

    def with_init(self, init: Init) -> "MinimizeConfig":
        return replace(self, init=init)


@dataclass(eq=False)
class MinimizeResult:
    u: Field
    value: float
    omega: float
    iterations: int
    residual: float
    y_variation: float
    converged: bool
    target_mass: float
    lam: float
    initial_value: float
    tau: float
    tail_ratio: float
    history: list = field(default_factory=list)
    upper_bound: Optional[float] = None

    @property
    def tails_resolved(self) -> bool:
        return self.tail_ratio < 1e-10

    def summary(self) -> dict:
        out = {
            "target_mass": self.target_mass,
            "lambda": self.lam,
            "value": self.value,
            "omega": self.omega,
            "iterations": self.iterations,
            "residual": self.residual,
            "y_variation": self.y_variation,
            "converged": self.converged,
            "initial_value": self.initial_value,
            "tau_final": self.tau,
            "tail_ratio": self.tail_ratio,
            "tails_resolved": self.tails_resolved,
        }
        if self.upper_bound is not None:
            out["upper_bound"] = self.upper_bound
            out["upper_bound_gap"] = self.upper_bound - self.value
        return out


# initial data ------------------------------------------------------------

def initial_field(target_mass: float, params: Params, config: MinimizeConfig) -> Field:
    spec = config.grid
    init = config.init
    if init.kind == "supplied":
        if init.field.spec != spec:
            raise ValueError("supplied init lives on a different grid")
        return init.field.renormalized(target_mass)
    w = omega_of_mass(target_mass / np.sqrt(spec.vol), params.alpha, spec.n)
    base = soliton(w, params.alpha, spec.n).sample(spec)
    if init.kind == "y_constant":
        return base.renormalized(target_mass)
    if init.kind == "perturbed":
        mesh = spec.mesh()
        mod = 1 + init.epsilon * np.cos(2 * np.pi * mesh[-1] / spec.ell)
        return Field(spec, base.values * mod).renormalized(target_mass)
    rng = np.random.default_rng(init.seed)
    mesh = spec.mesh()
    width = 2.0 / np.sqrt(w)
    env = np.exp(-sum(m**2 for m in mesh[:-1]) / (2 * width**2))
    noise = np.zeros(spec.shape)
    for m in range(1, 9):
        for ax in range(spec.n + 1):
            period = 2 * spec.L if ax < spec.n else spec.ell
            c = rng.normal(size=2) / m
            arg = 2 * np.pi * m * mesh[ax] / period
            noise += c[0] * np.cos(arg) + c[1] * np.sin(arg)
    noise /= np.abs(noise).max()
    return Field(spec, env * (1 + 0.5 * noise)).renormalized(target_mass)


# flow --------------------------------------------------------------------

class _Ops:
    """Transforms and Parseval weights; real fields use rfftn."""

    def __init__(self, spec: GridSpec, lam: float, real: bool):
        self.spec, self.real = spec, real
        ks = spec.axis_wavenumbers()
        if real:
            mu = 2 * np.pi * sfft.rfftfreq(spec.Ny, spec.hy)
            shape = (1,) * spec.n + (-1,)
            ks[-1] = mu.reshape(shape)
            w = np.full(mu.shape, 2.0)
            w[0] = 1.0
            if spec.Ny % 2 == 0:
                w[-1] = 1.0
            self.weight = w.reshape(shape)
        else:
            self.weight = 1.0
        self.xi_sq = sum(k**2 for k in ks[:-1])
        self.mu_sq = ks[-1] ** 2
        self.sym = self.xi_sq + lam * self.mu_sq
        self.scale = spec.cell / spec.size

    def fwd(self, v):
        return sfft.rfftn(v) if self.real else sfft.fftn(v)

    def bwd(self, V):
        if self.real:
            return sfft.irfftn(V, s=self.spec.shape)
        return sfft.ifftn(V)

    def quad(self, sym, V) -> float:
        """sum over modes of sym |V|^2 as a physical-space integral."""
        return float(np.sum(self.weight * sym * np.abs(V) ** 2) * self.scale)


def normalized_gradient_flow(target_mass: float, params: Params, config: MinimizeConfig) -> MinimizeResult:
    """Minimize E_lambda on ||u|| = target_mass."""
    if not target_mass > 0:
        raise ValueError("target mass must be positive")
    spec = config.grid
    if spec.n != params.n:
        raise ValueError("grid and params disagree on n")
    u0 = initial_field(target_mass, params, config)
    vals = u0.values
    real = bool(np.all(vals.imag == 0))
    v = vals.real.copy() if real else vals.copy()
    ops = _Ops(spec, params.lam, real)
    a, rho2 = params.alpha, target_mass**2
    cell = spec.cell
    tau = config.tau

    def renorm(w):
        with np.errstate(over="ignore", invalid="ignore"):
            nrm = np.sqrt(np.sum(np.abs(w) ** 2) * cell)
        if not (np.isfinite(nrm) and nrm > 0):
            raise FlowDivergence(
                f"step left the finite range at iteration {it} with tau={tau:g}; retry with a smaller tau"
            )
        return w * (target_mass / nrm)

    def state(V, w):
        kin = ops.quad(ops.sym, V)
        pot = float(np.sum(np.abs(w) ** (2 + a)) * cell)
        return 0.5 * kin - pot / (2 + a), (pot - kin) / rho2

    it = 0
    v = renorm(v)
    V = ops.fwd(v)
    E, omega = state(V, v)
    E_init = E
    history = []
    residual = np.inf
    converged = False
    it = 0
    while True:
        nonlin = np.abs(v) ** a * v
        if it % config.check_every == 0 or it == config.max_iter:
            r = ops.bwd(ops.sym * V) - nonlin + omega * v
            residual = float(np.sqrt(np.sum(np.abs(r) ** 2) * cell))
            yv = np.sqrt(ops.quad(ops.mu_sq, V) / rho2)
            history.append((it, E, residual, yv))
            if residual <= config.tol:
                converged = True
                break
        if it == config.max_iter:
            break
        it += 1
        while True:
            if config.precondition:
                denom = 1 + tau * (max(omega, 0.0) + ops.sym)
                w = ops.bwd((V + tau * ops.fwd(nonlin)) / denom)
            else:
                w = v - tau * (ops.bwd(ops.sym * V) - nonlin)
            w = renorm(w)
            W = ops.fwd(w)
            E_new, omega_new = state(W, w)
            if E_new <= E + DESCENT_SLACK * max(1.0, abs(E)):
                break
            tau *= 0.5
            log.debug("energy increase at iteration %d, tau -> %g", it, tau)
            if tau < MIN_TAU:
                raise FlowDivergence(f"descent failed at iteration {it}; tau underflow")
        v, V, E, omega = w, W, E_new, omega_new

    u = _canonical(Field(spec, v))
    return MinimizeResult(
        u=u,
        value=float(E),
        omega=float(omega),
        iterations=it,
        residual=float(residual),
        y_variation=y_variation(u),
        converged=converged,
        target_mass=float(target_mass),
        lam=params.lam,
        initial_value=float(E_init),
        tau=tau,
        tail_ratio=tail_ratio(u),
        history=history,
    )


def _canonical(u: Field) -> Field:
    """Move the density maximum to x = 0 and make u real positive there."""
    spec = u.spec
    dens = np.abs(u.values) ** 2
    idx = np.unravel_index(np.argmax(dens), dens.shape)
    vals = u.values
    for ax in range(spec.n):
        vals = np.roll(vals, spec.zero_index() - idx[ax], axis=ax)
    peak = vals[(spec.zero_index(),) * spec.n + (idx[-1],)]
    if peak != 0:
        vals = vals * (abs(peak) / peak)
    return Field(spec, vals)


def minimize_K(rho: float, alpha: float, config: MinimizeConfig, tol_upper: float | None = None) -> MinimizeResult:
    """K^rho: minimize the physical energy (lambda = 1) at mass rho."""
    params = Params(alpha, 1.0, config.grid.n)
    res = normalized_gradient_flow(rho, params, config)
    if config.grid.n == 1:
        vol = config.grid.vol
        bound = vol * ground_energy_at_mass(rho / np.sqrt(vol), alpha)
        res.upper_bound = bound
        slack = tol_upper if tol_upper is not None else 1e-6 * abs(bound) + config.tol
        if res.converged and res.value > bound + slack:
            raise UpperBoundViolation(
                f"K={res.value:.12g} exceeds trivial-extension bound {bound:.12g}"
            )
    return res


def minimize_J(lam: float, alpha: float, config: MinimizeConfig) -> MinimizeResult:
    """J_lambda: minimize E_lambda at unit mass."""
    return normalized_gradient_flow(1.0, Params(alpha, lam, config.grid.n), config)


def trivial_bound(rho: float, alpha: float, vol: float) -> float:
    """vol * I^{rho/sqrt(vol)}, the energy of the trivially extended soliton."""
    return vol * ground_energy_at_mass(rho / np.sqrt(vol), alpha)


# rescaling between K^rho and J_lambda ------------------------------------

def _exponents(alpha: float, n: int):
    d = 4 - alpha * n
    if not d > 0:
        raise ValueError("rescaling needs alpha * n < 4")
    return 4 / d, 2 * alpha / d


def rho_to_lambda(rho: float, alpha: float, n: int = 1) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    if not alpha * n < 4:
        raise ValueError("rescaling needs alpha * n < 4")
    return float(rho ** (-4 * alpha / (4 - alpha * n)))


def lambda_to_rho(lam: float, alpha: float, n: int = 1) -> float:
    return float(lam ** (-(4 - alpha * n) / (4 * alpha)))


def energy_scale_factor(rho: float, alpha: float, n: int = 1) -> float:
    """E(T u) = factor * E_lambda(u) with T the unit-to-rho rescaling."""
    return float(rho ** ((8 - 2 * alpha * n + 4 * alpha) / (4 - alpha * n)))


def _resample(values: np.ndarray, spec: GridSpec, scale: float) -> np.ndarray:
    """Trigonometric interpolant in every x-axis evaluated at scale * x.

    Points that land outside the box get zero instead of a periodic image.
    """
    N = spec.Nx
    xi = spec.xi
    pts = scale * spec.x + spec.L
    E = np.exp(1j * np.outer(pts, xi)) / N
    E[:, N // 2] = np.cos(pts * xi[N // 2]) / N
    E[(pts < 0) | (pts >= 2 * spec.L)] = 0
    out = values
    for ax in range(spec.n):
        C = sfft.fft(out, axis=ax)
        out = np.moveaxis(np.tensordot(E, np.moveaxis(C, ax, 0), axes=(1, 0)), 0, ax)
    return out


def map_minimizer(u: Field, rho: float, alpha: float, n: int | None = None, inverse: bool = False,
                  rtol: float = 1e-8) -> Field:
    """Map a field of mass rho to the unit sphere (or back with ``inverse``).

    forward:  u_1(x, y) = rho^{-a} u_rho(rho^{-b} x, y)
    inverse:  u_rho(x, y) = rho^{a} u_1(rho^{b} x, y)
    with a = 4/(4 - alpha n), b = 2 alpha/(4 - alpha n).  Resampling is
    spectral on the same grid, so the field must decay well inside the
    stretched box.
    """
    n = u.spec.n if n is None else n
    if n != u.spec.n:
        raise ValueError("n does not match the field's grid")
    a, b = _exponents(alpha, n)
    m = u.mass()
    expected = 1.0 if inverse else rho
    if abs(m - expected) > rtol * expected:
        raise ValueError(f"field mass {m:.12g} does not match {expected:.12g}")
    if inverse:
        amp, scale = rho**a, rho**b
    else:
        amp, scale = rho ** (-a), rho ** (-b)
    vals = _resample(u.values, u.spec, scale)
    if np.all(u.values.imag == 0):
        vals = vals.real
    return Field(u.spec, amp * vals)


@dataclass(frozen=True)
class SubadditivityRecord:
    rho1: float
    rho2: float
    K1: float
    K2: float
    scaled1: float
    scaled2: float
    margin: float
    predicted_margin: float
    holds: bool
    y_variation1: float
    y_variation2: float


def subadditivity_probe(rho1: float, rho2: float, alpha: float, config: MinimizeConfig) -> SubadditivityRecord:
    """Check that rho -> rho^{-2} K^rho is strictly decreasing on (rho1, rho2)."""
    if not 0 < rho1 < rho2:
        raise ValueError("need 0 < rho1 < rho2")
    r1 = minimize_K(rho1, alpha, config)
    r2 = minimize_K(rho2, alpha, config)
    for r in (r1, r2):
        if not r.converged:
            raise RuntimeError(f"minimization at rho={r.target_mass} did not converge")
    s1, s2 = r1.value / rho1**2, r2.value / rho2**2
    vol = config.grid.vol
    pred = trivial_bound(rho1, alpha, vol) / rho1**2 - trivial_bound(rho2, alpha, vol) / rho2**2
    return SubadditivityRecord(rho1, rho2, r1.value, r2.value, s1, s2, s1 - s2, pred, s1 > s2,
                               r1.y_variation, r2.y_variation)


def check_minimizer(res: MinimizeResult, params: Params) -> dict:
    """Independent recomputation of value, multiplier and residual via the energy module."""
    e = energy(res.u, params)
    return {
        "value": e.total,
        "omega": lagrange_multiplier(res.u, params),
        "residual": el_residual(res.u, params),
    }
