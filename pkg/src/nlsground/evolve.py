"""Strang split-step integration of

    i u_t - Delta_{x,y} u - |u|^alpha u = 0,

i.e. u_t = -i (Delta u + |u|^alpha u).  The kinetic flow multiplies each
mode by exp(+i |kappa|^2 t); the nonlinear flow is the pointwise phase
rotation exp(-i |u|^alpha t).  Both are unitary, so the discrete mass is
conserved to roundoff.  Standing waves are exp(-i omega t) Q(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid

from .energy import Params, energy
from .grid import Field, GridSpec, forward, norms
from .minimize import MinimizeConfig, minimize_K


class EvolutionError(FloatingPointError):
    """Non-finite state; ``last_good`` holds the last finite field."""

    def __init__(self, msg: str, last_good: Field, t: float):
        super().__init__(msg)
        self.last_good = last_good
        self.t = t


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 1e-3
    T: float = 1.0
    snapshot_every: int = 100
    energy_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.snapshot_every < 1 or self.energy_every < 1:
            raise ValueError("snapshot_every and energy_every must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass(eq=False)
class Trajectory:
    config: EvolveConfig
    params: Params
    snapshots: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    mass_series: list = field(default_factory=list)
    energy_series: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def initial(self) -> Field:
        return self.snapshots[0][1]

    @property
    def final(self) -> Field:
        return self.snapshots[-1][1]

    def mass_drift(self) -> float:
        m = np.asarray(self.mass_series)
        return float(np.max(np.abs(m - m[0])) / m[0])

    def energy_drift(self) -> float:
        e = np.asarray(self.energy_series)
        return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def split_step(u0: Field, params: Params, config: EvolveConfig) -> Trajectory:
    """Integrate from u0 over [0, T] with Strang splitting.

    Consecutive kinetic half-steps are fused; the full-step field is
    rebuilt whenever a snapshot or conserved quantity is due.
    """
    spec = u0.spec
    if spec.n != params.n:
        raise ValueError("grid and params disagree on n")
    a, dt = params.alpha, config.dt
    sym = spec.symbol(params.lam)
    half = np.exp(0.5j * dt * sym)
    full = half * half
    cell = spec.cell
    traj = Trajectory(config, params)

    def record(step: int, vals: np.ndarray):
        t = step * dt
        if step % config.energy_every == 0 or step == nsteps:
            f = Field(spec, vals)
            traj.step_times.append(t)
            traj.mass_series.append(float(np.sum(np.abs(vals) ** 2) * cell))
            traj.energy_series.append(energy(f, params).total)
        if step % config.snapshot_every == 0 or step == nsteps:
            traj.snapshots.append((t, Field(spec, vals)))

    nsteps = config.steps
    u = u0.values.copy()
    record(0, u)
    if nsteps == 0:
        return traj
    U = sfft.fftn(u) * half
    last_good, last_t = u0, 0.0
    for step in range(1, nsteps + 1):
        v = sfft.ifftn(U)
        v *= np.exp(-1j * dt * np.abs(v) ** a)
        U = sfft.fftn(v)
        if not np.all(np.isfinite(U)):
            raise EvolutionError(f"non-finite state at t={step * dt:g}", last_good, last_t)
        due = step % config.energy_every == 0 or step % config.snapshot_every == 0 or step == nsteps
        if due:
            vals = sfft.ifftn(U * half)
            record(step, vals)
            if step % config.snapshot_every == 0:
                last_good, last_t = traj.snapshots[-1][1], step * dt
        U *= full
    return traj


# orbit distance ----------------------------------------------------------

@dataclass(frozen=True)
class OrbitFit:
    distance: float
    shift_steps: tuple
    theta: float


def orbit_fit(u: Field, u_g: Field) -> OrbitFit:
    """inf over grid shifts tau and phases theta of ||u - e^{i theta} u_g(. + tau)||_{H1}.

    All grid shifts are scanned at once by an FFT of the H1 cross-spectrum;
    the optimal phase for each shift is the argument of the overlap.  The
    returned distance is recomputed directly at the optimum.
    """
    if u.spec != u_g.spec:
        raise ValueError("fields live on different grids")
    spec = u.spec
    weight = 1 + spec.symbol(1.0)
    A = forward(u.values, spec)
    G = forward(u_g.values, spec)
    cross = np.sum(weight * np.conj(G) * A, axis=-1)
    # C[m] = <u_g(. + m hx), u>_{H1} for every grid shift m
    C = sfft.fftn(cross)
    m = np.unravel_index(np.argmax(np.abs(C)), C.shape)
    theta = float(np.angle(C[m]))
    steps = tuple(int(s) if s <= spec.Nx // 2 else int(s) - spec.Nx for s in m)
    cand = u_g.values
    for ax, s in enumerate(steps):
        cand = np.roll(cand, -s, axis=ax)
    diff = Field(spec, u.values - np.exp(1j * theta) * cand)
    return OrbitFit(float(np.sqrt(norms(diff).h1_sq)), steps, theta)


def orbit_distance(u: Field, u_g: Field) -> float:
    return orbit_fit(u, u_g).distance


# stability experiment ----------------------------------------------------

@dataclass(eq=False)
class StabilityReport:
    rho: float
    delta: float
    stability_factor: float
    times: np.ndarray
    distance_series: np.ndarray
    max_distance: float
    bounded: bool
    initial_distance: float
    ground_state: Field
    trajectory: Optional[Trajectory] = None

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "delta": self.delta,
            "stability_factor": self.stability_factor,
            "initial_distance": self.initial_distance,
            "max_distance": self.max_distance,
            "bounded": self.bounded,
            "verdict": "BOUNDED" if self.bounded else "UNBOUNDED",
        }


def band_limited_noise(spec: GridSpec, seed: int, modes: int = 8) -> Field:
    """Random complex field using only the lowest ``modes`` wavenumbers per axis."""
    rng = np.random.default_rng(seed)
    spectrum = np.zeros(spec.shape, dtype=complex)
    idx = []
    for ax in range(spec.n + 1):
        N = spec.shape[ax]
        keep = np.zeros(N, dtype=bool)
        keep[:modes] = True
        keep[N - modes + 1:] = True
        shape = [1] * (spec.n + 1)
        shape[ax] = N
        idx.append(keep.reshape(shape))
    mask = np.logical_and.reduce(np.broadcast_arrays(*idx))
    spectrum[mask] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    return Field(spec, sfft.ifftn(spectrum))


def h1_inner(a: Field, b: Field) -> complex:
    spec = a.spec
    w = 1 + spec.symbol(1.0)
    return complex(np.sum(w * np.conj(forward(a.values, spec)) * forward(b.values, spec)))


def perturbation_direction(u_g: Field, seed: int) -> Field:
    """Band-limited noise, orthogonal to u_g in L2 and H1, unit H1 norm."""
    spec = u_g.spec
    v = band_limited_noise(spec, seed)
    w = 1 + spec.symbol(1.0)
    basis = [u_g, Field(spec, sfft.ifftn(w * sfft.fftn(u_g.values)))]
    ortho = []
    for b in basis:
        for o in ortho:
            b = b - o * (o.inner(b) / o.inner(o))
        ortho.append(b)
    for o in ortho:
        v = v - o * (o.inner(v) / o.inner(o))
    return v * (1 / np.sqrt(h1_inner(v, v).real))


def stability_experiment(rho: float, delta: float, alpha: float, evolve_config: EvolveConfig,
                         minimize_config: MinimizeConfig | None = None, seed: int = 0,
                         stability_factor: float = 5.0, keep_trajectory: bool = False,
                         ground: Field | None = None) -> StabilityReport:
    """Evolve a perturbed ground state and track its H1 distance to the ground-state orbit."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    mcfg = minimize_config or MinimizeConfig()
    params = Params(alpha, 1.0, mcfg.grid.n)
    if ground is None:
        res = minimize_K(rho, alpha, mcfg)
        if not res.converged:
            raise RuntimeError("ground state did not converge")
        ground = res.u
    u0 = ground
    if delta > 0:
        v = perturbation_direction(ground, seed)
        u0 = (ground + v * delta).renormalized(rho)
    traj = split_step(u0, params, evolve_config)
    times = traj.times
    dist = np.array([orbit_distance(f, ground) for _, f in traj.snapshots])
    mx = float(dist.max())
    return StabilityReport(rho, delta, stability_factor, times, dist, mx,
                           mx <= stability_factor * delta if delta > 0 else True,
                           float(dist[0]), ground, traj if keep_trajectory else None)


# Strichartz-type norms ---------------------------------------------------

@dataclass(frozen=True)
class StrichartzNorms:
    p: float
    q: float
    X_T: float
    Y_T: float
    T: float


def strichartz_exponents(alpha: float, n: int) -> tuple:
    return 4 * (2 + alpha) / (n * alpha), 2 + alpha


def _inner_norms(u: Field, q: float) -> tuple:
    """(||u||_{L^q_x H^1_y}, ||grad_x u||_{L^q_x L^2_y}) for one snapshot."""
    spec = u.spec
    hx_n = spec.hx**spec.n
    Uy = sfft.fft(u.values, axis=-1)
    mu2 = spec.mu**2
    h1y = np.sqrt(np.sum((1 + mu2) * np.abs(Uy) ** 2, axis=-1) * spec.hy / spec.Ny)
    Ux = sfft.fftn(u.values, axes=tuple(range(spec.n)))
    ks = spec.axis_wavenumbers()
    gx2 = np.zeros(spec.shape)
    for ax in range(spec.n):
        d = sfft.ifftn(1j * ks[ax] * Ux, axes=tuple(range(spec.n)))
        gx2 = gx2 + np.abs(d) ** 2
    l2y = np.sqrt(np.sum(gx2, axis=-1) * spec.hy)
    X = (np.sum(h1y**q) * hx_n) ** (1 / q)
    Y = (np.sum(l2y**q) * hx_n) ** (1 / q)
    return float(X), float(Y)


def strichartz_norms(traj: Trajectory, backward: Optional[Trajectory] = None) -> StrichartzNorms:
    """X_T = ||u||_{L^p(-T,T; L^q_x H^1_y)},  Y_T = ||grad_x u||_{L^p(-T,T; L^q_x L^2_y)}.

    Inner norms are taken y, then x; the time integral is a composite
    trapezoid over snapshot times.  The (-T, 0) half is the forward
    evolution of conj(u0) (conjugation reverses time for this equation);
    for real u0 it coincides with the forward half and is not recomputed.
    """
    if len(traj.snapshots) < 2:
        raise ValueError("need at least two snapshots")
    a, n = traj.params.alpha, traj.params.n
    p, q = strichartz_exponents(a, n)
    u0 = traj.initial
    if backward is None:
        if np.all(u0.values.imag == 0):
            backward = traj
        else:
            backward = split_step(u0.conj(), traj.params, traj.config)

    def half(tr: Trajectory):
        t = tr.times
        vals = np.array([_inner_norms(f, q) for _, f in tr.snapshots])
        return trapezoid(vals[:, 0] ** p, t), trapezoid(vals[:, 1] ** p, t)

    fx, fy = half(traj)
    bx, by = half(backward)
    return StrichartzNorms(p, q, float((fx + bx) ** (1 / p)), float((fy + by) ** (1 / p)),
                           float(traj.times[-1]))
