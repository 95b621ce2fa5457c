"""Energy functionals on product-domain fields.

    E_lambda(u) = int ( |grad_x u|^2 / 2 + lambda |grad_y u|^2 / 2
                        - |u|^{2+alpha} / (2+alpha) )

lambda = 1 is the physical energy.  Kinetic integrals are evaluated by
Parseval with the same multipliers as :func:`grid.laplacian`, so that the
discrete gradient is the exact derivative of the discrete energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, apply_symbol, norms


@dataclass(frozen=True)
class Params:
    """Model parameters; construction enforces 0 < alpha < 4/(n+k)."""

    alpha: float
    lam: float = 1.0
    n: int = 1
    k: int = 1

    def __post_init__(self):
        if self.n not in (1, 2) or self.k != 1:
            raise ValueError("supported dimensions are n in {1, 2}, k = 1")
        crit = 4 / (self.n + self.k)
        if not 0 < self.alpha < crit:
            raise ValueError(
                f"alpha={self.alpha} is not L2-subcritical; need 0 < alpha < {crit:g}"
            )
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        assert self.theta < 2

    @property
    def theta(self) -> float:
        """Gagliardo-Nirenberg exponent (n+k) alpha / 2."""
        return (self.n + self.k) * self.alpha / 2

    def with_lambda(self, lam: float) -> "Params":
        return Params(self.alpha, lam, self.n, self.k)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic_x: float
    kinetic_y: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic_x + self.kinetic_y + self.potential


def _check_grid(u: Field, params: Params):
    if u.spec.n != params.n:
        raise ValueError(f"field is on an n={u.spec.n} grid but params have n={params.n}")


def potential_integral(u: Field, alpha: float) -> float:
    """int |u|^{2+alpha}."""
    return float(np.sum(np.abs(u.values) ** (2 + alpha)) * u.spec.cell)


def energy(u: Field, params: Params) -> EnergyBreakdown:
    _check_grid(u, params)
    nm = norms(u)
    a = params.alpha
    return EnergyBreakdown(
        0.5 * nm.kinetic_x,
        0.5 * params.lam * nm.kinetic_y,
        -potential_integral(u, a) / (2 + a),
    )


def energy_gradient(u: Field, params: Params) -> Field:
    """L2 gradient  -Delta_x u - lambda Delta_y u - |u|^alpha u."""
    _check_grid(u, params)
    v = u.values
    kin = apply_symbol(v, u.spec, u.spec.symbol(params.lam))
    return Field(u.spec, kin - np.abs(v) ** params.alpha * v)


def lagrange_multiplier(u: Field, params: Params) -> float:
    """Rayleigh-type multiplier

        omega = (int |u|^{2+alpha} - int(|grad_x u|^2 + lambda |grad_y u|^2)) / int |u|^2

    which equals the exact multiplier at a constrained critical point.
    """
    _check_grid(u, params)
    nm = norms(u)
    if nm.mass_sq == 0:
        raise ValueError("multiplier of the zero field is undefined")
    pot = potential_integral(u, params.alpha)
    return float((pot - nm.kinetic_x - params.lam * nm.kinetic_y) / nm.mass_sq)


def el_residual(u: Field, params: Params, omega: float | None = None) -> float:
    """|| grad E(u) + omega u ||_{L2}; omega defaults to the Rayleigh estimate."""
    if omega is None:
        omega = lagrange_multiplier(u, params)
    g = energy_gradient(u, params)
    r = g.values + omega * u.values
    return float(np.sqrt(np.sum(np.abs(r) ** 2) * u.spec.cell))


def h1_norm(u: Field) -> float:
    """Plain H^1 norm (int |u|^2 + |grad u|^2)^{1/2}; lambda never enters."""
    return float(np.sqrt(norms(u).h1_sq))


def gn_quotient(u: Field, params: Params) -> float:
    """||u||_{2+a}^{2+a} / (||u||_{H1}^theta ||u||_{L2}^{2+a-theta})."""
    _check_grid(u, params)
    nm = norms(u)
    if nm.mass_sq == 0:
        raise ValueError("quotient of the zero field is undefined")
    a, th = params.alpha, params.theta
    num = potential_integral(u, a)
    return float(num / (nm.h1_sq ** (th / 2) * nm.mass_sq ** ((2 + a - th) / 2)))


@dataclass(frozen=True)
class LocalizedGN:
    lhs: float
    sup_cell_mass: float
    h1: float
    exponent: float
    quotient: float


def _window_sums(a: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Periodic sliding sums of width w along ``axis``."""
    ext = np.concatenate([a, np.take(a, range(w), axis=axis)], axis=axis)
    c = np.cumsum(ext, axis=axis)
    n = a.shape[axis]
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    return np.take(c, range(w, w + n), axis=axis) - np.take(c, range(n), axis=axis)


def localized_gn_report(u: Field) -> LocalizedGN:
    """Localized Gagliardo-Nirenberg diagnostic at the exponent 2 + 4/(n+k).

    ``sup_cell_mass`` is the largest L2 norm over unit x-cells Q x T, taken
    over every grid-aligned placement of the cell (sliding window with
    periodic wrap), so grid shifts leave it unchanged.
    """
    spec = u.spec
    d = spec.n + spec.k
    p = 2 + 4 / d
    nm = norms(u, p=p)
    if nm.mass_sq == 0:
        raise ValueError("report of the zero field is undefined")
    w = max(1, int(round(1.0 / spec.hx)))
    col = np.sum(np.abs(u.values) ** 2, axis=-1) * spec.cell
    for ax in range(spec.n):
        col = _window_sums(col, w, ax)
    sup_cell = float(np.sqrt(col.max()))
    h1 = float(np.sqrt(nm.h1_sq))
    q = nm.lp / (sup_cell ** (2 / (d + 2)) * h1 ** (d / (d + 2)))
    return LocalizedGN(nm.lp, sup_cell, h1, p, float(q))
