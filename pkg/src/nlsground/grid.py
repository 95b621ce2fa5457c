"""Truncated product grid [-L, L)^n x T_ell with spectral calculus.

The Euclidean factor is truncated to a periodic box, so every operator
here is a Fourier multiplier.  All transforms go through :func:`forward`
and :func:`backward`, which fix the normalization used across the package:

    modes[m] = sqrt(cell / N) * sum_j u[j] exp(-i kappa_m . z_j)

where ``cell = hx**n * hy`` and ``N`` is the node count.  With this choice
``sum |modes|**2 == cell * sum |u|**2`` (discrete Parseval), and the zero
mode of a constant field ``c`` equals ``c * sqrt(box volume)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "Field",
    "SpectrumView",
    "Norms",
    "transform_forward",
    "transform_backward",
    "laplacian",
    "norms",
    "shift_phase",
    "y_variation",
    "tail_ratio",
    "write_field",
    "read_field",
]

MAGIC = b"NLSF"
FORMAT_VERSION = 1


def _is_pow2(v: int) -> bool:
    return v > 0 and (v & (v - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [-L, L)^n x [0, ell).

    Attributes:
        n: Euclidean dimension (1 or 2).
        Nx: nodes per Euclidean axis (power of two, >= 16).
        Ny: nodes on the torus (power of two, >= 4).
        L: half-width of the truncated Euclidean box.
        ell: torus circumference.
    """

    n: int = 1
    Nx: int = 2048
    Ny: int = 64
    L: float = 40.0
    ell: float = 2 * np.pi
    k: int = field(default=1, init=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"n must be 1 or 2, got {self.n}")
        if self.Nx < 16 or not _is_pow2(self.Nx):
            raise ValueError(f"Nx must be a power of two >= 16, got {self.Nx}")
        if self.Ny < 4 or not _is_pow2(self.Ny):
            raise ValueError(f"Ny must be a power of two >= 4, got {self.Ny}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.ell > 0:
            raise ValueError(f"ell must be positive, got {self.ell}")

    @property
    def hx(self) -> float:
        return 2 * self.L / self.Nx

    @property
    def hy(self) -> float:
        return self.ell / self.Ny

    @property
    def vol(self) -> float:
        return self.ell

    @property
    def shape(self) -> tuple:
        return (self.Nx,) * self.n + (self.Ny,)

    @property
    def size(self) -> int:
        return self.Nx**self.n * self.Ny

    @property
    def cell(self) -> float:
        """Quadrature weight of one node."""
        return self.hx**self.n * self.hy

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.hx * np.arange(self.Nx)

    @cached_property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(self.Ny)

    @cached_property
    def xi(self) -> np.ndarray:
        """Angular wavenumbers pi*m/L along each Euclidean axis."""
        return 2 * np.pi * sfft.fftfreq(self.Nx, self.hx)

    @cached_property
    def mu(self) -> np.ndarray:
        """Torus wavenumbers 2*pi*m/ell."""
        return 2 * np.pi * sfft.fftfreq(self.Ny, self.hy)

    def axis_wavenumbers(self) -> list:
        """Broadcastable wavenumber arrays, one per axis (x axes then y)."""
        out = []
        d = self.n + 1
        for ax in range(d):
            shape = [1] * d
            shape[ax] = -1
            out.append((self.xi if ax < self.n else self.mu).reshape(shape))
        return out

    def xi_sq(self) -> np.ndarray:
        ks = self.axis_wavenumbers()
        return sum(k**2 for k in ks[:-1])

    def mu_sq(self) -> np.ndarray:
        return self.axis_wavenumbers()[-1] ** 2

    def symbol(self, lambda_y: float = 1.0) -> np.ndarray:
        """|xi|^2 + lambda_y |mu|^2 broadcast to the full mode shape."""
        return np.broadcast_to(self.xi_sq() + lambda_y * self.mu_sq(), self.shape)

    def mesh(self) -> tuple:
        """Coordinate arrays (x1, [x2,] y) broadcast to the grid shape."""
        axes = [self.x] * self.n + [self.y]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def zero_index(self) -> int:
        """Index of the node x = 0."""
        return self.Nx // 2

    def replace(self, **kw) -> "GridSpec":
        args = dict(n=self.n, Nx=self.Nx, Ny=self.Ny, L=self.L, ell=self.ell)
        args.update(kw)
        return GridSpec(**args)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of u(x, y) on a :class:`GridSpec`, stored with shape
    ``spec.shape`` (row-major, x outer and y inner).  Values are copied and
    frozen on construction."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.size != self.spec.size:
            raise ValueError(
                f"field has {vals.size} samples, grid needs {self.spec.size}"
            )
        vals = vals.reshape(self.spec.shape)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains NaN or Inf samples")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "Field":
        return cls(spec, fn(*spec.mesh()))

    @classmethod
    def y_constant(cls, spec: GridSpec, profile: np.ndarray) -> "Field":
        """Trivial extension of an x-profile (shape (Nx,)*n) along the torus."""
        profile = np.asarray(profile)
        return cls(spec, np.broadcast_to(profile[..., None], spec.shape))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.spec, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.spec, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.spec, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.spec, -self.values)

    def conj(self) -> "Field":
        return Field(self.spec, self.values.conj())

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def inner(self, other: "Field") -> complex:
        """L2 inner product <self, other>, conjugate-linear in ``self``."""
        _same_grid(self, other)
        return complex(np.vdot(self.values, other.values) * self.spec.cell)

    def mass(self) -> float:
        """L2 norm (not squared)."""
        return float(np.sqrt(norms(self).mass_sq))

    def renormalized(self, target: float) -> "Field":
        m = self.mass()
        if m == 0:
            raise ValueError("cannot renormalize the zero field")
        return self * (target / m)


def _same_grid(a: Field, b: Field):
    if a.spec != b.spec:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class SpectrumView:
    spec: GridSpec
    modes: np.ndarray

    @property
    def wavenumbers(self) -> tuple:
        return (self.spec.xi,) * self.spec.n + (self.spec.mu,)


@dataclass(frozen=True)
class Norms:
    mass_sq: float
    kinetic_x: float
    kinetic_y: float
    lp: float | None = None
    p: float | None = None

    @property
    def h1_sq(self) -> float:
        return self.mass_sq + self.kinetic_x + self.kinetic_y


def forward(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    return sfft.fftn(values, norm="ortho") * np.sqrt(spec.cell)


def backward(modes: np.ndarray, spec: GridSpec) -> np.ndarray:
    return sfft.ifftn(modes, norm="ortho") / np.sqrt(spec.cell)


def transform_forward(u: Field) -> SpectrumView:
    return SpectrumView(u.spec, forward(u.values, u.spec))


def transform_backward(s: SpectrumView) -> Field:
    if s.modes.shape != s.spec.shape:
        raise ValueError("mode array does not match grid")
    return Field(s.spec, backward(s.modes, s.spec))


def apply_symbol(values: np.ndarray, spec: GridSpec, symbol: np.ndarray) -> np.ndarray:
    return sfft.ifftn(symbol * sfft.fftn(values))


def laplacian(u: Field, lambda_y: float = 1.0) -> Field:
    """Delta_x u + lambda_y Delta_y u via the multiplier -(|xi|^2 + lambda_y |mu|^2)."""
    if not lambda_y > 0:
        raise ValueError("lambda_y must be positive")
    return Field(u.spec, apply_symbol(u.values, u.spec, -u.spec.symbol(lambda_y)))


def norms(u: Field, p: float | None = None) -> Norms:
    """Quadrature mass, Parseval kinetic integrals and optional L^p norm."""
    if p is not None and p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    spec = u.spec
    power = np.abs(forward(u.values, spec)) ** 2
    mass_sq = float(np.sum(np.abs(u.values) ** 2) * spec.cell)
    kx = float(np.sum(spec.xi_sq() * power))
    ky = float(np.sum(spec.mu_sq() * power))
    lp = None
    if p is not None:
        lp = float((np.sum(np.abs(u.values) ** p) * spec.cell) ** (1.0 / p))
    return Norms(mass_sq, kx, ky, lp, p)


def y_variation(u: Field) -> float:
    """||grad_y u|| / ||u||; zero for y-independent fields."""
    nm = norms(u)
    if nm.mass_sq == 0:
        raise ValueError("y_variation of the zero field is undefined")
    return float(np.sqrt(nm.kinetic_y / nm.mass_sq))


def _as_shift_vector(tau, n: int) -> np.ndarray:
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if t.size == 1:
        t = np.concatenate([t, np.zeros(n - 1)])
    if t.size != n:
        raise ValueError(f"shift needs {n} components")
    return t


def shift_phase(u: Field, tau: Union[float, Sequence[float]] = 0.0, theta: float = 0.0) -> Field:
    """Return exp(i theta) u(x + tau, y).

    Shifts that are integer multiples of hx are exact index rolls; other
    shifts use a spectral phase ramp (the Nyquist mode keeps only its real
    part so real fields stay real).
    """
    spec = u.spec
    tvec = _as_shift_vector(tau, spec.n)
    steps = tvec / spec.hx
    vals = u.values
    if np.allclose(steps, np.round(steps), rtol=0, atol=1e-9):
        for ax, s in enumerate(np.round(steps).astype(int)):
            if s:
                vals = np.roll(vals, -s, axis=ax)
    else:
        modes = sfft.fftn(vals)
        ks = spec.axis_wavenumbers()
        nyq = spec.Nx // 2
        for ax in range(spec.n):
            ramp = np.exp(1j * spec.xi * tvec[ax])
            ramp[nyq] = np.cos(spec.xi[nyq] * tvec[ax])
            modes = modes * ramp.reshape(ks[ax].shape)
        vals = sfft.ifftn(modes)
    return Field(spec, np.exp(1j * theta) * vals)


def tail_ratio(u: Field) -> float:
    """max |u| on the x-faces of the box relative to max |u|.

    The periodic truncation is only faithful when this is tiny.
    """
    a = np.abs(u.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for ax in range(u.spec.n):
        edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
    return float(edge / peak)


def write_field(path: Union[str, Path], u: Field) -> None:
    """Binary dump: little-endian header then interleaved (re, im) float64."""
    s = u.spec
    header = MAGIC + struct.pack("<4I2d", FORMAT_VERSION, s.n, s.Nx, s.Ny, s.L, s.ell)
    data = np.empty(s.size * 2, dtype="<f8")
    flat = u.values.reshape(-1)
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_field(path: Union[str, Path]) -> Field:
    raw = Path(path).read_bytes()
    hsize = 4 + struct.calcsize("<4I2d")
    if len(raw) < hsize or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an NLSF field dump")
    version, n, Nx, Ny, L, ell = struct.unpack("<4I2d", raw[4:hsize])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    spec = GridSpec(n=n, Nx=Nx, Ny=Ny, L=L, ell=ell)
    data = np.frombuffer(raw[hsize:], dtype="<f8")
    if data.size != 2 * spec.size:
        raise ValueError(f"{path}: truncated payload")
    return Field(spec, (data[0::2] + 1j * data[1::2]).reshape(spec.shape))
