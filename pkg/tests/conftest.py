import numpy as np
import pytest

from nlsground.grid import Field, GridSpec

TWO_PI = 2 * np.pi


@pytest.fixture
def small_grid():
    return GridSpec(Nx=256, Ny=16, L=40.0)


@pytest.fixture
def tiny_grid():
    return GridSpec(Nx=64, Ny=8, L=10.0)


def random_smooth_field(spec: GridSpec, seed: int, modes: int = 6) -> Field:
    """Band-limited complex field: every derivative is resolved exactly."""
    rng = np.random.default_rng(seed)
    X, Y = spec.mesh()
    out = np.zeros(spec.shape, dtype=complex)
    for _ in range(modes):
        kx = rng.integers(-4, 5) * np.pi / spec.L
        ky = rng.integers(-3, 4) * TWO_PI / spec.ell
        out += (rng.normal() + 1j * rng.normal()) * np.exp(1j * (kx * X + ky * Y))
    return Field(spec, out)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
