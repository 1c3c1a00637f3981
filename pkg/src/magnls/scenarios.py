"""Reusable grids, data and potentials for experiments, tests and demos."""
from __future__ import annotations

import numpy as np

from .grid import Grid
from .magnetic import PotentialSpec, smooth_potential
from .nonlinear import NonlinearitySpec
from .solver import SolverConfig

STANDARD_CARRIER_MODE = 12


def standard_grid() -> Grid:
    return Grid(1, 128, 32.0)


def standard_nonlinearity(gamma=3) -> NonlinearitySpec:
    return NonlinearitySpec(gamma=gamma, alpha=1, lambda1=1.0, lambda2=1.0)


def standard_potential() -> PotentialSpec:
    return smooth_potential(amplitude=0.5, width=3.0)


def standard_config(epsilon: float = 0.1, gamma=3, **overrides) -> SolverConfig:
    opts = dict(epsilon=epsilon, nonlinearity=standard_nonlinearity(gamma), slab_length=1 / 32, substeps=16,
                dt=1 / 512)
    opts.update(overrides)
    return SolverConfig(**opts)


def gaussian_datum(grid: Grid, amplitude: float = 1.0, width: float = 2.0, center: float = 0.0,
                   mode: int = STANDARD_CARRIER_MODE) -> np.ndarray:
    """Gaussian packet; in the first coordinate it carries the grid wavenumber 2*pi*mode/L."""
    r2 = sum((x - center) ** 2 for x in grid.coords)
    k0 = 2 * np.pi * mode / grid.length
    return amplitude * np.exp(-r2 / (2 * width * width)) * np.exp(1j * k0 * grid.coords[0])


def random_smooth_field(grid: Grid, rng: np.random.Generator, max_mode: int = 4, amplitude: float = 1.0) -> np.ndarray:
    """Random trigonometric polynomial with modes |m_i| <= max_mode."""
    coeffs = np.zeros(grid.shape, dtype=complex)
    ms = [m for m in range(-max_mode, max_mode + 1)]
    idx = np.ix_(*([np.array(ms) % grid.n] * grid.dim))
    shape = (len(ms),) * grid.dim
    coeffs[idx] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u = grid.ifft(coeffs)
    return amplitude * u / np.max(np.abs(u))


def random_divergence_free(grid: Grid, rng: np.random.Generator, max_mode: int = 3, amplitude: float = 1.0) -> np.ndarray:
    """Random real divergence-free field (a random constant vector in one dimension)."""
    if grid.dim == 1:
        return np.full((1,) + grid.shape, amplitude * rng.uniform(-1, 1))
    v = np.stack([random_smooth_field(grid, rng, max_mode).real for _ in range(grid.dim)])
    v = grid.project_div_free(v)
    return amplitude * v / max(np.max(np.abs(v)), 1e-300)


def random_nonvanishing_field(grid: Grid, rng: np.random.Generator, max_mode: int = 3,
                              phase_amplitude: float = 3.0) -> np.ndarray:
    """exp(φ + iψ) with random real trigonometric φ, ψ; |u| is smooth and bounded away from zero."""
    phi = random_smooth_field(grid, rng, max_mode).real
    psi = phase_amplitude * random_smooth_field(grid, rng, max_mode).real
    return np.exp(phi + 1j * psi)
