"""Defocusing power and Hartree nonlinearities.

The Hartree kernel |x|^(-alpha) acts on the torus as the Fourier multiplier

    m(k) = c_{d,a} |k|^(a-d),   c_{d,a} = pi^(d/2) 2^(d-a) Gamma((d-a)/2) / Gamma(a/2),

with the mean mode set to zero, so that (K * g)(x) = ifft(m * fft(g)).
The exponent alpha of a NonlinearitySpec is the three-dimensional one; on a
grid of dimension d the kernel exponent is alpha*d/3, which keeps the same
position inside the window (0, d).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn

from .grid import Grid


def _rational(x, name: str) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be rational, got {x!r}") from exc


@dataclass(frozen=True)
class NonlinearitySpec:
    gamma: Fraction = Fraction(3)
    alpha: Fraction = Fraction(1)
    lambda1: float = 1.0
    lambda2: float = 1.0
    defocusing_only: bool = True

    def __post_init__(self):
        g = _rational(self.gamma, "gamma")
        a = _rational(self.alpha, "alpha")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "alpha", a)
        if not 1 < g <= 5:
            raise ValueError(f"gamma ∈ (1,5] required, got {g}")
        if not 0 < a < 3:
            raise ValueError(f"alpha ∈ (0,3) required, got {a}")
        if self.defocusing_only and (self.lambda1 < 0 or self.lambda2 < 0):
            raise ValueError("lambda1, lambda2 >= 0 required (defocusing)")

    def kernel_exponent(self, dim: int) -> Fraction:
        return self.alpha * dim / 3

    @property
    def is_linear(self) -> bool:
        return self.lambda1 == 0 and self.lambda2 == 0


LINEAR = NonlinearitySpec(lambda1=0.0, lambda2=0.0)


def riesz_constant(dim: int, alpha: float) -> float:
    return float(np.pi ** (dim / 2) * 2 ** (dim - alpha) * gamma_fn((dim - alpha) / 2) / gamma_fn(alpha / 2))


@lru_cache(maxsize=32)
def _multiplier(grid: Grid, alpha: Fraction) -> np.ndarray:
    a = float(alpha)
    k = np.sqrt(grid.k2)
    safe = np.where(k == 0, 1.0, k)
    m = riesz_constant(grid.dim, a) * safe ** (a - grid.dim)
    m.flat[0] = 0.0
    m.setflags(write=False)
    return m


def riesz_multiplier(grid: Grid, alpha) -> np.ndarray:
    """Fourier multiplier of |x|^(-alpha) on the grid; alpha must lie in (0, dim)."""
    a = _rational(alpha, "alpha")
    if not 0 < a < grid.dim:
        raise ValueError(f"kernel exponent must lie in (0,{grid.dim}), got {a}")
    return _multiplier(grid, a)


def riesz_potential(grid: Grid, g: np.ndarray, alpha) -> np.ndarray:
    out = grid.apply_multiplier(riesz_multiplier(grid, alpha), g)
    return out.real if np.isrealobj(g) else out


def power_term(u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    if spec.lambda1 == 0:
        return np.zeros_like(u, dtype=complex)
    return spec.lambda1 * (np.abs(u) ** 2) ** (float(spec.gamma - 1) / 2) * u


def hartree_potential(grid: Grid, u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    rho = np.abs(u) ** 2
    return riesz_potential(grid, rho, spec.kernel_exponent(grid.dim))


def hartree_term(grid: Grid, u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    if spec.lambda2 == 0:
        return np.zeros_like(u, dtype=complex)
    return spec.lambda2 * hartree_potential(grid, u, spec) * u


def nonlinear_potential(grid: Grid, u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    """Real V with N(u) = V u."""
    v = np.zeros(grid.shape)
    if spec.lambda1:
        v = v + spec.lambda1 * (np.abs(u) ** 2) ** (float(spec.gamma - 1) / 2)
    if spec.lambda2:
        v = v + spec.lambda2 * hartree_potential(grid, u, spec)
    return v


def nonlinearity(grid: Grid, u: np.ndarray, spec: NonlinearitySpec) -> np.ndarray:
    if spec.is_linear:
        return np.zeros_like(u, dtype=complex)
    return power_term(u, spec) + hartree_term(grid, u, spec)


def hartree_quadratic_form(grid: Grid, phi: np.ndarray, alpha) -> float:
    """∫(K * φ)φ as h^d Σ m(k)|φ̂(k)|²; a leading axis of length dim is summed over."""
    m = riesz_multiplier(grid, alpha)
    phi = np.asarray(phi)
    parts = phi if phi.ndim == grid.dim + 1 else phi[None]
    total = 0.0
    for p in parts:
        total += float(np.sum(m * np.abs(grid.fft(p)) ** 2))
    return grid.cell_volume * total


def periodic_kernel(grid: Grid, alpha) -> np.ndarray:
    """Physical-space kernel whose circular convolution reproduces the multiplier."""
    m = riesz_multiplier(grid, alpha)
    # K(x) = V^-1 Σ m(k) e^{ikx}; with ortho transforms ifft(m) = N^(-d/2) Σ m e^{ikx}
    return (grid.ifft(m) * grid.size ** 0.5 / grid.volume).real
