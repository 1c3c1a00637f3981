"""Vector potentials, the magnetic Laplacian and pointwise magnetic inequalities."""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exponents import (
    ComponentClass,
    Exponent,
    PotentialClass,
    PotentialClassSpec,
    classify_potential,
)
from .grid import Grid

CATALOG = ("zero", "smooth", "power")


@dataclass(frozen=True)
class Component:
    """One summand g(t)·B(x) of a catalog potential.

    ``kind`` selects the spatial profile B:

    * ``zero``: B = 0.
    * ``smooth``: rotated gradient of a Gaussian stream function of width
      ``width`` (a constant vector in one dimension).
    * ``power``: azimuthal field of magnitude ~ |x|^(-sigma), mollified at
      scale ``mollifier`` (default two grid spacings).

    The modulation is g(t) = 1 + mod_amplitude * sin(mod_frequency * t).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    width: float = 3.0
    sigma: float = 0.5
    mollifier: float | None = None
    mod_amplitude: float = 0.0
    mod_frequency: float = 0.0
    klass: ComponentClass | None = None

    def __post_init__(self):
        if self.kind not in CATALOG:
            raise ValueError(f"unknown potential profile {self.kind!r}; choose from {CATALOG}")
        if self.kind == "power" and not 0 < self.sigma < 1:
            raise ValueError(f"power-law profile needs sigma ∈ (0,1), got {self.sigma}")
        if self.kind == "smooth" and not self.width > 0:
            raise ValueError("smooth profile width must be positive")
        if self.klass is None:
            object.__setattr__(self, "klass", self.default_class())

    def default_class(self) -> ComponentClass:
        if self.kind == "power":
            # the local singularity |x|^-sigma lies in L^b for b < 3/sigma
            s = Fraction(self.sigma).limit_denominator(1000)
            b = (3 + min(3 / s, Fraction(6))) / 2
            return ComponentClass.of("inf", b, has_gradient=False, has_time_derivative=True)
        return ComponentClass.of("inf", "inf", has_gradient=True, has_time_derivative=True)

    def g(self, t: float) -> float:
        return 1.0 + self.mod_amplitude * np.sin(self.mod_frequency * t)

    def dg(self, t: float) -> float:
        return self.mod_amplitude * self.mod_frequency * np.cos(self.mod_frequency * t)

    @property
    def is_static(self) -> bool:
        return self.mod_amplitude == 0 or self.mod_frequency == 0

    def scaled(self, factor: float) -> "Component":
        return replace(self, amplitude=self.amplitude * factor)

    def profile(self, grid: Grid) -> np.ndarray:
        return _profile(self, grid)

    def gradient_profile(self, grid: Grid) -> np.ndarray:
        return _gradient_profile(self, grid)

    def mollification_scale(self, grid: Grid) -> float | None:
        if self.kind != "power":
            return None
        return self.mollifier if self.mollifier is not None else 2 * grid.spacing


@lru_cache(maxsize=64)
def _profile(c: Component, grid: Grid) -> np.ndarray:
    out = np.zeros((grid.dim,) + grid.shape)
    if c.kind == "zero" or c.amplitude == 0:
        out.setflags(write=False)
        return out
    if grid.dim == 1:
        if c.kind == "power":
            raise ValueError("power-law potentials need dim >= 2 (divergence-free fields are constant in 1D)")
        out[0] = c.amplitude
        out.setflags(write=False)
        return out
    # coordinates on [-L/2, L/2) are the minimal-image offsets from the centre
    x, y = grid.coords[:2]
    if c.kind == "smooth":
        w = c.width
        r2 = x * x + y * y
        psi = c.amplitude * w * np.exp(-r2 / (2 * w * w))
        out[0] = (y / (w * w)) * psi
        out[1] = -(x / (w * w)) * psi
    else:
        delta = c.mollification_scale(grid)
        rr2 = sum(xi * xi for xi in grid.coords) + delta * delta
        mag = c.amplitude * rr2 ** (-(c.sigma + 1) / 2)
        out[0] = -y * mag
        out[1] = x * mag
    out = grid.project_div_free(out)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _gradient_profile(c: Component, grid: Grid) -> np.ndarray:
    prof = _profile(c, grid)
    out = np.stack([grid.gradient(comp).real for comp in prof])
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """A potential A(t,x) = sum_j g_j(t) B_j(x) with class metadata per summand."""

    components: tuple = ()
    claim: PotentialClass | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.claim is not None:
            verdict = classify_potential(self.class_spec)
            if self.claim not in verdict:
                reason = verdict.violations.get(self.claim, "class mismatch")
                raise ValueError(f"potential claims {self.claim.value} but violates {reason}")

    @property
    def class_spec(self) -> PotentialClassSpec:
        return PotentialClassSpec(tuple(c.klass for c in self.components))

    @property
    def is_static(self) -> bool:
        return all(c.is_static for c in self.components)

    @property
    def is_zero(self) -> bool:
        return all(c.kind == "zero" or c.amplitude == 0 for c in self.components)

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec(tuple(c.scaled(factor) for c in self.components))

    def __add__(self, other: "PotentialSpec") -> "PotentialSpec":
        return PotentialSpec(self.components + other.components)

    def sample_components(self, grid: Grid, t: float) -> list:
        return [c.g(t) * c.profile(grid) for c in self.components]

    def sample_dt_components(self, grid: Grid, t: float) -> list:
        return [c.dg(t) * c.profile(grid) for c in self.components]

    def sample(self, grid: Grid, t: float) -> np.ndarray:
        out = np.zeros((grid.dim,) + grid.shape)
        for part in self.sample_components(grid, t):
            out = out + part
        return out

    def sample_dt(self, grid: Grid, t: float) -> np.ndarray:
        out = np.zeros((grid.dim,) + grid.shape)
        for part in self.sample_dt_components(grid, t):
            out = out + part
        return out

    def sample_gradient(self, grid: Grid, t: float) -> np.ndarray:
        out = np.zeros((grid.dim, grid.dim) + grid.shape)
        for c in self.components:
            out = out + c.g(t) * c.gradient_profile(grid)
        return out

    def component_exponents(self) -> list:
        return [c.klass.b for c in self.components]

    def mollification(self, grid: Grid) -> list:
        return [c.mollification_scale(grid) for c in self.components]


def zero_potential() -> PotentialSpec:
    return PotentialSpec(())


def smooth_potential(amplitude: float = 0.5, width: float = 3.0, mod_amplitude: float = 0.0,
                     mod_frequency: float = 0.0) -> PotentialSpec:
    return PotentialSpec((Component("smooth", amplitude, width=width, mod_amplitude=mod_amplitude,
                                    mod_frequency=mod_frequency),))


def power_potential(amplitude: float = 0.5, sigma: float = 0.5, mollifier: float | None = None,
                    mod_amplitude: float = 0.0, mod_frequency: float = 0.0) -> PotentialSpec:
    return PotentialSpec((Component("power", amplitude, sigma=sigma, mollifier=mollifier,
                                    mod_amplitude=mod_amplitude, mod_frequency=mod_frequency),))


def modulated(base: PotentialSpec, mod_amplitude: float, mod_frequency: float) -> PotentialSpec:
    return PotentialSpec(tuple(replace(c, mod_amplitude=mod_amplitude, mod_frequency=mod_frequency)
                               for c in base.components), base.claim)


# --- operators ---------------------------------------------------------------

def _field_or_zero(grid: Grid, A) -> np.ndarray:
    if A is None:
        return np.zeros((grid.dim,) + grid.shape)
    A = np.asarray(A)
    if A.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"potential shape {A.shape} does not match {(grid.dim,) + grid.shape}")
    return A


def magnetic_gradient(grid: Grid, u: np.ndarray, A) -> np.ndarray:
    A = _field_or_zero(grid, A)
    return grid.gradient(u) - 1j * A * u


def magnetic_laplacian(grid: Grid, u: np.ndarray, A) -> np.ndarray:
    """(∇−iA)·(∇−iA)u, equal to Δu − 2iA·∇u − |A|²u when div A = 0.

    The divergence form makes the discrete operator exactly symmetric and
    gives the quadratic-form identity with the discrete magnetic gradient.
    """
    A = _field_or_zero(grid, A)
    g = magnetic_gradient(grid, u, A)
    return grid.divergence(g) - 1j * np.sum(A * g, axis=0)


def magnetic_perturbation(grid: Grid, u: np.ndarray, A) -> np.ndarray:
    """Δu − (∇−iA)²u, i.e. the first- and zeroth-order magnetic terms (2iA·∇ + |A|²)u."""
    return grid.laplacian(u) - magnetic_laplacian(grid, u, A)


def expanded_perturbation(grid: Grid, u: np.ndarray, A) -> np.ndarray:
    """2iA·∇u + |A|²u evaluated term by term."""
    A = _field_or_zero(grid, A)
    return 2j * np.sum(A * grid.gradient(u), axis=0) + np.sum(A * A, axis=0) * u


def magnetic_h1_norm(grid: Grid, u: np.ndarray, A) -> float:
    g = magnetic_gradient(grid, u, A)
    return float(np.sqrt(grid.l2_norm(u) ** 2 + grid.l2_norm(g) ** 2))


def check_diamagnetic(grid: Grid, u: np.ndarray, A, delta: float = 1e-8) -> float:
    """Largest pointwise excess of |∇|u|_δ| over |(∇−iA)u|, with |u|_δ = sqrt(|u|² + δ²)."""
    mod = np.sqrt(np.abs(u) ** 2 + delta * delta)
    lhs = np.sqrt(np.sum(np.abs(grid.gradient(mod).real) ** 2, axis=0))
    rhs = np.sqrt(np.sum(np.abs(magnetic_gradient(grid, u, A)) ** 2, axis=0))
    return float(np.max(lhs - rhs))


def norm_equivalence_check(grid: Grid, u: np.ndarray, A, b) -> tuple:
    b = Exponent.of(b)
    if b.recip > Exponent.of(3).recip:
        raise ValueError(f"norm equivalence needs b ∈ [3,∞], got {b}")
    A = _field_or_zero(grid, A)
    a_norm = grid.lp_norm(A, b)
    h1 = grid.sobolev_norm(u, 1)
    h1a = magnetic_h1_norm(grid, u, A)
    scale = 1.0 + a_norm
    return h1 / (scale * h1a), h1a / (scale * h1)


def h1_to_hminus1_check(grid: Grid, u: np.ndarray, components) -> float:
    """‖2iA·∇u + |A|²u‖_{H⁻¹} / (C_A ‖u‖_{H¹}) with C_A = 1 + Σ‖A_j‖²_{b_j}.

    ``components`` is a sequence of (A_j, b_j) pairs.
    """
    comps = list(components)
    h1 = grid.sobolev_norm(u, 1)
    if h1 == 0 or not comps:
        return 0.0
    A = sum(np.asarray(a) for a, _ in comps)
    c_a = 1.0 + sum(grid.lp_norm(a, b) ** 2 for a, b in comps)
    return grid.sobolev_norm(expanded_perturbation(grid, u, A), -1) / (c_a * h1)
