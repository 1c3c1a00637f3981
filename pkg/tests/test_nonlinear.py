import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corpus import complex_fields, real_fields, standard_corpus_grids
from magnls.grid import Grid
from magnls.nonlinear import (
    LINEAR,
    NonlinearitySpec,
    hartree_potential,
    hartree_quadratic_form,
    hartree_term,
    nonlinear_potential,
    nonlinearity,
    periodic_kernel,
    power_term,
    riesz_constant,
    riesz_multiplier,
)
from magnls.scenarios import random_smooth_field
from oracles import circular_convolution, riesz_constant_1d

G1 = Grid(1, 128, 32.0)
G2 = Grid(2, 32, 16.0)
G3 = Grid(3, 16, 8.0)
GRIDS = [G1, G2, G3]
seeds = st.integers(0, 2**32 - 1)
SPEC = NonlinearitySpec(3, 1, 1.0, 1.0)


def test_spec_validation():
    for bad in [dict(gamma=1), dict(gamma=6), dict(alpha=0), dict(alpha=3), dict(lambda1=-1.0),
                dict(lambda2=-0.1), dict(gamma="x")]:
        with pytest.raises(ValueError):
            NonlinearitySpec(**bad)
    assert NonlinearitySpec(gamma=Fraction(7, 3)).gamma == Fraction(7, 3)
    assert NonlinearitySpec(gamma=2.5).gamma == Fraction(5, 2)
    focusing = NonlinearitySpec(lambda1=-1.0, defocusing_only=False)
    assert focusing.lambda1 == -1.0


def test_kernel_exponent_scales_with_dimension():
    spec = NonlinearitySpec(alpha=Fraction(3, 2))
    assert [spec.kernel_exponent(d) for d in (1, 2, 3)] == [Fraction(1, 2), 1, Fraction(3, 2)]


def test_power_term_examples():
    assert np.all(power_term(np.zeros(8, complex), SPEC) == 0)
    c = 0.6 - 0.8j
    assert np.allclose(power_term(np.full(8, c), SPEC), abs(c) ** 2 * c)
    spec = NonlinearitySpec(gamma=Fraction(7, 3), lambda1=2.0)
    pw = 1.7 * G1.plane_wave(5)
    assert np.allclose(power_term(pw, spec), 2.0 * 1.7 ** (4 / 3) * pw, rtol=1e-13)


@given(seeds, st.fractions(Fraction(1, 1), 5, max_denominator=12).filter(lambda g: g > 1))
def test_power_term_modulus(seed, gamma):
    u = random_smooth_field(G1, np.random.default_rng(seed), 6, 2.0)
    spec = NonlinearitySpec(gamma=gamma, lambda1=1.3)
    ref = 1.3 * np.abs(u) ** float(gamma)
    assert np.allclose(np.abs(power_term(u, spec)), ref, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_one_dimensional_constant_matches_line_transform(alpha):
    assert math.isclose(riesz_constant(1, alpha), riesz_constant_1d(alpha), rel_tol=1e-12)


def test_three_dimensional_constant_coulomb():
    # |x|^-1 in three dimensions has transform 4π/|k|²
    assert math.isclose(riesz_constant(3, 1.0), 4 * math.pi, rel_tol=1e-12)


@pytest.mark.parametrize("grid", GRIDS)
@pytest.mark.parametrize("frac", [Fraction(1, 4), Fraction(1, 2), Fraction(9, 10)])
def test_multiplier_positive_zero_mean_and_decreasing(grid, frac):
    alpha = frac * grid.dim
    m = riesz_multiplier(grid, alpha)
    assert m.flat[0] == 0
    nz = grid.k2 > 0
    assert np.all(m[nz] > 0)
    k = np.sqrt(grid.k2[nz]).ravel()
    order = np.argsort(k, kind="stable")
    ks, ms = k[order], m[nz].ravel()[order]
    distinct = np.diff(ks) > 1e-12
    assert np.all(np.diff(ms)[distinct] < 0)
    assert np.allclose(np.diff(ms)[~distinct], 0, atol=1e-12 * ms.max())


def test_multiplier_rejects_out_of_window():
    for a in (0, 1, -0.5):
        with pytest.raises(ValueError):
            riesz_multiplier(G1, a)
    with pytest.raises(ValueError):
        riesz_multiplier(G2, 2)


def test_hartree_examples():
    assert np.all(hartree_term(G1, np.zeros(G1.shape, complex), SPEC) == 0)
    assert np.max(np.abs(hartree_term(G1, np.full(G1.shape, 1.5 + 0j), SPEC))) < 1e-13


@pytest.mark.parametrize("alpha", [Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)])
def test_hartree_matches_direct_convolution(alpha):
    grid = Grid(1, 32, 8.0)
    u = 0.8 * grid.plane_wave(1) + (0.3 - 0.4j) * grid.plane_wave(-3)
    spec = NonlinearitySpec(alpha=3 * alpha, lambda1=0.0, lambda2=1.0)
    kernel = periodic_kernel(grid, alpha)
    direct = circular_convolution(kernel, np.abs(u) ** 2, grid.cell_volume) * u
    assert np.max(np.abs(hartree_term(grid, u, spec) - direct)) < 1e-8


def test_periodic_kernel_is_singular_at_origin():
    grid = Grid(1, 64, 8.0)
    K = periodic_kernel(grid, 0.5)
    assert np.argmax(K) == 0 and np.all(np.diff(K[: grid.n // 2]) < 0)


def test_quadratic_form_examples():
    assert hartree_quadratic_form(G1, np.zeros(G1.shape), 0.5) == 0
    phi = np.cos(2 * np.pi * 3 * G1.axis / G1.length)
    m = riesz_multiplier(G1, 0.5)
    k = 2 * np.pi * 3 / G1.length
    # ± modes each carry |φ̂|² = N/4 with ortho transforms
    expected = G1.cell_volume * 2 * m[3] * G1.n / 4
    assert math.isclose(hartree_quadratic_form(G1, phi, 0.5), expected, rel_tol=1e-12)
    assert math.isclose(m[3], riesz_constant(1, 0.5) * k ** -0.5, rel_tol=1e-12)
    assert expected > 0


def test_quadratic_form_corpus_nonnegative():
    for grid in standard_corpus_grids():
        for phi in real_fields(grid):
            assert hartree_quadratic_form(grid, phi, Fraction(grid.dim, 3)) >= 0


def test_quadratic_form_is_the_pairing():
    phi = next(real_fields(G2))
    alpha = Fraction(2, 3)
    pairing = G2.cell_volume * np.sum(G2.apply_multiplier(riesz_multiplier(G2, alpha), phi).real * phi)
    assert math.isclose(hartree_quadratic_form(G2, phi, alpha), pairing, rel_tol=1e-10)


def test_nonlinearity_composition():
    u = next(complex_fields(G2))
    assert np.all(nonlinearity(G2, u, LINEAR) == 0)
    no_hartree = NonlinearitySpec(lambda2=0.0)
    assert np.array_equal(nonlinearity(G2, u, no_hartree), power_term(u, no_hartree))
    total = nonlinearity(G2, u, SPEC)
    parts = power_term(u, SPEC) + hartree_term(G2, u, SPEC)
    assert np.linalg.norm(total - parts) <= 1e-12 * np.linalg.norm(total)
    assert np.allclose(nonlinear_potential(G2, u, SPEC) * u, total)


@given(seeds, st.sampled_from(GRIDS), st.sampled_from([2, 3, Fraction(7, 3), 5]))
def test_defocusing_sign(seed, grid, gamma):
    u = random_smooth_field(grid, np.random.default_rng(seed), 4, 2.0)
    spec = NonlinearitySpec(gamma=gamma, alpha=1, lambda1=0.7, lambda2=1.3)
    pairing = (grid.cell_volume * np.sum(nonlinearity(grid, u, spec) * np.conj(u))).real
    expected = 0.7 * grid.lp_norm(u, float(gamma) + 1) ** (float(gamma) + 1) + 1.3 * hartree_quadratic_form(
        grid, np.abs(u) ** 2, spec.kernel_exponent(grid.dim))
    assert pairing >= 0
    assert math.isclose(pairing, expected, rel_tol=1e-10)


@given(seeds, st.sampled_from(GRIDS), st.integers(-5, 5))
def test_hartree_shift_equivariance(seed, grid, s):
    u = random_smooth_field(grid, np.random.default_rng(seed), 4)
    shifted = np.roll(u, s, axis=tuple(range(grid.dim)))
    lhs = hartree_term(grid, shifted, SPEC)
    rhs = np.roll(hartree_term(grid, u, SPEC), s, axis=tuple(range(grid.dim)))
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(np.max(np.abs(rhs)), 1.0)
    assert hartree_potential(grid, u, SPEC).dtype.kind == "f"
