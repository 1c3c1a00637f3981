import numpy as np
import pytest

from magnls.diagnostics import energy, mass
from magnls.grid import Grid
from magnls.magnetic import zero_potential
from magnls.nonlinear import LINEAR
from magnls.propagate import hs_flow
from magnls.scenarios import gaussian_datum, standard_config, standard_grid, standard_potential
from magnls.solver import SolverConfig, Trajectory
from magnls.viscosity import fitted_slope, limit_report, run_family, viscous_defect, weak_residual

G = standard_grid()
A = standard_potential()
F = gaussian_datum(G)
FAMILY = (0.2, 0.1, 0.05, 0.025)
LIN_CFG = SolverConfig(epsilon=0.1, nonlinearity=LINEAR, slab_length=1 / 32, substeps=16)


@pytest.fixture(scope="module")
def nonlinear_family():
    return run_family(G, F, A, 1.0, FAMILY, standard_config())


@pytest.fixture(scope="module")
def linear_family():
    return run_family(G, F, zero_potential(), 1.0, FAMILY, LIN_CFG)


def test_family_validation():
    for bad in [(0.1, 0.2), (0.1, 0.1), (0.1, 0.0)]:
        with pytest.raises(ValueError):
            run_family(G, F, A, 0.1, bad, standard_config())


def test_single_member_family():
    fam = run_family(G, F, A, 0.125, [0.1], standard_config())
    assert fam.cauchy_table.shape == (1, 1) and fam.tail_differences() == []
    with pytest.raises(ValueError):
        limit_report(fam)


def test_linear_family_differences_match_multipliers(linear_family):
    fam = linear_family
    for i, j in [(0, 1), (1, 2), (2, 3)]:
        exact = max(G.l2_norm(hs_flow(G, F, fam.epsilons[i], t) - hs_flow(G, F, fam.epsilons[j], t))
                    for t in fam.trajectories[0].times)
        assert abs(fam.cauchy_table[i, j] - exact) < 1e-9


def test_linear_family_differences_vanish_linearly():
    gaps = [2.0 ** -k for k in range(9, 5, -1)]
    fam = run_family(G, F, zero_potential(), 0.5, [0.1] + [0.1 - g for g in gaps], LIN_CFG)
    slope = fitted_slope(gaps, fam.cauchy_table[0, 1:])
    assert abs(slope - 1) < 0.05


def test_weak_residual_of_exact_plane_wave():
    mode, c = 3, 0.7
    k2 = (2 * np.pi * mode / G.length) ** 2
    times = np.linspace(0, 0.5, 257)
    states = np.stack([c * np.exp(-1j * k2 * t) * G.plane_wave(mode) for t in times])
    _, res = weak_residual(Trajectory(G, times, states), None, LINEAR)
    dt = times[1] - times[0]
    assert res.max() < 10 * dt * dt * k2 ** 3


def test_weak_residual_of_zero_field():
    times = np.linspace(0, 1, 5)
    _, res = weak_residual(Trajectory(G, times, np.zeros((5,) + G.shape, complex)), A, standard_config().nonlinearity)
    assert np.all(res == 0)


def test_weak_residual_is_the_viscous_defect(nonlinear_family):
    fam = nonlinear_family
    for e, tr, res in zip(fam.epsilons, fam.trajectories, fam.residual_series):
        defect = viscous_defect(tr, A, e)
        assert np.max(np.abs(res - defect)) < 1e-3 * np.max(defect)
    maxima = [r.max() for r in fam.residual_series]
    assert all(a > b for a, b in zip(maxima, maxima[1:]))


def test_linear_family_residual_slope(linear_family):
    rep = limit_report(linear_family, continuation=False)
    assert rep["residual_slope"] >= 0.8
    assert abs(rep["residual_slope"] - 1) < 0.05


def test_nonlinear_family_limit_report(nonlinear_family):
    rep = limit_report(nonlinear_family)
    tail = rep["tail_differences"]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    assert min(nonlinear_family.cauchy_table[np.triu_indices(4, 1)]) == tail[-1]
    m0 = mass(G, F)
    e0 = energy(G, F, A.sample(G, 0), standard_config().nonlinearity)
    bounds = rep["uniform_bounds"]
    assert all(b["sup_mass"] <= m0 * (1 + 1e-8) for b in bounds)
    assert all(b["sup_energy"] <= e0 * (1 + 1e-9) for b in bounds)
    h1 = [b["sup_h1"] for b in bounds]
    assert max(h1) <= 2 * h1[0]
    assert rep["candidate_epsilon"] == FAMILY[-1]
    assert rep["prefix_agreement"] < 1e-8 and rep["continuation_completed"]
    assert rep["terminations"] == ["completed"] * 4


def test_family_threads_match_sequential():
    seq = run_family(G, F, A, 0.25, (0.2, 0.1), standard_config())
    par = run_family(G, F, A, 0.25, (0.2, 0.1), standard_config(), workers=2)
    for a, b in zip(seq.trajectories, par.trajectories):
        assert np.array_equal(a.states, b.states)


def test_fitted_slope():
    x = np.array([0.4, 0.2, 0.1])
    assert abs(fitted_slope(x, 3 * x ** 2) - 2) < 1e-12
    assert np.isnan(fitted_slope([1.0], [1.0]))
