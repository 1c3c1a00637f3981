"""Vanishing-viscosity harness: ε-families, Cauchy tables and weak residuals."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import energy, mass
from .grid import Grid
from .magnetic import PotentialSpec, magnetic_laplacian
from .nonlinear import NonlinearitySpec, nonlinearity
from .solver import SolverConfig, Termination, Trajectory, solve_global


@dataclass
class FamilyResult:
    epsilons: list
    trajectories: list
    cauchy_table: np.ndarray
    residual_series: list
    grid: Grid
    datum: np.ndarray
    potential: PotentialSpec
    config: SolverConfig
    T: float
    terminations: list = field(default_factory=list)

    def tail_differences(self) -> list:
        """Differences between consecutive family members, ordered by decreasing ε."""
        n = len(self.epsilons)
        return [float(self.cauchy_table[i, i + 1]) for i in range(n - 1)]


def weak_residual(traj: Trajectory, A: PotentialSpec, spec: NonlinearitySpec) -> tuple:
    """H⁻¹ norm of i∂ₜu + (∇−iA)²u − N(u) at interior instants, over (1 + ‖u‖_{H¹})."""
    grid = traj.grid
    if len(traj) < 3:
        return np.array([]), np.array([])
    dudt = np.gradient(traj.states, traj.times, axis=0)
    out = []
    for j in range(1, len(traj) - 1):
        t, u = traj.times[j], traj.states[j]
        a = A.sample(grid, t) if A is not None else None
        res = 1j * dudt[j] + magnetic_laplacian(grid, u, a) - nonlinearity(grid, u, spec)
        out.append(grid.sobolev_norm(res, -1) / (1.0 + grid.sobolev_norm(u, 1)))
    return traj.times[1:-1], np.asarray(out)


def viscous_defect(traj: Trajectory, A: PotentialSpec, eps: float) -> np.ndarray:
    """ε‖(∇−iA)²u‖_{H⁻¹}/(1 + ‖u‖_{H¹}) at interior instants: the exact defect of an ε-solution."""
    grid = traj.grid
    out = []
    for t, u in zip(traj.times[1:-1], traj.states[1:-1]):
        a = A.sample(grid, t) if A is not None else None
        lap = magnetic_laplacian(grid, u, a)
        out.append(eps * grid.sobolev_norm(lap, -1) / (1.0 + grid.sobolev_norm(u, 1)))
    return np.asarray(out)


def run_family(grid: Grid, f: np.ndarray, A: PotentialSpec, T: float, epsilons, config: SolverConfig,
               workers: int = 1) -> FamilyResult:
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be positive and strictly decreasing")

    def one(e):
        return solve_global(grid, f, T, A, replace(config, epsilon=e))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, eps))
    else:
        trajs = [one(e) for e in eps]
    base_times = trajs[0].times
    for tr in trajs[1:]:
        if len(tr.times) != len(base_times) or not np.array_equal(tr.times, base_times):
            raise ValueError("family members do not share sampling instants")
    n = len(eps)
    table = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = max(grid.l2_norm(a - b) for a, b in zip(trajs[i].states, trajs[j].states))
            table[i, j] = table[j, i] = d
    residuals = [weak_residual(tr, A, config.nonlinearity)[1] for tr in trajs]
    return FamilyResult(eps, trajs, table, residuals, grid, np.asarray(f), A, config, T,
                        [tr.termination for tr in trajs])


def fitted_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def limit_report(family: FamilyResult, continuation: bool = True) -> dict:
    if len(family.epsilons) < 3:
        raise ValueError("limit report needs at least three family members")
    grid, A, spec = family.grid, family.potential, family.config.nonlinearity
    res_max = [float(r.max()) if len(r) else 0.0 for r in family.residual_series]
    bounds = []
    for e, tr in zip(family.epsilons, family.trajectories):
        ms = [mass(grid, s) for s in tr.states]
        es = [energy(grid, s, A.sample(grid, t) if A is not None else None, spec)
              for t, s in zip(tr.times, tr.states)]
        hs = [grid.sobolev_norm(s, 1) for s in tr.states]
        bounds.append({"epsilon": e, "sup_mass": max(ms), "sup_energy": max(es), "sup_h1": max(hs)})
    report = {
        "candidate_epsilon": family.epsilons[-1],
        "tail_differences": family.tail_differences(),
        "residual_max": res_max,
        "residual_slope": fitted_slope(family.epsilons, res_max),
        "uniform_bounds": bounds,
        "datum_mass": mass(grid, family.datum),
        "terminations": [t.value for t in family.terminations],
    }
    if continuation:
        cfg = replace(family.config, epsilon=family.epsilons[-1])
        one = solve_global(grid, family.datum, 1.0, A, cfg)
        two = solve_global(grid, family.datum, 2.0, A, cfg)
        k = len(one.times)
        same = np.array_equal(one.times, two.times[:k])
        agree = max(grid.l2_norm(a - b) for a, b in zip(one.states, two.states[:k])) if same else float("inf")
        report["prefix_agreement"] = float(agree)
        report["continuation_completed"] = (one.termination is Termination.COMPLETED
                                            and two.termination is Termination.COMPLETED)
    return report
