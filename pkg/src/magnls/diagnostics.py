"""Mass, energy, dissipation functionals and identity residuals along trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .grid import Grid
from .magnetic import PotentialSpec, magnetic_gradient, magnetic_laplacian
from .nonlinear import NonlinearitySpec, hartree_quadratic_form, riesz_potential
from .solver import SolverConfig, Trajectory

MASS_SLACK = 1e-8
R_SLACK = 1e-10


def mass(grid: Grid, u: np.ndarray) -> float:
    return grid.l2_norm(u) ** 2


def kinetic(grid: Grid, u: np.ndarray, A) -> float:
    """‖(∇−iA)u‖₂²."""
    return grid.l2_norm(magnetic_gradient(grid, u, A)) ** 2


def energy(grid: Grid, u: np.ndarray, A, spec: NonlinearitySpec) -> float:
    e = 0.5 * kinetic(grid, u, A)
    if spec.lambda1:
        e += spec.lambda1 / float(spec.gamma + 1) * grid.lp_norm(u, spec.gamma + 1) ** float(spec.gamma + 1)
    if spec.lambda2:
        e += spec.lambda2 / 4 * hartree_quadratic_form(grid, np.abs(u) ** 2, spec.kernel_exponent(grid.dim))
    return e


@dataclass(frozen=True)
class RTerms:
    power_gradient: float
    power_modulus: float
    hartree_gradient: float
    hartree_modulus: float

    @property
    def total(self) -> float:
        return self.power_gradient + self.power_modulus + self.hartree_gradient + self.hartree_modulus

    def __float__(self) -> float:
        return self.total


def _modulus_gradient_sq(grid: Grid, u: np.ndarray, weight_power: float) -> np.ndarray:
    """|u|^p |∇|u||² written as |u|^(p-2) |Re(ū∇u)|², set to 0 at zeros of u."""
    re = np.real(np.conj(u) * grid.gradient(u))
    num = np.sum(re * re, axis=0)
    a2 = np.abs(u) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(a2 > 0, a2 ** ((weight_power - 2) / 2), 0.0)
    return np.where(a2 > 0, w * num, 0.0)


def r_functional(grid: Grid, u: np.ndarray, A, spec: NonlinearitySpec) -> RTerms:
    hd = grid.cell_volume
    pu2 = np.sum(np.abs(magnetic_gradient(grid, u, A)) ** 2, axis=0)
    t1 = t2 = t3 = t4 = 0.0
    if spec.lambda1:
        gm1 = float(spec.gamma - 1)
        t1 = spec.lambda1 * hd * float(np.sum((np.abs(u) ** 2) ** (gm1 / 2) * pu2))
        t2 = spec.lambda1 * gm1 * hd * float(np.sum(_modulus_gradient_sq(grid, u, gm1)))
    if spec.lambda2:
        alpha = spec.kernel_exponent(grid.dim)
        rho = np.abs(u) ** 2
        t3 = spec.lambda2 * hd * float(np.sum(riesz_potential(grid, rho, alpha) * pu2))
        grad_rho = grid.gradient(rho).real
        t4 = spec.lambda2 * 0.5 * hartree_quadratic_form(grid, grad_rho, alpha)
    return RTerms(t1, t2, t3, t4)


def hartree_gradient_term_physical(grid: Grid, u: np.ndarray, spec: NonlinearitySpec) -> float:
    """½∫(K * ∇|u|²)·∇|u|² evaluated in physical space (cross-check of the spectral form)."""
    alpha = spec.kernel_exponent(grid.dim)
    grad_rho = grid.gradient(np.abs(u) ** 2).real
    conv = np.stack([riesz_potential(grid, g, alpha) for g in grad_rho])
    return 0.5 * spec.lambda2 * grid.cell_volume * float(np.sum(conv * grad_rho))


def s_functional(grid: Grid, u: np.ndarray, A, dtA) -> float:
    """∫ A·∂ₜA |u|² + ∂ₜA·Im(u ∇ū)."""
    if dtA is None:
        raise ValueError("S needs time-derivative data for the potential")
    A = np.asarray(A)
    dtA = np.asarray(dtA)
    rho = np.abs(u) ** 2
    cur = np.imag(u * np.conj(grid.gradient(u)))
    return grid.cell_volume * float(np.sum(np.sum(A * dtA, axis=0) * rho + np.sum(dtA * cur, axis=0)))


def lambda_gronwall(grid: Grid, A_components, dtA_components, class_spec) -> float:
    bs = [c.b for c in class_spec.components]
    if len(bs) != len(A_components) or len(bs) != len(dtA_components):
        raise ValueError("class data must describe every potential component")
    dt_sum = sum(grid.lp_norm(d, b) for d, b in zip(dtA_components, bs))
    a_sum = sum(grid.lp_norm(a, b) for a, b in zip(A_components, bs))
    return dt_sum * (1.0 + a_sum)


def _has_dt(A: PotentialSpec) -> bool:
    return all(c.klass.has_time_derivative for c in A.components)


def _central(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Second-order central differences at interior instants (non-uniform spacing allowed)."""
    return np.gradient(values, times, axis=0)[1:-1]


def _potential_at(traj: Trajectory, A: PotentialSpec, t: float):
    return A.sample(traj.grid, t) if A is not None else None


def mass_identity_residual(traj: Trajectory, A: PotentialSpec, eps: float) -> tuple:
    grid = traj.grid
    m = np.array([mass(grid, s) for s in traj.states])
    dm = _central(traj.times, m)
    kin = np.array([kinetic(grid, s, _potential_at(traj, A, t))
                    for t, s in zip(traj.times[1:-1], traj.states[1:-1])])
    return traj.times[1:-1], np.abs(dm + 2 * eps * kin)


def _energy_rhs(grid: Grid, u: np.ndarray, A: PotentialSpec, t: float, config: SolverConfig) -> float:
    a = A.sample(grid, t) if A is not None else None
    lap = magnetic_laplacian(grid, u, a)
    rhs = -config.epsilon * grid.l2_norm(lap) ** 2 - config.epsilon * r_functional(grid, u, a, config.nonlinearity).total
    if A is not None and not A.is_static:
        rhs += s_functional(grid, u, a, A.sample_dt(grid, t))
    return rhs


def energy_series(traj: Trajectory, A: PotentialSpec, spec: NonlinearitySpec) -> np.ndarray:
    return np.array([energy(traj.grid, s, _potential_at(traj, A, t), spec) for t, s in zip(traj.times, traj.states)])


def energy_balance_residual(traj: Trajectory, A: PotentialSpec, config: SolverConfig) -> tuple:
    e = energy_series(traj, A, config.nonlinearity)
    de = _central(traj.times, e)
    rhs = np.array([_energy_rhs(traj.grid, s, A, t, config) for t, s in zip(traj.times[1:-1], traj.states[1:-1])])
    return traj.times[1:-1], np.abs(de - rhs)


def r_series(traj: Trajectory, A: PotentialSpec, spec: NonlinearitySpec) -> np.ndarray:
    return np.array([r_functional(traj.grid, s, _potential_at(traj, A, t), spec).total
                     for t, s in zip(traj.times, traj.states)])


def dissipation_budget(traj: Trajectory, A: PotentialSpec, config: SolverConfig) -> tuple:
    r = r_series(traj, A, config.nonlinearity)
    integral = float(trapezoid(r, traj.times)) if len(r) > 1 else 0.0
    return integral, config.epsilon * integral


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    if len(y) < 2:
        return np.zeros(len(y))
    return cumulative_trapezoid(y, t, initial=0.0)


def gronwall_envelope(times: np.ndarray, lam: np.ndarray, e0: float) -> np.ndarray:
    il = _cumtrapz(np.asarray(lam, dtype=float), np.asarray(times, dtype=float))
    return np.exp(il) * (e0 + il)


@dataclass
class DiagnosticsRecord:
    times: np.ndarray
    series: dict
    r_integral: float
    budget_ratio: float
    violations: list = field(default_factory=list)

    COLUMNS = ("time", "mass", "energy", "h1", "h1_magnetic", "R", "S", "Lambda", "magnetic_laplacian_sq",
               "l6l18_running", "x43_running", "R_integral_running", "gronwall_envelope")

    def rows(self):
        for i, t in enumerate(self.times):
            yield [t] + [self.series[c][i] for c in self.COLUMNS[1:]]

    def summary(self) -> dict:
        s = self.series
        return {
            "r_integral": self.r_integral,
            "budget_ratio": self.budget_ratio,
            "mass_initial": float(s["mass"][0]),
            "mass_final": float(s["mass"][-1]),
            "energy_initial": float(s["energy"][0]),
            "energy_final": float(s["energy"][-1]),
            "max_h1": float(np.max(s["h1"])),
            "l6l18": float(s["l6l18_running"][-1]),
            "x43": float(s["x43_running"][-1]),
            "envelope_final": float(s["gronwall_envelope"][-1]),
            "violations": list(self.violations),
        }


def compute_record(traj: Trajectory, A: PotentialSpec, config: SolverConfig) -> DiagnosticsRecord:
    grid = traj.grid
    spec = config.nonlinearity
    times = traj.times
    n = len(times)
    cols = {c: np.zeros(n) for c in DiagnosticsRecord.COLUMNS[1:]}
    has_dt = A is not None and _has_dt(A)
    l6 = x43_acc = 0.0
    sup_h1 = 0.0
    for i, (t, u) in enumerate(zip(times, traj.states)):
        a = _potential_at(traj, A, t)
        cols["mass"][i] = mass(grid, u)
        cols["energy"][i] = energy(grid, u, a, spec)
        h1 = grid.sobolev_norm(u, 1)
        cols["h1"][i] = h1
        cols["h1_magnetic"][i] = math.sqrt(cols["mass"][i] + kinetic(grid, u, a))
        cols["R"][i] = r_functional(grid, u, a, spec).total
        cols["magnetic_laplacian_sq"][i] = grid.l2_norm(magnetic_laplacian(grid, u, a)) ** 2
        if has_dt:
            dta = A.sample_dt(grid, t)
            cols["S"][i] = s_functional(grid, u, a, dta)
            cols["Lambda"][i] = lambda_gronwall(grid, A.sample_components(grid, t),
                                                A.sample_dt_components(grid, t), A.class_spec)
        else:
            cols["S"][i] = cols["Lambda"][i] = float("nan")
        dt = times[i] - times[i - 1] if i else 0.0
        l6 += dt * grid.lp_norm(u, 18) ** 6
        w13 = grid.lp_norm(u, 3) + grid.lp_norm(grid.gradient(u), 3)
        x43_acc += dt * w13 ** 4
        sup_h1 = max(sup_h1, h1)
        cols["l6l18_running"][i] = l6 ** (1 / 6)
        cols["x43_running"][i] = sup_h1 + x43_acc ** 0.25
    cols["R_integral_running"] = _cumtrapz(cols["R"], times)
    lam = np.nan_to_num(cols["Lambda"], nan=0.0)
    cols["gronwall_envelope"] = gronwall_envelope(times, lam, cols["energy"][0])
    r_int = float(cols["R_integral_running"][-1])
    rec = DiagnosticsRecord(times, cols, r_int, config.epsilon * r_int)
    rec.violations = find_violations(rec, A, config)
    return rec


def find_violations(rec: DiagnosticsRecord, A: PotentialSpec, config: SolverConfig) -> list:
    s = rec.series
    out = []
    m = s["mass"]
    if config.epsilon > 0 and np.any(m[1:] > m[:-1] * (1 + MASS_SLACK)):
        out.append("mass increased")
    scale = max(1.0, float(np.max(np.abs(s["energy"]))))
    if np.any(s["R"] < -R_SLACK * scale):
        out.append("R negative")
    if np.any(s["h1_magnetic"] ** 2 > (m + 2 * s["energy"]) * (1 + 1e-12) + 1e-14):
        out.append("magnetic H1 bound by M + 2E violated")
    e = s["energy"]
    if np.any(e > s["gronwall_envelope"] * (1 + 1e-6) + 1e-12):
        out.append("energy exceeds Gronwall envelope")
    if config.epsilon > 0 and (A is None or A.is_static):
        slack = 1e-9 * scale
        if np.any(e[1:] > e[:-1] + slack):
            out.append("energy increased with static potential")
    return out
