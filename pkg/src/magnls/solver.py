"""Time integration of  ∂ₜu = (i+ε)(∇−iA)²u − iN(u).

Two integrators are provided:

* a Duhamel–Picard slab solver. On a slab the unknown is the trajectory at
  the midpoints σ_j of a uniform substep grid. The solution map propagates
  nodes exactly with the heat-Schrödinger multiplier and integrates the
  source by the midpoint rule, so the discrete fixed point is the implicit
  midpoint rule in the interaction picture (second order, and exactly
  unitary for ε = 0 linear runs);
* a Strang splitting with exact half steps for (i+ε)Δ and a classical
  four-stage step for the remaining first- and zeroth-order terms.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid
from .magnetic import PotentialSpec, magnetic_perturbation, zero_potential
from .nonlinear import LINEAR, NonlinearitySpec, nonlinearity
from .propagate import hs_multiplier, strichartz_norm

log = logging.getLogger(__name__)


class Termination(enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup_detected"
    CONTRACTION_FAILED = "contraction_failed"


class SolverTermination(RuntimeError):
    """Raised when integration cannot continue."""


class ContractionFailed(SolverTermination):
    pass


class StepInstability(SolverTermination):
    pass


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.1
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    scheme: str = "picard"
    slab_length: float = 1 / 32
    substeps: int = 4
    dt: float = 1 / 128
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    max_halvings: int = 20
    h1_blowup_threshold: float = 1e3
    l6l18_threshold: float = 1e3
    eta0: float = 1e-2
    sample_every: int = 1

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.epsilon == 0 and not self.nonlinearity.is_linear:
            raise ValueError("epsilon > 0 required for nonlinear runs (ε = 0 is for linear reference runs)")
        if self.scheme not in ("picard", "strang"):
            raise ValueError(f"scheme must be 'picard' or 'strang', got {self.scheme!r}")
        for name in ("slab_length", "dt", "picard_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("substeps", "picard_max_iter", "sample_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def step(self) -> float:
        """Time between consecutive trajectory nodes."""
        return self.slab_length / self.substeps if self.scheme == "picard" else self.dt


@dataclass
class SlabStats:
    t0: float
    t1: float
    substeps: int
    iterations: int
    increments: list
    contraction_ratio: float
    residual: float
    depth: int = 0

    def as_dict(self) -> dict:
        return {
            "t0": self.t0, "t1": self.t1, "substeps": self.substeps,
            "iterations": self.iterations, "contraction_ratio": self.contraction_ratio,
            "residual": self.residual, "halvings": self.depth,
        }


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray
    slabs: list = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    t_hit: float | None = None
    message: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


class _Dynamics:
    """Source term G with ∂ₜu = (i+ε)Δu − G(t, u)."""

    def __init__(self, grid: Grid, A: PotentialSpec, config: SolverConfig):
        self.grid = grid
        self.A = A if A is not None else zero_potential()
        self.config = config
        self.c = 1j + config.epsilon
        self.magnetic = not self.A.is_zero
        self.nonlinear = not config.nonlinearity.is_linear

    @property
    def trivial(self) -> bool:
        return not (self.magnetic or self.nonlinear)

    def source(self, t: float, u: np.ndarray) -> np.ndarray:
        g = np.zeros(self.grid.shape, dtype=complex)
        if self.magnetic:
            g += self.c * magnetic_perturbation(self.grid, u, self.A.sample(self.grid, t))
        if self.nonlinear:
            g += 1j * nonlinearity(self.grid, u, self.config.nonlinearity)
        return g


def _h1_weights(grid: Grid) -> np.ndarray:
    return grid.cell_volume * (1.0 + grid.k2)


class _SlabMap:
    """The discrete solution map on one slab with ``m`` midpoint unknowns."""

    def __init__(self, dyn: _Dynamics, t0: float, t1: float, m: int):
        self.dyn, self.t0, self.m = dyn, t0, m
        grid, eps = dyn.grid, dyn.config.epsilon
        self.dt = (t1 - t0) / m
        self.mids = [t0 + (j + 0.5) * self.dt for j in range(m)]
        self.nodes_t = [t0 + j * self.dt for j in range(m + 1)]
        self.full = hs_multiplier(grid, eps, self.dt)
        self.half = hs_multiplier(grid, eps, self.dt / 2)
        self.w = _h1_weights(grid)

    def free(self, f: np.ndarray) -> np.ndarray:
        grid = self.dyn.grid
        fh = grid.fft(f)
        eps = self.dyn.config.epsilon
        return np.stack([grid.ifft(hs_multiplier(grid, eps, s - self.t0) * fh) for s in self.mids])

    def apply(self, f: np.ndarray, U: np.ndarray, with_nodes: bool = False):
        grid = self.dyn.grid
        node = grid.fft(f)
        V = np.empty_like(U)
        nodes = [np.array(f, dtype=complex)] if with_nodes else None
        for j, s in enumerate(self.mids):
            gh = grid.fft(self.dyn.source(s, U[j]))
            V[j] = grid.ifft(self.half * node - (self.dt / 2) * gh)
            node = self.full * node - self.dt * self.half * gh
            if with_nodes:
                nodes.append(grid.ifft(node))
        return (V, nodes) if with_nodes else V

    def h1(self, W: np.ndarray) -> float:
        grid = self.dyn.grid
        return max(math.sqrt(float(np.sum(self.w * np.abs(grid.fft(w)) ** 2))) for w in W)


def apply_solution_map(u_traj: Trajectory, f: np.ndarray, A: PotentialSpec, config: SolverConfig,
                       t1: float | None = None) -> Trajectory:
    """Evaluate Φu at the midpoint quadrature nodes of ``u_traj``.

    ``u_traj.times`` must be the midpoints of a uniform substep grid starting
    at ``t0 = times[0] - (times[1]-times[0])/2``; ``t1`` defaults to the end
    of that grid.
    """
    times = u_traj.times
    m = len(times)
    dt = (times[1] - times[0]) if m > 1 else (2 * (t1 - times[0]) if t1 is not None else None)
    if dt is None:
        raise ValueError("a single-sample trajectory needs an explicit slab end t1")
    t0 = times[0] - dt / 2
    t_end = t0 + m * dt if t1 is None else t1
    smap = _SlabMap(_Dynamics(u_traj.grid, A, config), t0, t_end, m)
    V = smap.apply(f, np.asarray(u_traj.states, dtype=complex))
    return Trajectory(u_traj.grid, np.asarray(smap.mids), V)


def _substeps_for(config: SolverConfig, length: float) -> int:
    return max(1, int(round(length / config.step)))


def _picard(dyn: _Dynamics, f: np.ndarray, t0: float, t1: float, depth: int):
    cfg = dyn.config
    m = _substeps_for(cfg, t1 - t0)
    smap = _SlabMap(dyn, t0, t1, m)
    U = smap.free(f)
    increments, ratios = [], []
    converged, failed = False, False
    nodes = None
    for it in range(1, cfg.picard_max_iter + 1):
        V, nodes = smap.apply(f, U, with_nodes=True)
        scale = smap.h1(V)
        d = smap.h1(V - U) / scale if scale > 0 else 0.0
        increments.append(d)
        if len(increments) > 1 and increments[-2] > 1e-13:
            ratios.append(d / increments[-2])
        U = V
        if d < cfg.picard_tol:
            converged = True
            break
        if ratios and ratios[-1] >= 1:
            failed = True
            break
    ratio = ratios[0] if ratios else 0.0
    stats = SlabStats(t0, t1, m, len(increments), increments, ratio, increments[-1], depth)
    if converged:
        return smap.nodes_t, nodes, [stats]
    if depth >= cfg.max_halvings:
        raise ContractionFailed(f"Picard iteration failed on [{t0:g}, {t1:g}] after {depth} halvings")
    log.debug("halving slab [%g, %g] (%s)", t0, t1, "ratio >= 1" if failed else "max_iter")
    mid = t0 + (t1 - t0) / 2
    ta, na, sa = _picard(dyn, f, t0, mid, depth + 1)
    tb, nb, sb = _picard(dyn, na[-1], mid, t1, depth + 1)
    return ta + tb[1:], na + nb[1:], sa + sb


def solve_slab_picard(grid: Grid, f: np.ndarray, t0: float, t1: float, A: PotentialSpec,
                      config: SolverConfig):
    """Advance ``f`` from t0 to t1 by Picard iteration; returns (u(t1), list of slab stats)."""
    if t1 - t0 > config.slab_length * (1 + 1e-12):
        raise ValueError("slab longer than configured slab_length")
    dyn = _Dynamics(grid, A, config)
    _, nodes, stats = _picard(dyn, np.asarray(f, dtype=complex), t0, t1, 0)
    return nodes[-1], stats


def _slab_edges(t0: float, t1: float, length: float) -> list:
    n = max(1, int(math.ceil((t1 - t0) / length - 1e-9)))
    return [t0 + min(k * length, t1 - t0) for k in range(n + 1)]


def _rk4_remainder(dyn: _Dynamics, t: float, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = -dyn.source(t, u)
    k2 = -dyn.source(t + dt / 2, u + dt / 2 * k1)
    k3 = -dyn.source(t + dt / 2, u + dt / 2 * k2)
    k4 = -dyn.source(t + dt, u + dt * k3)
    return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _strang_steps(dyn: _Dynamics, f: np.ndarray, t0: float, t1: float):
    cfg = dyn.config
    grid = dyn.grid
    n = int(round((t1 - t0) / cfg.dt))
    if n < 1 or abs(n * cfg.dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError(f"dt = {cfg.dt} must divide the interval length {t1 - t0}")
    half = hs_multiplier(grid, cfg.epsilon, cfg.dt / 2)
    u = np.array(f, dtype=complex)
    limit = 1e3 * max(grid.l2_norm(u), 1e-300)
    yield t0, u
    for j in range(n):
        t = t0 + j * cfg.dt
        u = grid.apply_multiplier(half, u)
        if not dyn.trivial:
            u = _rk4_remainder(dyn, t, u, cfg.dt)
        u = grid.apply_multiplier(half, u)
        norm = grid.l2_norm(u)
        if not np.isfinite(norm) or norm > limit:
            raise StepInstability(f"splitting step unstable at t = {t + cfg.dt:g} (norm {norm:.3e})")
        yield t0 + (j + 1) * cfg.dt, u


def solve_strang(grid: Grid, f: np.ndarray, t0: float, t1: float, A: PotentialSpec,
                 config: SolverConfig) -> np.ndarray:
    dyn = _Dynamics(grid, A, config)
    u = f
    for _, u in _strang_steps(dyn, f, t0, t1):
        pass
    return u


def linear_propagator(grid: Grid, f: np.ndarray, t0: float, t1: float, A: PotentialSpec, eps: float,
                      config: SolverConfig | None = None) -> np.ndarray:
    """The linear evolution 𝒰_{ε,A}(t1, t0) f computed with the Picard slab solver."""
    base = config or SolverConfig(epsilon=eps, nonlinearity=LINEAR)
    cfg = replace(base, epsilon=eps, nonlinearity=LINEAR, scheme="picard")
    f = np.asarray(f, dtype=complex)
    if t1 == t0:
        return f.copy()
    dyn = _Dynamics(grid, A, cfg)
    u = f
    edges = _slab_edges(t0, t1, cfg.slab_length)
    for a, b in zip(edges[:-1], edges[1:]):
        _, nodes, _ = _picard(dyn, u, a, b, 0)
        u = nodes[-1]
    return u


def _is_critical(spec: NonlinearitySpec) -> bool:
    return spec.gamma == 5 and spec.lambda1 != 0


def solve_global(grid: Grid, f: np.ndarray, T_total: float, A: PotentialSpec,
                 config: SolverConfig) -> Trajectory:
    """Integrate on [0, T_total] with blow-up monitors; monitor trips end the run early."""
    dyn = _Dynamics(grid, A, config)
    f = np.asarray(f, dtype=complex)
    times, states, slabs = [0.0], [f.copy()], []
    termination, t_hit, message = Termination.COMPLETED, None, ""
    critical = _is_critical(config.nonlinearity)
    l6_acc = 0.0
    count = 0

    def monitor(t, u):
        nonlocal l6_acc
        h1 = grid.sobolev_norm(u, 1)
        if not np.isfinite(h1) or h1 > config.h1_blowup_threshold:
            return f"H1 norm {h1:.3e} exceeds {config.h1_blowup_threshold:g}"
        if critical:
            l6_acc += config.step * grid.lp_norm(u, 18) ** 6
            if l6_acc ** (1 / 6) > config.l6l18_threshold:
                return f"L6L18 norm exceeds {config.l6l18_threshold:g}"
        return None

    def record(t, u):
        nonlocal count
        count += 1
        if count % config.sample_every == 0 or math.isclose(t, T_total):
            times.append(t)
            states.append(u)

    if config.scheme == "picard":
        edges = _slab_edges(0.0, T_total, config.slab_length)
        u = f
        try:
            for a, b in zip(edges[:-1], edges[1:]):
                ts, nodes, st = _picard(dyn, u, a, b, 0)
                slabs.extend(st)
                tripped = None
                for t, v in zip(ts[1:], nodes[1:]):
                    record(t, v)
                    tripped = monitor(t, v)
                    if tripped:
                        termination, t_hit, message = Termination.BLOWUP, t, tripped
                        break
                if tripped:
                    break
                u = nodes[-1]
        except ContractionFailed as exc:
            termination, t_hit, message = Termination.CONTRACTION_FAILED, times[-1], str(exc)
    else:
        try:
            steps = _strang_steps(dyn, f, 0.0, T_total)
            next(steps)
            for t, v in steps:
                record(t, v)
                tripped = monitor(t, v)
                if tripped:
                    termination, t_hit, message = Termination.BLOWUP, t, tripped
                    break
        except StepInstability as exc:
            termination, t_hit, message = Termination.BLOWUP, times[-1], str(exc)
    return Trajectory(grid, np.asarray(times), np.stack(states), slabs, termination, t_hit, message)


# --- critical smallness and stability ------------------------------------------------

@dataclass(frozen=True)
class CriticalCheck:
    value: float
    eta0: float

    @property
    def small(self) -> bool:
        return self.value <= self.eta0


def critical_smallness(grid: Grid, f: np.ndarray, T: float, config: SolverConfig) -> CriticalCheck:
    """Discrete L⁶([0,T], L^{18/7}) norm of ∇e^{itΔ}f with left-rectangle samples every ``config.step``."""
    if config.nonlinearity.gamma != 5:
        raise ValueError("critical smallness applies to gamma = 5")
    h = config.step
    fh = grid.fft(np.asarray(f, dtype=complex))
    n = int(math.ceil(T / h - 1e-9))
    acc = 0.0
    for j in range(n):
        u = grid.ifft(hs_multiplier(grid, 0.0, j * h) * fh)
        acc += h * grid.lp_norm(grid.gradient(u), "18/7") ** 6
    value = acc ** (1 / 6)
    log.info("critical smallness: %.6e (eta0 = %g)", value, config.eta0)
    return CriticalCheck(value, config.eta0)


def x43_norm(grid: Grid, states, dt: float) -> float:
    """Discrete norm of X^(4,3) = L∞ₜH¹ₓ ∩ L⁴ₜW^{1,3}ₓ on sampled states."""
    sup_h1 = max(grid.sobolev_norm(s, 1) for s in states)
    w13 = np.array([grid.lp_norm(s, 3) + grid.lp_norm(grid.gradient(s), 3) for s in states])
    return sup_h1 + float((dt * np.sum(w13 ** 4)) ** 0.25)


def class_norm(grid: Grid, A: PotentialSpec, times) -> float:
    """Σ_j ‖A_j‖_{L^{a_j}_t L^{b_j}_x} by rectangle quadrature on ``times``."""
    times = np.asarray(times)
    dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
    total = 0.0
    for c in A.components:
        per = np.array([grid.lp_norm(c.g(t) * c.profile(grid), c.klass.b) for t in times])
        a = c.klass.a
        total += float(per.max()) if a.recip == 0 else float((dt * np.sum(per ** float(a.value))) ** float(a.recip))
    return total


@dataclass
class StabilityRow:
    delta: float
    perturbation_norm: float
    datum_distance: float
    linf_h1: float
    l4_w13: float

    @property
    def ratio(self) -> float:
        denom = self.perturbation_norm + self.datum_distance
        return self.linf_h1 / denom if denom > 0 else 0.0


@dataclass
class StabilityTable:
    rows: list

    def observed_order(self) -> float:
        pts = [(r.delta, r.linf_h1) for r in self.rows if r.delta > 0 and r.linf_h1 > 0]
        if len(pts) < 2:
            return float("nan")
        x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
        return float(np.polyfit(x, y, 1)[0])


def _difference_norms(grid: Grid, t1: Trajectory, t2: Trajectory, dt: float) -> tuple:
    if len(t1) != len(t2) or not np.allclose(t1.times, t2.times):
        raise ValueError("twin trajectories must share sampling instants")
    diffs = t1.states - t2.states
    linf = max(grid.sobolev_norm(d, 1) for d in diffs)
    w13 = np.array([grid.lp_norm(d, 3) + grid.lp_norm(grid.gradient(d), 3) for d in diffs])
    return linf, float((dt * np.sum(w13 ** 4)) ** 0.25)


def stability_experiment(grid: Grid, f1: np.ndarray, f2: np.ndarray, A: PotentialSpec, B: PotentialSpec,
                         deltas, T: float, config: SolverConfig) -> StabilityTable:
    """Twin solves (f1, A) and (f2, A + δB) for each δ; reports difference norms."""
    base = solve_global(grid, f1, T, A, config)
    if base.termination is not Termination.COMPLETED:
        raise SolverTermination(f"reference run ended with {base.termination.value}")
    dist = grid.sobolev_norm(np.asarray(f1) - np.asarray(f2), 1)
    rows = []
    for delta in deltas:
        pert = B.scaled(delta)
        twin = solve_global(grid, f2, T, A + pert, config)
        if twin.termination is not Termination.COMPLETED:
            raise SolverTermination(f"perturbed run (δ = {delta:g}) ended with {twin.termination.value}")
        linf, l4 = _difference_norms(grid, base, twin, config.step * config.sample_every)
        rows.append(StabilityRow(float(delta), class_norm(grid, pert, base.times), dist, linf, l4))
    return StabilityTable(rows)


__all__ = [
    "SolverConfig", "Trajectory", "Termination", "SlabStats", "SolverTermination", "ContractionFailed",
    "StepInstability", "apply_solution_map", "solve_slab_picard", "solve_strang", "linear_propagator",
    "solve_global", "critical_smallness", "CriticalCheck", "stability_experiment", "StabilityTable",
    "x43_norm", "class_norm", "strichartz_norm",
]
