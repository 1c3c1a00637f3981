"""TOML run configuration: parsing, defaults and range validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import tomli

from .exponents import ComponentClass, Exponent, PotentialClass, PotentialClassSpec, classify_potential
from .grid import Grid
from .magnetic import Component, PotentialSpec
from .nonlinear import NonlinearitySpec
from .scenarios import gaussian_datum, random_smooth_field
from .solver import SolverConfig

EXPERIMENTS = ("run", "sweep-eps", "stability", "check-pairs", "classify-potential", "report")

CLAIMS = {
    "A1": PotentialClass.A1, "A2": PotentialClass.A2,
    "A1_tilde": PotentialClass.A1_TILDE, "A2_tilde": PotentialClass.A2_TILDE,
}


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "grid": {"dim": 1, "n": 128, "length": 32.0},
    "potential": {"kind": "smooth", "amplitude": 0.5, "width": 3.0, "sigma": 0.5, "mollifier": None,
                  "mod_amplitude": 0.0, "mod_frequency": 0.0, "class": None},
    "nonlinearity": {"gamma": "3", "alpha": "1", "lambda1": 1.0, "lambda2": 1.0},
    "solver": {"epsilon": 0.1, "scheme": "picard", "slab_length": 1 / 32, "substeps": 16, "dt": 1 / 512,
               "picard_tol": 1e-10, "picard_max_iter": 50, "max_halvings": 20, "h1_blowup_threshold": 1e3,
               "l6l18_threshold": 1e3, "eta0": 1e-2, "sample_every": 1},
    "datum": {"kind": "gaussian", "amplitude": 1.0, "width": 2.0, "center": 0.0, "mode": 12, "max_mode": 4},
    "experiment": {"kind": "run", "T": 1.0, "epsilons": [0.2, 0.1, 0.05, 0.025],
                   "deltas": [0.04, 0.02, 0.01, 0.005], "bump": 0.0, "perturbation": None,
                   "snapshots": 5, "pairs": [], "decay": None},
}
_TOP = {"output": "out", "seed": 0}
_CLASS_KEYS = {"claim", "components"}
_COMPONENT_KEYS = {"a", "b", "gradient", "time_derivative"}
_PERTURBATION_KEYS = {"kind", "amplitude", "width", "sigma", "mollifier", "mod_amplitude", "mod_frequency"}
_DECAY_KEYS = {"p", "r", "eps", "gradient"}


@dataclass(frozen=True)
class DatumSpec:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 2.0
    center: float = 0.0
    mode: int = 12
    max_mode: int = 4

    def build(self, grid: Grid, seed: int = 0) -> np.ndarray:
        if self.kind == "gaussian":
            return gaussian_datum(grid, self.amplitude, self.width, self.center, self.mode)
        if self.kind == "plane_wave":
            return grid.plane_wave(self.mode, self.amplitude)
        if self.kind == "random":
            return random_smooth_field(grid, np.random.default_rng(seed), self.max_mode, self.amplitude)
        return np.zeros(grid.shape, dtype=complex)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str = "run"
    T: float = 1.0
    epsilons: tuple = (0.2, 0.1, 0.05, 0.025)
    deltas: tuple = (0.04, 0.02, 0.01, 0.005)
    bump: float = 0.0
    perturbation: PotentialSpec | None = None
    snapshots: int = 5
    pairs: tuple = ()
    decay: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    potential: PotentialSpec
    class_spec: PotentialClassSpec
    nonlinearity: NonlinearitySpec
    solver: SolverConfig
    datum: DatumSpec
    experiment: ExperimentSpec
    output: str
    seed: int
    effective: dict = field(default_factory=dict, compare=False)


def _merge(section: str, given, defaults: dict, allowed=None) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"[{section}] must be a table")
    allowed = set(defaults) if allowed is None else allowed
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")
    out = dict(defaults)
    out.update(given)
    return out


def _num(section: str, key: str, value, kind=float):
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if isinstance(value, bool):
            raise TypeError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key} must be {'an integer' if kind is int else 'a number'}, got {value!r}")


def _rational(section: str, key: str, value) -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(value).limit_denominator(10**6)
        return Fraction(str(value))
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{section}.{key} must be a rational literal, got {value!r}")


def _exponent(section: str, value) -> Exponent:
    try:
        if isinstance(value, bool):
            raise TypeError
        return Exponent.of(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{section}: invalid exponent {value!r}")


def _component(section: str, d: dict, **extra) -> Component:
    kind = d.get("kind", "smooth")
    try:
        return Component(
            kind=kind,
            amplitude=_num(section, "amplitude", d.get("amplitude", 0.5)),
            width=_num(section, "width", d.get("width", 3.0)),
            sigma=_num(section, "sigma", d.get("sigma", 0.5)),
            mollifier=None if d.get("mollifier") is None else _num(section, "mollifier", d["mollifier"]),
            mod_amplitude=_num(section, "mod_amplitude", d.get("mod_amplitude", 0.0)),
            mod_frequency=_num(section, "mod_frequency", d.get("mod_frequency", 0.0)),
            **extra,
        )
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _class_block(raw) -> tuple:
    if raw is None:
        return None, None
    block = _merge("potential.class", raw, {"claim": None, "components": None}, _CLASS_KEYS)
    claim = block["claim"]
    if claim is not None:
        if claim not in CLAIMS:
            raise ConfigError(f"potential.class.claim must be one of {', '.join(CLAIMS)}, got {claim!r}")
        claim = CLAIMS[claim]
    comps = block["components"]
    classes = None
    if comps is not None:
        if not isinstance(comps, list) or not 1 <= len(comps) <= 2:
            raise ConfigError("potential.class.components must list one or two components (A = A₁ + A₂)")
        classes = []
        for i, c in enumerate(comps):
            c = _merge(f"potential.class.components[{i}]", c,
                       {"a": "inf", "b": "inf", "gradient": False, "time_derivative": False}, _COMPONENT_KEYS)
            a, b = _exponent("potential.class", c["a"]), _exponent("potential.class", c["b"])
            classes.append(ComponentClass(a, b, bool(c["gradient"]), bool(c["time_derivative"])))
    return claim, classes


def _check_grid(d: dict) -> Grid:
    dim = _num("grid", "dim", d["dim"], int)
    n = _num("grid", "n", d["n"], int)
    length = _num("grid", "length", d["length"])
    if dim not in (1, 2, 3):
        raise ConfigError("grid.dim ∈ {1,2,3}")
    if n < 8 or n & (n - 1):
        raise ConfigError("grid.n must be a power of two ≥ 8")
    if not length > 0:
        raise ConfigError("grid.length > 0")
    return Grid(dim, n, length)


def _check_nonlinearity(d: dict) -> NonlinearitySpec:
    gamma = _rational("nonlinearity", "gamma", d["gamma"])
    alpha = _rational("nonlinearity", "alpha", d["alpha"])
    l1 = _num("nonlinearity", "lambda1", d["lambda1"])
    l2 = _num("nonlinearity", "lambda2", d["lambda2"])
    if not 1 < gamma <= 5:
        raise ConfigError(f"nonlinearity.gamma = {gamma} violates gamma ∈ (1,5]")
    if not 0 < alpha < 3:
        raise ConfigError(f"nonlinearity.alpha = {alpha} violates alpha ∈ (0,3)")
    if l1 < 0 or l2 < 0:
        raise ConfigError("defocusing couplings required: lambda1 ≥ 0 and lambda2 ≥ 0")
    return NonlinearitySpec(gamma, alpha, l1, l2)


def _check_solver(d: dict, nl: NonlinearitySpec) -> SolverConfig:
    eps = _num("solver", "epsilon", d["epsilon"])
    if not eps > 0:
        raise ConfigError(f"solver.epsilon = {eps} violates epsilon > 0")
    if d["scheme"] not in ("picard", "strang"):
        raise ConfigError("solver.scheme ∈ {picard, strang}")
    ints = {k: _num("solver", k, d[k], int) for k in ("substeps", "picard_max_iter", "max_halvings", "sample_every")}
    floats = {k: _num("solver", k, d[k]) for k in ("slab_length", "dt", "picard_tol", "h1_blowup_threshold",
                                                    "l6l18_threshold", "eta0")}
    for k, v in floats.items():
        if not v > 0:
            raise ConfigError(f"solver.{k} > 0")
    for k, v in ints.items():
        if v < (0 if k == "max_halvings" else 1):
            raise ConfigError(f"solver.{k} must be a positive integer")
    return SolverConfig(epsilon=eps, nonlinearity=nl, scheme=d["scheme"], **ints, **floats)


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    unknown = sorted(set(raw) - set(_SECTIONS) - set(_TOP))
    if unknown:
        allowed = ", ".join(sorted(set(_SECTIONS) | set(_TOP)))
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}; allowed: {allowed}")
    sec = {name: _merge(name, raw.get(name), defaults) for name, defaults in _SECTIONS.items()}

    grid = _check_grid(sec["grid"])
    nl = _check_nonlinearity(sec["nonlinearity"])
    solver = _check_solver(sec["solver"], nl)

    pot = sec["potential"]
    claim, classes = _class_block(pot.get("class"))
    kind = pot["kind"]
    if kind not in ("zero", "smooth", "power"):
        raise ConfigError(f"potential.kind must be zero, smooth or power, got {kind!r}")
    exp_kind = sec["experiment"]["kind"]
    if exp_kind not in EXPERIMENTS:
        raise ConfigError(f"experiment.kind must be one of {', '.join(EXPERIMENTS)}")
    if classes is not None and len(classes) > 1 and exp_kind != "classify-potential":
        raise ConfigError("simulated catalog potentials carry exactly one class component")
    if kind == "power" and grid.dim == 1:
        raise ConfigError("potential.kind = power needs grid.dim ≥ 2")
    pot_dict = {k: v for k, v in pot.items() if k != "class"}
    comp = _component("potential", pot_dict, **({"klass": classes[0]} if classes else {}))
    class_spec = PotentialClassSpec(tuple(classes)) if classes else PotentialClassSpec((comp.klass,))
    if claim is not None:
        verdict = classify_potential(class_spec)
        if claim not in verdict:
            raise ConfigError(f"potential claims {claim.value} but violates {verdict.violations[claim]}")
    potential = PotentialSpec(() if kind == "zero" else (comp,))

    d = sec["datum"]
    if d["kind"] not in ("gaussian", "plane_wave", "random", "zero"):
        raise ConfigError("datum.kind ∈ {gaussian, plane_wave, random, zero}")
    datum = DatumSpec(d["kind"], _num("datum", "amplitude", d["amplitude"]), _num("datum", "width", d["width"]),
                      _num("datum", "center", d["center"]), _num("datum", "mode", d["mode"], int),
                      _num("datum", "max_mode", d["max_mode"], int))
    if not datum.width > 0:
        raise ConfigError("datum.width > 0")

    e = sec["experiment"]
    T = _num("experiment", "T", e["T"])
    if not T > 0:
        raise ConfigError("experiment.T > 0")
    eps = tuple(_num("experiment", "epsilons", x) for x in e["epsilons"])
    if not eps or any(x <= 0 for x in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("experiment.epsilons must be positive and strictly decreasing")
    deltas = tuple(_num("experiment", "deltas", x) for x in e["deltas"])
    if any(x < 0 for x in deltas):
        raise ConfigError("experiment.deltas must be nonnegative")
    pert = None
    if e["perturbation"] is not None:
        p = _merge("experiment.perturbation", e["perturbation"], {}, _PERTURBATION_KEYS)
        if p.get("kind", "smooth") == "power" and grid.dim == 1:
            raise ConfigError("experiment.perturbation.kind = power needs grid.dim ≥ 2")
        pert = PotentialSpec((_component("experiment.perturbation", p),))
    pairs = []
    for item in e["pairs"]:
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError("experiment.pairs entries must be [q, r]")
        pairs.append(tuple(str(x) for x in item))
    decay = []
    for i, item in enumerate(e["decay"] or []):
        item = _merge(f"experiment.decay[{i}]", item, {"p": 1, "r": "inf", "eps": 0.0, "gradient": False}, _DECAY_KEYS)
        decay.append((str(item["p"]), str(item["r"]), _num("experiment.decay", "eps", item["eps"]),
                      bool(item["gradient"])))
    experiment = ExperimentSpec(exp_kind, T, eps, deltas, _num("experiment", "bump", e["bump"]), pert,
                                _num("experiment", "snapshots", e["snapshots"], int), tuple(pairs), tuple(decay))

    output = raw.get("output", _TOP["output"])
    if not isinstance(output, str) or not output:
        raise ConfigError("output must be a nonempty string")
    seed = _num("seed", "seed", raw.get("seed", _TOP["seed"]), int)

    effective = {name: _jsonable(v) for name, v in sec.items()}
    effective["potential"]["class"] = {
        "claim": None if claim is None else claim.name,
        "components": [{"a": str(c.a), "b": str(c.b), "gradient": c.has_gradient,
                        "time_derivative": c.has_time_derivative} for c in class_spec.components],
    }
    effective["output"] = output
    effective["seed"] = seed
    return RunConfig(grid, potential, class_spec, nl, solver, datum, experiment, output, seed, effective)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def load_config(path) -> RunConfig:
    from pathlib import Path

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


__all__ = ["ConfigError", "RunConfig", "DatumSpec", "ExperimentSpec", "parse_config", "load_config", "EXPERIMENTS"]
