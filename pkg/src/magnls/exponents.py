"""Exact rational bookkeeping for Lebesgue exponents.

An exponent p is stored through its reciprocal 1/p as a ``Fraction`` so that
p = inf is the ordinary value 0 and every predicate below is decided with
exact arithmetic.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


@dataclass(frozen=True, order=True)
class Exponent:
    """A Lebesgue index represented by ``recip == 1/p``."""

    recip: Fraction

    def __post_init__(self):
        r = self.recip if type(self.recip) is Fraction else Fraction(self.recip)
        if r.numerator < 0:
            raise ValueError(f"reciprocal exponent must be nonnegative, got {r}")
        object.__setattr__(self, "recip", r)

    @classmethod
    def of(cls, value) -> "Exponent":
        """Build from ``"inf"``, ``math.inf``, an int, a Fraction or a literal like ``"18/7"``."""
        if isinstance(value, Exponent):
            return value
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "oo", "∞"):
                return cls(ZERO)
            value = Fraction(text)
        elif isinstance(value, float):
            if math.isinf(value) and value > 0:
                return cls(ZERO)
            value = Fraction(value).limit_denominator(10**6)
        value = Fraction(value)
        if value <= 0:
            raise ValueError(f"exponent must be positive, got {value}")
        return cls(1 / value)

    @property
    def is_infinite(self) -> bool:
        return self.recip == 0

    @property
    def value(self):
        """The exponent itself: a Fraction, or ``math.inf``."""
        return math.inf if self.recip == 0 else 1 / self.recip

    def __float__(self) -> float:
        return float(self.value)

    def is_lebesgue(self) -> bool:
        return ZERO <= self.recip <= ONE

    def __str__(self) -> str:
        if self.recip == 0:
            return "inf"
        return str(1 / self.recip)

    def __repr__(self) -> str:
        return f"Exponent({self})"


INF = Exponent(ZERO)


def exponent(value) -> Exponent:
    return Exponent.of(value)


@dataclass(frozen=True)
class ExpPair:
    """A (time, space) exponent pair."""

    q: Exponent
    r: Exponent

    @classmethod
    def of(cls, q, r) -> "ExpPair":
        return cls(Exponent.of(q), Exponent.of(r))

    @classmethod
    def from_recips(cls, iq, ir) -> "ExpPair":
        return cls(Exponent(iq), Exponent(ir))

    def __iter__(self):
        return iter((self.q, self.r))

    def __str__(self) -> str:
        return f"({self.q}, {self.r})"


def pair(q, r) -> ExpPair:
    return ExpPair.of(q, r)


def star(ps: Iterable) -> Exponent:
    """Exponent whose reciprocal is the sum of the inputs' reciprocals (no clamping)."""
    items = [Exponent.of(p) for p in ps]
    if not items:
        raise ValueError("star needs at least one exponent")
    return Exponent(sum((p.recip for p in items), ZERO))


def holder_dual(p) -> Exponent:
    p = Exponent.of(p)
    if not p.is_lebesgue():
        raise ValueError(f"Hölder dual needs 1/p in [0,1], got 1/p = {p.recip}")
    return Exponent(ONE - p.recip)


class Admissibility(enum.Enum):
    ENDPOINT = "admissible-endpoint"
    NONENDPOINT = "admissible-nonendpoint"
    NOT_ADMISSIBLE = "not-admissible"

    def __bool__(self) -> bool:
        return self is not Admissibility.NOT_ADMISSIBLE


_THREE_HALVES = Fraction(3, 2)
_FIVE_HALVES = Fraction(5, 2)
_SEVEN_HALVES = Fraction(7, 2)
_TWO_THIRDS = Fraction(2, 3)


def _weighted(a: int, x: Fraction, b: int, y: Fraction, c: Fraction) -> int:
    """Sign of a*x + b*y - c, by integer cross-multiplication (hot path of the predicates)."""
    v = (a * x.numerator * y.denominator + b * y.numerator * x.denominator) * c.denominator \
        - c.numerator * x.denominator * y.denominator
    return (v > 0) - (v < 0)


def _cmp(x: Fraction, n: int, d: int) -> int:
    """Sign of x - n/d."""
    v = x.numerator * d - n * x.denominator
    return (v > 0) - (v < 0)


def is_admissible(p: ExpPair) -> Admissibility:
    iq, ir = p.q.recip, p.r.recip
    if _weighted(2, iq, 3, ir, _THREE_HALVES) != 0 or _cmp(ir, 1, 6) < 0 or _cmp(ir, 1, 2) > 0:
        return Admissibility.NOT_ADMISSIBLE
    if _cmp(ir, 1, 6) == 0:
        return Admissibility.ENDPOINT
    return Admissibility.NONENDPOINT


def is_dual_admissible(p: ExpPair) -> bool:
    i_s, i_p = p.q.recip, p.r.recip
    return _weighted(2, i_s, 3, i_p, _SEVEN_HALVES) == 0 and _cmp(i_p, 1, 2) >= 0 and _cmp(i_p, 5, 6) <= 0


def _require_admissible(qr: ExpPair) -> None:
    if not is_admissible(qr):
        raise ValueError(f"target pair {qr} is not admissible")


def is_qr_admissible(sp: ExpPair, qr: ExpPair) -> bool:
    _require_admissible(qr)
    i_s, i_p, ir = sp.q.recip, sp.r.recip, qr.r.recip
    if _weighted(2, i_s, 3, i_p, _SEVEN_HALVES) >= 0 or _cmp(i_p, 1, 2) < 0:
        return False
    if _cmp(ir, 1, 3) > 0:  # 2 <= r < 3
        return _cmp(i_p, 1, 1) <= 0
    return _weighted(1, i_p, -1, ir, _TWO_THIRDS) < 0


def is_grad_admissible(sp: ExpPair, qr: ExpPair) -> bool:
    _require_admissible(qr)
    i_s, i_p, ir = sp.q.recip, sp.r.recip, qr.r.recip
    return (_weighted(2, i_s, 3, i_p, _FIVE_HALVES) < 0 and _cmp(i_p, 1, 2) >= 0
            and _weighted(1, i_p, -1, ir, THIRD) < 0)


class GainKind(enum.Enum):
    INHOM = "inhom"
    GRAD = "grad"


X43 = ExpPair.from_recips(Fraction(1, 4), THIRD)


def theta_gain(sp: ExpPair, kind, qr: ExpPair = X43) -> Fraction:
    """Power of T gained by a retarded estimate with source exponents ``sp``.

    ``qr`` is the controlling admissible pair; it must be non-endpoint.
    """
    kind = GainKind(kind)
    if is_admissible(qr) is not Admissibility.NONENDPOINT:
        raise ValueError(f"controlling pair {qr} must be admissible and non-endpoint")
    if kind is GainKind.INHOM:
        if not is_qr_admissible(sp, qr):
            raise ValueError(f"{sp} is not {qr}-admissible")
        base = Fraction(7, 4)
    else:
        if not is_grad_admissible(sp, qr):
            raise ValueError(f"{sp} is not {qr}-grad-admissible")
        base = Fraction(5, 4)
    return base - sp.q.recip - Fraction(3, 2) * sp.r.recip


@dataclass(frozen=True)
class ComponentClass:
    a: Exponent
    b: Exponent
    has_gradient: bool = False
    has_time_derivative: bool = False

    @classmethod
    def of(cls, a, b, has_gradient=False, has_time_derivative=False) -> "ComponentClass":
        return cls(Exponent.of(a), Exponent.of(b), bool(has_gradient), bool(has_time_derivative))

    @property
    def weight(self) -> Fraction:
        return 2 * self.a.recip + 3 * self.b.recip


@dataclass(frozen=True)
class PotentialClassSpec:
    components: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) > 2:
            raise ValueError("a potential splits into at most two components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, *components: ComponentClass) -> "PotentialClassSpec":
        return cls(tuple(components))


class PotentialClass(enum.Enum):
    A1 = "in 𝒜₁"
    A2 = "in 𝒜₂"
    A1_TILDE = "in Ã₁"
    A2_TILDE = "in Ã₂"
    NONE = "none"


@dataclass(frozen=True)
class Classification:
    verdict: PotentialClass
    memberships: frozenset
    violations: dict = field(default_factory=dict)

    def __contains__(self, cls) -> bool:
        return cls in self.memberships


def _tilde1_violation(c: ComponentClass):
    if not c.a.recip < Fraction(1, 4):
        return "a_j ∈ (4,∞]"
    if not Fraction(1, 6) < c.b.recip < THIRD:
        return "b_j ∈ (3,6)"
    if not c.weight < 1:
        return "2/a_j + 3/b_j < 1"
    return None


def _tilde2_violation(c: ComponentClass):
    if not c.a.recip < HALF:
        return "a_j ∈ (2,∞]"
    if not c.b.recip < THIRD:
        return "b_j ∈ (3,∞]"
    if not c.weight < 1:
        return "2/a_j + 3/b_j < 1"
    if not c.has_gradient:
        return "∇A_j available"
    return None


def classify_potential(spec: PotentialClassSpec) -> Classification:
    """Decide membership in the four potential classes.

    The verdict is the most specific class found, in the order 𝒜₁, 𝒜₂, Ã₁, Ã₂.
    """
    comps = spec.components
    violations = {}
    members = set()
    for cls, check in ((PotentialClass.A1_TILDE, _tilde1_violation),
                       (PotentialClass.A2_TILDE, _tilde2_violation)):
        bad = [check(c) for c in comps]
        bad = [b for b in bad if b]
        if bad:
            violations[cls] = bad[0]
        else:
            members.add(cls)
    has_dt = all(c.has_time_derivative for c in comps)
    for tilde, full in ((PotentialClass.A1_TILDE, PotentialClass.A1),
                        (PotentialClass.A2_TILDE, PotentialClass.A2)):
        if tilde not in members:
            violations[full] = violations[tilde]
        elif not has_dt:
            violations[full] = "∂ₜA_j available (class ℛ)"
        else:
            members.add(full)
    verdict = PotentialClass.NONE
    for cls in (PotentialClass.A1, PotentialClass.A2,
                PotentialClass.A1_TILDE, PotentialClass.A2_TILDE):
        if cls in members:
            verdict = cls
            break
    return Classification(verdict, frozenset(members), violations)


def _as_fraction(x, name: str) -> Fraction:
    if isinstance(x, float):
        x = Fraction(x).limit_denominator(10**6)
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be rational, got {x!r}") from exc


def pair_for_power(gamma) -> ExpPair:
    g = _as_fraction(gamma, "gamma")
    if not 1 < g <= 5:
        raise ValueError(f"gamma ∈ (1,5] required, got {g}")
    return ExpPair.from_recips((g - 1) / (4 * (g + 1)), (g + 2) / (3 * (g + 1)))


def pair_for_hartree(alpha) -> ExpPair:
    a = _as_fraction(alpha, "alpha")
    if not 0 < a < 3:
        raise ValueError(f"alpha ∈ (0,3) required, got {a}")
    if a <= 2:
        return ExpPair.from_recips(ZERO, HALF)
    return ExpPair.from_recips((a - 2) / 6, (13 - 2 * a) / 18)


# --- witness search -------------------------------------------------------
#
# With x = 1/r in [1/3, 1/2] the admissible partner has 1/q = 3/4 - 3x/2, and
# the space index of the controlled norm is 1/rho = x or 1/rho = x - 1/3.
# Every constraint is affine in x, so the feasible set of each branch is an
# interval computed exactly.

BRANCH_LEBESGUE = "rho=r"
BRANCH_SOBOLEV = "rho=3r/(3-r)"
_BRANCH_SHIFT = {BRANCH_LEBESGUE: ZERO, BRANCH_SOBOLEV: THIRD}


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    lo_closed: bool
    hi: Fraction
    hi_closed: bool

    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def contains(self, x: Fraction) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def cut(self, slope: Fraction, offset: Fraction, strict: bool) -> "Interval":
        """Intersect with {x : slope*x + offset > 0} (or >= 0 when not strict)."""
        if slope == 0:
            if offset > 0 or (offset == 0 and not strict):
                return self
            return Interval(ONE, False, ZERO, False)
        root = -offset / slope
        if slope > 0:
            if root > self.lo:
                return Interval(root, not strict, self.hi, self.hi_closed)
            if root == self.lo:
                return Interval(self.lo, self.lo_closed and not strict, self.hi, self.hi_closed)
            return self
        if root < self.hi:
            return Interval(self.lo, self.lo_closed, root, not strict)
        if root == self.hi:
            return Interval(self.lo, self.lo_closed, self.hi, self.hi_closed and not strict)
        return self


@dataclass(frozen=True)
class Witness:
    sp: ExpPair
    qr: ExpPair
    rho: Exponent
    branch: str
    kind: GainKind
    theta: Fraction


class InfeasibleWitness(RuntimeError):
    pass


def _feasible_x(sum_ia: Fraction, sum_ib: Fraction, branch: str, kind: GainKind,
                target: ExpPair = X43) -> Interval:
    shift = _BRANCH_SHIFT[branch]
    ir_t = target.r.recip
    # 1/s = sum_ia + 3/4 - 3x/2 ; 1/p = sum_ib + x - shift
    s_off, s_slope = sum_ia + Fraction(3, 4), Fraction(-3, 2)
    p_off, p_slope = sum_ib - shift, ONE
    iv = Interval(THIRD, True, HALF, True)
    if shift:
        iv = iv.cut(ONE, -THIRD, strict=False)  # 1/rho >= 0
    # Lebesgue range of the source pair: 0 <= 1/s <= 1, 0 <= 1/p <= 1
    iv = iv.cut(s_slope, s_off, strict=False)
    iv = iv.cut(-s_slope, ONE - s_off, strict=False)
    iv = iv.cut(-p_slope, ONE - p_off, strict=False)
    lin_slope = 2 * s_slope + 3 * p_slope
    lin_off = 2 * s_off + 3 * p_off
    iv = iv.cut(p_slope, p_off - HALF, strict=False)  # 1/p >= 1/2
    if kind is GainKind.GRAD:
        iv = iv.cut(-lin_slope, Fraction(5, 2) - lin_off, strict=True)
        iv = iv.cut(-p_slope, ir_t + THIRD - p_off, strict=True)
    else:
        iv = iv.cut(-lin_slope, Fraction(7, 2) - lin_off, strict=True)
        if ir_t > THIRD:
            iv = iv.cut(-p_slope, ONE - p_off, strict=False)
        else:
            iv = iv.cut(-p_slope, ir_t + Fraction(2, 3) - p_off, strict=True)
    return iv


def witness_regions(factors: Sequence[tuple], kind="grad", target: ExpPair = X43) -> dict:
    """Exact feasible sets in x = 1/r, per branch, for a product of potential factors.

    ``factors`` is a sequence of (a, b) exponents; the product with (q, rho)
    is the source pair (s, p).
    """
    kind = GainKind(kind)
    sum_ia = sum((Exponent.of(a).recip for a, _ in factors), ZERO)
    sum_ib = sum((Exponent.of(b).recip for _, b in factors), ZERO)
    return {br: _feasible_x(sum_ia, sum_ib, br, kind, target) for br in _BRANCH_SHIFT}


def _pick(iv: Interval) -> Fraction:
    # 1/s decreases in x, so prefer the largest feasible x.
    if iv.hi_closed:
        return iv.hi
    if iv.lo_closed and iv.lo == iv.hi:
        return iv.lo
    return (iv.lo + iv.hi) / 2


def search_witness(factors: Sequence[tuple], kind="grad", target: ExpPair = X43) -> Witness:
    kind = GainKind(kind)
    sum_ia = sum((Exponent.of(a).recip for a, _ in factors), ZERO)
    sum_ib = sum((Exponent.of(b).recip for _, b in factors), ZERO)
    best = None
    for branch, iv in witness_regions(factors, kind, target).items():
        if iv.is_empty():
            continue
        x = _pick(iv)
        shift = _BRANCH_SHIFT[branch]
        sp = ExpPair.from_recips(sum_ia + Fraction(3, 4) - Fraction(3, 2) * x, sum_ib + x - shift)
        key = (sp.q.recip, sp.r.recip)
        if best is None or key < best[0]:
            best = (key, sp, x, branch)
    if best is None:
        raise InfeasibleWitness(f"no witness for factors {list(factors)} ({kind.value})")
    _, sp, x, branch = best
    qr = ExpPair.from_recips(Fraction(3, 4) - Fraction(3, 2) * x, x)
    rho = Exponent(x - _BRANCH_SHIFT[branch])
    return Witness(sp, qr, rho, branch, kind, theta_gain(sp, kind, target))


def find_grad_witness(a, b) -> ExpPair:
    """Source pair bounding A·∇u in the dual of the X^(4,3) Strichartz space."""
    a, b = Exponent.of(a), Exponent.of(b)
    if not (2 * a.recip + 3 * b.recip < 1 and b.recip < THIRD):
        raise ValueError(f"(a,b) = ({a},{b}) must satisfy 2/a + 3/b < 1 and b > 3")
    return search_witness([(a, b)], GainKind.GRAD).sp


def magnetic_theta(spec: PotentialClassSpec) -> Fraction:
    """Smallest T-power gained by the magnetic terms of the linear Duhamel map.

    The first-order term A_j·∇u uses a gradient witness per component; the
    quadratic term A_i·A_j u uses the gradient (Sobolev-embedded) witness in
    Ã₁ and the inhomogeneous witness in Ã₂.
    """
    verdict = classify_potential(spec)
    if PotentialClass.A1_TILDE in verdict:
        sq_kind = GainKind.GRAD
    elif PotentialClass.A2_TILDE in verdict:
        sq_kind = GainKind.INHOM
    else:
        raise ValueError("potential lies in no admissible class")
    comps = spec.components
    thetas = [search_witness([(c.a, c.b)], GainKind.GRAD).theta for c in comps]
    for i, ci in enumerate(comps):
        for cj in comps[i:]:
            thetas.append(search_witness([(ci.a, ci.b), (cj.a, cj.b)], sq_kind).theta)
    return min(thetas)
