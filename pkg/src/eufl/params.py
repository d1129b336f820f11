"""Global constants of the algorithm and the executable parameter conditions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import mpmath
from scipy.optimize import bisect

from .core import InputError


def compute_phi_r(r_cone: float) -> float:
    """Smallest angle phi with 1 + x^2 + 2x cos(phi) <= (1 + (1-r)x)^2 on [0, 2].

    The right-hand slack is decreasing in x, so x = 2 binds and
    cos(phi) = 1 - 3r + r^2.  Written through the half-angle to stay
    accurate for tiny r.
    """
    if not (0.0 < r_cone < 1.0):
        raise InputError(f"r_cone must lie in (0, 1), got {r_cone}")
    return 2.0 * math.asin(math.sqrt((3.0 * r_cone - r_cone * r_cone) / 2.0))


def gamma0_equation(g: float, eps5: float) -> float:
    return 1 / math.e + math.exp(-g) - (g - 1) * (1 - 1 / math.e + (1 - eps5) * math.exp(-g))


def solve_gamma0(eps5: float = 0.0) -> float:
    return bisect(gamma0_equation, 1.0, 2.0, args=(eps5,), xtol=1e-12)


@dataclass(frozen=True)
class ParamSet:
    K1: float = 1.3025
    K2: float = 1.3024
    K3: float = 1.3023
    K4: float = 1.3022
    K5: float = 1.3021
    K6: float = 1.302
    gamma: float = 1.6774
    alpha: float = 5e-4
    M_cap: float = 5e6
    r_cone: float = 1e-8
    L_interval: int = 200_000_000
    eps1: float = 1e-12
    eps2: float = 5e-18
    eps3: float = 3e-32
    eps4: float = 2e-36
    eps5: float = 2e-41
    eps6: float = 3e-42
    eps7: float = 2e-42
    eps8: float = 2e-45
    delta: float = 3e-23
    delta_prime: float = 7e-32
    lp_tol: float = 1e-9
    cmp_tol: float = 1e-12
    # JMS mass of the unifactor mixture; forced equal to kappa by normalisation
    kappa2: float = 0.195583
    # geometric lemmas are stated on the analysis range, gamma is sampled on the other
    analysis_range: tuple = (1.6, 2.0)
    sampling_range: tuple = (1.0, 2.016569)
    phi_r: float = field(init=False)
    gamma0: float = field(init=False)

    def __post_init__(self):
        Ks = [self.K1, self.K2, self.K3, self.K4, self.K5, self.K6]
        if any(a <= b for a, b in zip(Ks, Ks[1:])):
            raise InputError("K constants must be strictly decreasing")
        eps = [self.eps1, self.eps2, self.eps3, self.eps4, self.eps5, self.eps6]
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise InputError("eps1..eps6 must be strictly decreasing")
        if self.eps7 > self.eps5:
            raise InputError("eps7 must not exceed eps5")
        if not math.isclose(self.eps8, self.eps7 / 1000, rel_tol=1e-12):
            raise InputError("eps8 must equal eps7/1000")
        if not (1.0 <= self.gamma < 2.0 + 1e-9) and not (self.sampling_range[0] <= self.gamma <= self.sampling_range[1]):
            raise InputError(f"gamma {self.gamma} outside the sampling range")
        object.__setattr__(self, "phi_r", compute_phi_r(self.r_cone))
        object.__setattr__(self, "gamma0", solve_gamma0(self.eps5))

    @property
    def theta(self) -> float:
        return theta_of(self.gamma, self.K6)

    def with_gamma(self, gamma: float) -> "ParamSet":
        return replace(self, gamma=gamma)


def theta_of(gamma: float, K6: float = 1.302) -> float:
    return (K6 + 1 - gamma) / (2 * K6 + 2 - gamma)


PAPER = ParamSet()

# Coarse constants for numeric experiments where the published ones vanish
# below double precision.  (1 + delta')^(2L) <= 1 + delta still holds.
INFLATED = ParamSet(
    eps1=4e-3, eps2=2e-3, eps3=1e-3, eps4=5e-4, eps5=2.5e-4, eps6=1e-4,
    eps7=1e-4, eps8=1e-7, delta=1e-2, delta_prime=2e-3, L_interval=2,
)


# -- parameter conditions ---------------------------------------------------

@dataclass
class ConditionResult:
    index: int
    name: str
    passed: bool
    worst_margin: float          # relative margin, negative means violated
    worst_gamma: float
    detail: str = ""


@dataclass
class ConditionReport:
    results: list
    grid: list

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def to_tsv(self) -> str:
        rows = ["condition\tname\tpass\tworst_rel_margin\tworst_gamma\tdetail"]
        for r in self.results:
            rows.append(f"{r.index}\t{r.name}\t{int(r.passed)}\t{r.worst_margin:.6e}\t{r.worst_gamma:.6f}\t{r.detail}")
        return "\n".join(rows) + "\n"


def _mp(x) -> mpmath.mpf:
    # decimal string keeps published constants like 2e-45 exact to working precision
    return mpmath.mpf(repr(float(x))) if not isinstance(x, mpmath.mpf) else x


def _rel(lhs, rhs, strict: bool):
    """Relative margin of lhs <= rhs (or lhs < rhs) and whether it holds."""
    scale = max(abs(lhs), abs(rhs), mpmath.mpf("1e-300"))
    m = (rhs - lhs) / scale
    ok = m > 0 if strict else m >= mpmath.mpf("-1e-45")
    return m, ok


def _conditions(p: ParamSet, g, literal: bool):
    """Yield (index, name, [(lhs, rhs, strict, label), ...]) at one gamma."""
    K1, K2, K3, K4, K5, K6 = (_mp(k) for k in (p.K1, p.K2, p.K3, p.K4, p.K5, p.K6))
    e1, e2, e3, e4, e5, e6, e7, e8 = (_mp(e) for e in (p.eps1, p.eps2, p.eps3, p.eps4, p.eps5, p.eps6, p.eps7, p.eps8))
    dl, dp = _mp(p.delta), _mp(p.delta_prime)
    al, M, r, L = _mp(p.alpha), _mp(p.M_cap), _mp(p.r_cone), _mp(p.L_interval)
    th = (K6 + 1 - g) / (2 * K6 + 2 - g)
    phi = 2 * mpmath.asin(mpmath.sqrt((3 * r - r * r) / 2))
    # gamma0 at working precision
    g0 = mpmath.findroot(lambda x: 1 / mpmath.e + mpmath.exp(-x) - (x - 1) * (1 - 1 / mpmath.e + (1 - e5) * mpmath.exp(-x)), _mp(p.gamma0))

    # The printed factor 0.9995 contradicts the proof it summarises, which
    # needs 0.995; literal=True evaluates the printed text.
    shrink = mpmath.mpf("0.9995") if literal else mpmath.mpf("0.995")
    yield 1, "big-remote-arm", [(2 * mpmath.mpf("0.998") * mpmath.sin(al), (1 - shrink) * mpmath.mpf("0.2319"), False, "")]
    yield 2, "reroute-vector", [((e1 + dl) / th, mpmath.mpf(1) / 100, False, "")]
    yield 3, "cone-probability", [(1 / (mpmath.mpf("0.98") * th * r) * (dl + e1 / 2) / (1 + dl), mpmath.mpf("0.00099") * th / (1 - th), True, "")]
    m_need = (1 + 1 / mpmath.sin(al - phi)) * mpmath.log((1 - th) / (mpmath.mpf("0.99") * th)) / mpmath.log(mpmath.mpf("1.001"))
    yield 4, "small-remote-arm-count", [
        (1 + 4 + 4 * mpmath.cos(phi), (3 - 2 * r) ** 2, False, "phi"),
        (phi, al, True, "alpha>phi"),
        (2 * phi, mpmath.mpf(1) / 100, True, "2phi"),
        (2 * (1 + dl) * mpmath.sin(al), mpmath.mpf("0.98") * th, False, "sin"),
        (m_need, M, False, "M"),
    ]
    yield 5, "saving-expansion", [
        (mpmath.mpf(36) / 25 * (1 + dl), (3 - e1) / (2 * (1 + dl)), False, ""),
        (72 * dl + 25 * e1, mpmath.mpf(1), False, ""),
    ]
    Kp = (2 * K5 + 2 - g) / (K5 - K6) * K5 / (K5 - g + 1)
    yield 6, "good-on-average", [((dl + e2) * Kp * max(125 * M * (1 + dl) / 2, 1 / (e1 - e2)), mpmath.mpf(1), False, "")]
    yield 7, "homogeneous", [((dl + e3) * (2 - g + 2 * K4) / K4, (e2 - e3) * (K5 - g + 1) * (K4 - K5) / (K4 * K5), False, "")]
    # eps4 is printed as an equality; any smaller eps4 keeps the lemma true
    yield 8, "interval-blocks", [
        ((1 + dp) ** (2 * L), 1 + dl, False, "block"),
        (e4, (1 - K4 / K3) * min(e3, 2 * dp / (1 + dp)), False, "eps4"),
    ]
    a = K2 / ((K2 - K3) * L)
    lhs9 = (1 - a - (K2 - K3) / K2) * (1 - (K2 / K1) / (1 - a))
    yield 9, "reward", [(mpmath.mpf("1e-5"), lhs9, False, "")]
    yield 10, "conn-clustering", [(e5, e4 / mpmath.mpf(10) ** 5, False, "")]
    yield 11, "bifactor", [(e6, e5 / mpmath.exp(g0), False, "")]
    yield 12, "char-function", [(e7, (K1 - g + 1) / (2 * K1 - g + 2) * e5, False, "")]
    yield 13, "mixture", [(e8, e7 / 1000, False, "")]


def default_gamma_grid() -> list:
    return [round(1.601 + 0.001 * k, 3) for k in range(399)]


def validate_parameters(params: ParamSet, gamma_grid=None, literal: bool = False) -> ConditionReport:
    """Evaluate all thirteen parameter conditions at each grid gamma (50 digits)."""
    grid = default_gamma_grid() if gamma_grid is None else list(gamma_grid)
    lo, hi = params.analysis_range
    for g in grid:
        if not (lo < g < hi):
            raise InputError(f"grid gamma {g} outside ({lo}, {hi})")
    best: dict = {}
    with mpmath.workdps(50):
        for g in grid:
            for idx, name, ineqs in _conditions(params, _mp(g), literal):
                for lhs, rhs, strict, label in ineqs:
                    m, ok = _rel(lhs, rhs, strict)
                    cur = best.get(idx)
                    if cur is None:
                        cur = best[idx] = ConditionResult(idx, name, True, float("inf"), g)
                    if not ok and cur.passed:
                        cur.detail = f"first failure at gamma={g} ({label or 'main'})"
                    cur.passed = cur.passed and bool(ok)
                    if float(m) < cur.worst_margin:
                        cur.worst_margin = float(m)
                        cur.worst_gamma = g
    return ConditionReport([best[k] for k in sorted(best)], grid)
