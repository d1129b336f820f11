"""Characteristic-function zero-sum game for the unifactor ratio.

The adversary picks a step function h on (0, 1]; the algorithm picks a mixture
of JMS (mass kappa) and LP rounding at random gamma.  Values here are the
expected cost ratios of both branches for a given strategy pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .core import InputError

GAMMA1 = 1.479311
GAMMA2 = 2.016569
THETA_LI = 0.503357
KAPPA_LI = 0.195583

JMS_F = 1.11
JMS_C = 1.7764
BAND = (1.6, 2.0)          # gammas that get the Euclidean improvement


@dataclass(frozen=True)
class CharacteristicFunction:
    """Right-continuous-from-the-left step function on (0, 1].

    h(p) = values[k] for breaks[k-1] < p <= breaks[k] (breaks[-1] = 1, and the
    implicit left end is 0).
    """

    breaks: tuple
    values: tuple
    q: float | None = None

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if len(b) == 0 or len(b) != len(v):
            raise InputError("breaks and values must be nonempty and of equal length")
        if abs(b[-1] - 1.0) > 1e-12 or b[0] <= 0 or np.any(np.diff(b) <= 0):
            raise InputError("breaks must increase strictly inside (0, 1] and end at 1")
        if np.any(v < 0) or np.any(np.diff(v) < -1e-12):
            raise InputError("h must be nonnegative and nondecreasing")
        object.__setattr__(self, "breaks", tuple(float(x) for x in b))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def threshold(cls, q: float) -> "CharacteristicFunction":
        """h_q: 0 on (0, q], 1/(1-q) on (q, 1]."""
        if not 0 <= q < 1:
            raise InputError(f"threshold q must lie in [0, 1), got {q}")
        if q == 0:
            return cls((1.0,), (1.0,), 0.0)
        return cls((q, 1.0), (0.0, 1.0 / (1 - q)), float(q))

    @classmethod
    def constant(cls) -> "CharacteristicFunction":
        return cls.threshold(0.0)

    @property
    def lefts(self) -> np.ndarray:
        return np.concatenate([[0.0], self.breaks[:-1]])

    def __call__(self, p: float) -> float:
        if not 0 < p <= 1 + 1e-15:
            raise InputError(f"h is defined on (0, 1], got p={p}")
        k = int(np.searchsorted(self.breaks, p, side="left"))
        return self.values[min(k, len(self.values) - 1)]

    @property
    def integral(self) -> float:
        return float(np.dot(self.values, np.diff(np.concatenate([[0.0], self.breaks]))))

    def normalized(self) -> "CharacteristicFunction":
        tot = self.integral
        if tot <= 0:
            raise InputError("h integrates to zero and cannot be normalized")
        return CharacteristicFunction(self.breaks, tuple(v / tot for v in self.values), self.q)


def h_empirical(aug, dec=None) -> CharacteristicFunction:
    """Sum over clients of the distance profile of each client's support."""
    pts = {1.0}
    per_client = []
    d = aug.dist
    for j in range(aug.nc):
        ks = np.flatnonzero(aug.support[:, j])
        ks = ks[np.lexsort((ks, d[ks, j]))]
        cum = np.cumsum(aug.share[ks])
        cum /= cum[-1]
        cum[-1] = 1.0
        per_client.append((cum, d[ks, j]))
        pts.update(float(c) for c in cum if c > 1e-12)
    grid = np.array(sorted(pts))
    keep = [grid[0]]
    for g in grid[1:]:
        if g - keep[-1] > 1e-12:
            keep.append(g)
    keep[-1] = 1.0
    grid = np.array(keep)
    mids = (np.concatenate([[0.0], grid[:-1]]) + grid) / 2
    vals = np.zeros(len(grid))
    for cum, dist in per_client:
        idx = np.minimum(np.searchsorted(cum, mids, side="left"), len(dist) - 1)
        vals += dist[idx]
    # merge equal neighbouring steps
    b, v = [grid[0]], [vals[0]]
    for g, x in zip(grid[1:], vals[1:]):
        if abs(x - v[-1]) <= 1e-15 * max(1.0, abs(x)):
            b[-1] = g
        else:
            b.append(g)
            v.append(x)
    return CharacteristicFunction(tuple(b), tuple(v)).normalized()


def _check_gamma(gamma: float):
    if gamma < 1:
        raise InputError(f"gamma must be at least 1, got {gamma}")


def alpha_of(gamma: float, h: CharacteristicFunction) -> float:
    """Connection-cost kernel of rounding at gamma against profile h.

    gamma = 1 is accepted because the mixture used by the unifactor driver
    puts an atom there.
    """
    _check_gamma(gamma)
    lefts = h.lefts
    rights = np.asarray(h.breaks)
    body = float(np.dot(h.values, np.exp(-gamma * lefts) - np.exp(-gamma * rights)))
    return body + math.exp(-gamma) * (gamma + (3 - gamma) * h(1.0 / gamma))


def alpha_prime_of(gamma: float, h: CharacteristicFunction, eps7: float) -> float:
    a = alpha_of(gamma, h)
    if BAND[0] < gamma < BAND[1]:
        a -= eps7 * gamma * math.exp(-gamma)
    return a


@dataclass(frozen=True)
class GammaDistribution:
    kappa: float
    atoms: tuple = ()            # (gamma, mass)
    pieces: tuple = ()           # (lo, hi, mass), uniform on (lo, hi)

    def __post_init__(self):
        if not 0 <= self.kappa <= 1:
            raise InputError(f"kappa must lie in [0, 1], got {self.kappa}")
        tot = self.kappa + sum(m for _, m in self.atoms) + sum(m for _, _, m in self.pieces)
        if abs(tot - 1) > 1e-12:
            raise InputError(f"masses sum to {tot!r}, not 1")
        for g, m in self.atoms:
            if g < 1 or m < 0:
                raise InputError(f"bad atom ({g}, {m})")
        for lo, hi, m in self.pieces:
            if lo < 1 or hi <= lo or m < 0:
                raise InputError(f"bad piece ({lo}, {hi}, {m})")

    @classmethod
    def mu1(cls) -> "GammaDistribution":
        return cls(KAPPA_LI, ((GAMMA1, THETA_LI),), ((GAMMA1, GAMMA2, 1 - KAPPA_LI - THETA_LI),))

    @classmethod
    def mu2(cls, eps7: float, kappa2: float = KAPPA_LI) -> "GammaDistribution":
        """(1-eps7) mu1 plus an atom of mass eps7 (1-kappa2) at gamma = 1.

        The masses only sum to one when kappa2 equals mu1's kappa.
        """
        if not 0 <= eps7 < 1:
            raise InputError(f"eps7 must lie in [0, 1), got {eps7}")
        s = 1 - eps7
        return cls(kappa2, ((GAMMA1, s * THETA_LI), (1.0, eps7 * (1 - kappa2))),
                   ((GAMMA1, GAMMA2, s * (1 - KAPPA_LI - THETA_LI)),))

    @classmethod
    def point(cls, gamma: float) -> "GammaDistribution":
        return cls(0.0, ((gamma, 1.0),))

    def sample(self, u: float):
        """Inverse-CDF draw from one uniform: None means the JMS branch."""
        if u < self.kappa:
            return None
        acc = self.kappa
        for g, m in self.atoms:
            if u < acc + m:
                return g
            acc += m
        for lo, hi, m in self.pieces:
            if u < acc + m:
                return lo + (hi - lo) * (u - acc) / m
            acc += m
        # u within rounding of 1
        if self.pieces:
            return self.pieces[-1][1]
        return self.atoms[-1][0]

    def mean_gamma(self) -> float:
        return (sum(g * m for g, m in self.atoms)
                + sum(m * (lo + hi) / 2 for lo, hi, m in self.pieces))


def _piece_points(lo, hi, h: CharacteristicFunction):
    pts = [1.0 / b for b in h.breaks if b > 0 and lo < 1.0 / b < hi]
    pts += [x for x in BAND if lo < x < hi]
    return sorted(pts) or None


def branch_values(dist: GammaDistribution, h: CharacteristicFunction, variant: str = "nu",
                  eps7: float = 0.0) -> tuple[float, float]:
    """(facility-side value, connection-side value) of the strategy pair."""
    if variant == "nu":
        a = lambda g: alpha_of(g, h)
    elif variant == "nu_prime":
        a = lambda g: alpha_prime_of(g, h, eps7)
    else:
        raise InputError(f"unknown variant {variant!r}")
    gside = dist.mean_gamma() + JMS_F * dist.kappa
    aside = JMS_C * dist.kappa + sum(m * a(g) for g, m in dist.atoms)
    for lo, hi, m in dist.pieces:
        val, _ = quad(a, lo, hi, points=_piece_points(lo, hi, h), epsabs=1e-11, epsrel=1e-11, limit=200)
        aside += m * val / (hi - lo)
    return gside, aside


def game_value(dist: GammaDistribution, h: CharacteristicFunction, variant: str = "nu",
               eps7: float = 0.0) -> float:
    return max(branch_values(dist, h, variant, eps7))


def worst_case_ratio(dist: GammaDistribution, variant: str = "nu", eps7: float = 0.0,
                     q_grid_step: float = 1e-3) -> tuple[float, float]:
    """max over threshold profiles h_q, by grid scan plus bounded refinement."""
    if not 0 < q_grid_step <= 1e-3:
        raise InputError("q_grid_step must lie in (0, 1e-3]")
    qs = np.arange(0.0, 1.0, q_grid_step)
    vals = np.array([game_value(dist, CharacteristicFunction.threshold(q), variant, eps7) for q in qs])
    k = int(np.argmax(vals))
    best_q, best_v = float(qs[k]), float(vals[k])
    lo = max(0.0, qs[k] - q_grid_step)
    hi = min(qs[k] + q_grid_step, 1 - 1e-9)
    if hi > lo:
        res = minimize_scalar(lambda q: -game_value(dist, CharacteristicFunction.threshold(q), variant, eps7),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
        if -res.fun > best_v:
            best_q, best_v = float(res.x), float(-res.fun)
    return best_v, best_q


def game_table(dist: GammaDistribution, variant: str = "nu", eps7: float = 0.0, step: float = 1e-2) -> str:
    rows = ["q\tgamma_side\talpha_side\tvalue"]
    for q in np.arange(0.0, 1.0, step):
        g, a = branch_values(dist, CharacteristicFunction.threshold(float(q)), variant, eps7)
        rows.append(f"{q:.6f}\t{g!r}\t{a!r}\t{max(g, a)!r}")
    return "\n".join(rows) + "\n"
