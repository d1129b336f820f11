"""Exact oracles, bifactor certification, lemma checkers and the coefficient
grid search for the big-remote-arm lemma."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentedSolution
from .clustering import (ClusteringResult, block_index, build_blocks, normal_mask, reroute_all,
                         saving_spending, small_arm_value, targets)
from .core import InputError, Instance, RoundedSolution
from .params import ParamSet, theta_of

ORACLE_CAP = 20
CERTIFY_CAP = 16


# -- exact optimum ------------------------------------------------------------

@dataclass
class OracleResult:
    opt_cost: float
    opt_set: frozenset           # facility ids
    F: np.ndarray | None = None  # per subset mask
    C: np.ndarray | None = None


def _min_table(d: np.ndarray) -> np.ndarray:
    """Row m holds the elementwise min over facilities in bitmask m (inf for m = 0)."""
    n, nc = d.shape
    tab = np.full((1 << n, nc), np.inf)
    for b in range(n):
        lo = 1 << b
        tab[lo:2 * lo] = np.minimum(tab[:lo], d[b])
    return tab


def subset_table(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    """(F(T), C(T)) for every facility subset T, indexed by bitmask over facility positions."""
    nf = inst.nf
    if nf > CERTIFY_CAP:
        raise InputError(f"subset table limited to {CERTIFY_CAP} facilities, got {nf}")
    C = _min_table(inst.dist).sum(axis=1)
    F = np.zeros(1 << nf)
    for b in range(nf):
        lo = 1 << b
        F[lo:2 * lo] = F[:lo] + inst.costs[b]
    return F, C


def _mask_ids(inst, mask) -> frozenset:
    return frozenset(int(inst.fids[b]) for b in range(inst.nf) if mask >> b & 1)


def brute_force_opt(inst: Instance, keep_table: bool = False) -> OracleResult:
    nf = inst.nf
    if nf > ORACLE_CAP:
        raise InputError(f"brute force limited to {ORACLE_CAP} facilities, got {nf}")
    a = min(nf, 10)
    low = _min_table(inst.dist[:a])
    lowF = np.zeros(1 << a)
    for b in range(a):
        lowF[1 << b:2 << b] = lowF[:1 << b] + inst.costs[b]
    best = (math.inf, 0)
    Fall = Call = None
    if keep_table and nf <= CERTIFY_CAP:
        Fall, Call = np.empty(1 << nf), np.empty(1 << nf)
    hd = inst.dist[a:]
    hc = inst.costs[a:]
    for h in range(1 << (nf - a)):
        bits = [b for b in range(nf - a) if h >> b & 1]
        hmin = hd[bits].min(axis=0) if bits else np.full(inst.nc, np.inf)
        tot_c = np.minimum(low, hmin).sum(axis=1)
        tot_f = lowF + hc[bits].sum()
        tot = tot_c + tot_f
        if Fall is not None:
            Fall[h << a:(h + 1) << a] = tot_f
            Call[h << a:(h + 1) << a] = tot_c
        k = int(np.argmin(tot))
        if tot[k] < best[0]:
            best = (float(tot[k]), (h << a) | k)
    return OracleResult(best[0], _mask_ids(inst, best[1]), Fall, Call)


def branch_and_bound_opt(inst: Instance) -> float:
    """Independent exact optimum by depth-first include/exclude search."""
    d, f = inst.dist, inst.costs
    nf = inst.nf
    order = sorted(range(nf), key=lambda i: (f[i] + d[i].sum(), i))
    suffix_min = np.full((nf + 1, inst.nc), np.inf)
    for k in range(nf - 1, -1, -1):
        suffix_min[k] = np.minimum(suffix_min[k + 1], d[order[k]])
    best = [math.inf]

    def rec(k, cur, fc):
        # any completion pays at least fc plus the per-client best reachable distance
        reach = np.minimum(cur, suffix_min[k])
        if fc + reach.sum() >= best[0] - 1e-12:
            return
        if k == nf:
            best[0] = fc + cur.sum()
            return
        i = order[k]
        rec(k + 1, np.minimum(cur, d[i]), fc + f[i])
        rec(k + 1, cur, fc)

    rec(0, np.full(inst.nc, np.inf), 0.0)
    return best[0]


def certify_bifactor(sol: RoundedSolution, inst: Instance, lambda_f: float, lambda_c: float,
                     tol: float = 1e-9):
    """(holds, T): T is the first violating subset, or the tightest one when none violates."""
    F, C = subset_table(inst)
    rhs = lambda_f * F[1:] + lambda_c * C[1:]
    slack = rhs - sol.total_cost
    bad = np.flatnonzero(slack < -tol * max(1.0, sol.total_cost))
    if len(bad):
        return False, _mask_ids(inst, int(bad[0]) + 1)
    return True, _mask_ids(inst, int(np.argmin(slack)) + 1)


# -- lemma checkers -----------------------------------------------------------

@dataclass
class LemmaCheck:
    name: str
    status: str = "n/a"        # pass | fail | n/a
    checked: int = 0
    failures: int = 0
    worst_margin: float = math.inf
    detail: str = ""

    def record(self, margin: float, tol: float, where: str = ""):
        self.checked += 1
        if margin < self.worst_margin:
            self.worst_margin = float(margin)
            self.detail = where
        if margin < -tol:
            self.failures += 1

    def close(self):
        if self.checked:
            self.status = "fail" if self.failures else "pass"
        return self


@dataclass
class LemmaReport:
    checks: list = field(default_factory=list)

    @property
    def hard_failures(self) -> list:
        return [c for c in self.checks if c.status == "fail"]

    def get(self, name) -> LemmaCheck:
        return next(c for c in self.checks if c.name == name)

    def to_tsv(self) -> str:
        rows = ["lemma\tstatus\tchecked\tfailures\tworst_margin\tdetail"]
        for c in self.checks:
            rows.append(f"{c.name}\t{c.status}\t{c.checked}\t{c.failures}\t{c.worst_margin!r}\t{c.detail}")
        return "\n".join(rows) + "\n"


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return math.acos(max(-1.0, min(1.0, float(a @ b) / (na * nb))))


def _in_band(gamma, params) -> bool:
    lo, hi = params.analysis_range
    return lo < gamma < hi


def check_lemmas(inst: Instance, aug: AugmentedSolution, clustering: ClusteringResult,
                 params: ParamSet) -> LemmaReport:
    dec = aug.dec
    g = aug.gamma
    tol = params.lp_tol
    normal = normal_mask(aug, params)
    nb = aug.neighbors()
    Cs, Fs = dec.Cstar, dec.Fstar
    scale = max(1.0, float(aug.CM.max()))

    weird = LemmaCheck("weird-client")
    for j in np.flatnonzero(~normal):
        weird.record(params.K6 * Fs[j] - Cs[j], tol * scale, f"client={inst.cids[j]}")

    zlow = LemmaCheck("z-lower-bound")
    cone = LemmaCheck("cone-probability")
    expand = LemmaCheck("saving-expansion")
    geom = LemmaCheck("good-on-average-center")
    homog0 = LemmaCheck("homogeneous-average")
    homog3 = LemmaCheck("homogeneous-average-eps3")
    band = _in_band(g, params)
    dist = aug.dist
    fxy = inst.fxy[aug.parent]
    cxy = inst.cxy
    invocations: dict = {}
    for rec in clustering.trace:
        if not rec.rule.startswith("homogeneous"):
            continue
        invocations.setdefault((rec.interval, rec.network), []).append(rec)
        if rec.rule != "homogeneous-normal" or not band:
            continue
        jp = rec.center
        cost, z = reroute_all(jp, aug)
        close_jp = aug.close[:, jp]
        s = float(aug.CM[sorted(rec.network)].min())
        small = []
        for j in sorted(rec.nminus):
            if aug.CM[jp] > (1 + params.delta) * aug.CM[j] + params.cmp_tol:
                continue
            U = close_jp & ~aug.support[:, j]
            zlow.record(z[j] - 0.99 * aug.Cval[jp], params.cmp_tol * scale, f"center={inst.cids[jp]} j={inst.cids[j]}")
            if U.any():
                ks = np.flatnonzero(U)
                dj = dist[ks, jp]
                inB = (dj >= 0.999 * z[j] - params.cmp_tol) & (dj <= aug.Mval[jp] + params.cmp_tol)
                ang = np.array([_angle(cxy[j] - cxy[jp], fxy[k] - cxy[jp]) for k in ks])
                inT = inB & (ang > math.pi - params.phi_r)
                g1 = float(aug.share[ks[inT]].sum())
                g2 = float(aug.share[ks[inB & ~inT]].sum())
                cone.record(g1 - g2, params.cmp_tol, f"center={inst.cids[jp]} j={inst.cids[j]}")
            dd = float(np.linalg.norm(cxy[j] - cxy[jp]))
            if j in rec.network and small_arm_value(dec.vstar[j], dd, z[j], params):
                small.append(j)
        if small:
            best = max(saving_spending(j, rec.eligible, aug, params, params.eps1, nb)[2] for j in small)
            expand.record(best - s / 125 * len(small) / params.M_cap, tol * scale, f"center={inst.cids[jp]}")
        mem = sorted(rec.nplus | rec.nminus)
        if Cs[mem].sum() > params.K5 * max(Fs[mem].sum(), 0.0):
            lhs = cost[mem].sum()
            geom.record(float(targets(aug, params.eps2)[mem].sum() - lhs), tol * scale, f"center={inst.cids[jp]}")
    if band:
        for (_, net), recs in invocations.items():
            idx = sorted(net)
            if not Cs[idx].sum() > params.K4 * max(Fs[idx].sum(), 0.0):
                continue
            lhs = 0.0
            mem = []
            for rec in recs:
                c, _ = reroute_all(rec.center, aug)
                m = sorted(rec.members)
                lhs += c[m].sum()
                mem += m
            homog0.record(float(targets(aug, 0.0)[mem].sum() - lhs), tol * scale, f"network_size={len(idx)}")
            homog3.record(float(targets(aug, params.eps3)[mem].sum() - lhs), tol * scale, f"network_size={len(idx)}")

    far = LemmaCheck("far-block")
    blocks = build_blocks(aug, params)
    bidx = [0] * aug.nc          # block indices can exceed int64
    for n, mem in blocks.members.items():
        for j in mem:
            bidx[j] = n
    cutoff = 1 - 2 * params.delta_prime / (1 + params.delta_prime)
    for j in range(aug.nc):
        cj, _ = reroute_all(j, aug)
        for jp in np.flatnonzero(nb[j]):
            if abs(bidx[jp] - bidx[j]) < 2:
                continue
            if (1 + params.delta_prime) * aug.CM[j] > aug.CM[jp] + params.cmp_tol:
                continue
            rhs = cutoff * aug.Cval[jp] + (3 - g) * aug.Mval[jp] + (g - 1) * aug.Dval[jp]
            far.record(float(rhs - cj[jp]), tol * scale, f"j={inst.cids[j]} j'={inst.cids[jp]}")

    reward = LemmaCheck("interval-reward")
    if dec.C_total > params.K1 * dec.F_total and clustering.intervals:
        tot = sum(iv.reward for iv in clustering.intervals)
        reward.record(tot - dec.C_total / 1e5, tol * max(1.0, dec.C_total), f"reward={tot!r}")

    return LemmaReport([c.close() for c in (weird, zlow, cone, expand, geom, homog0, homog3, far, reward)])


# -- coefficient grid search --------------------------------------------------

UNC1 = 360.8
UNC2 = 139.1


def a1_coefficients(g, k, l, r, K6, e1, de, flip_b3=False):
    """The coefficient forms of both inequalities, shared by every evaluator."""
    W = g - 1 + l - k + de
    A1 = (g - 1) * (3 - 2 * l) + (l - k + de) * (2 * g - 3) - e1 * W
    B1 = (g - 1) * r * ((1 + e1) * W + (2 - k + de) * (2 - g))
    A2 = 2 * (g - 1) * l
    B2 = (g - 1) * (2 - g) * r * l
    A3 = (3 - 3 * de + 2 * de * g - 2 * l) / (1 + de)
    B3 = -(g - 1) * r * ((-(3 - g) * (1 - de) + 2 * l) / (1 + de) + e1)
    if flip_b3:
        B3 = -B3
    A4 = 2 * l / (1 + de)
    B4 = -2 * l * (g - 1) * r / (1 + de)
    return W, A1, B1, A2, B2, A3, B3, A4, B4


def a1_lhs(g, k, l, r, K6, e1, de, flip_b3=False):
    """(LHS1, LHS2); an inequality holds iff its LHS is negative."""
    W, A1, B1, A2, B2, A3, B3, A4, B4 = a1_coefficients(g, k, l, r, K6, e1, de, flip_b3)
    L1 = (A1 * K6 + B1) ** 2 + (A2 * K6 + B2) ** 2 - W ** 2 * (K6 + 1) ** 2 / 0.995
    L2 = (A3 * K6 + B3) ** 2 + (A4 * K6 + B4) ** 2 - (K6 + 1) ** 2 / 0.995
    return L1, L2


def a1_lhs_scalar(g, k, l, r, params: ParamSet, flip_b3=False):
    """Reference evaluation at one point in 50-digit arithmetic."""
    import mpmath as mp
    with mp.workdps(50):
        vals = a1_lhs(mp.mpf(g), mp.mpf(k), mp.mpf(l), mp.mpf(r), mp.mpf(params.K6),
                      mp.mpf(params.eps1), mp.mpf(params.delta), flip_b3)
        return float(vals[0]), float(vals[1])


@dataclass
class GridSearchReport:
    d: float
    points: int
    min_robust_margin: float       # max(L1 - U1, L2 - U2): > 0 means infeasible beyond the error model
    worst_point: tuple
    min_raw_margin: float          # max(L1, L2)
    min_printed_margin: float      # max(-L1 - U1, -L2 - U2), the literal sign convention
    flip_b3: bool = False
    ranges: dict = field(default_factory=dict)

    def to_tsv(self) -> str:
        g, k, l, r = self.worst_point if self.worst_point else (math.nan,) * 4
        rows = [f"d\t{self.d!r}", f"points\t{self.points}", f"flip_b3\t{int(self.flip_b3)}",
                f"min_robust_margin\t{self.min_robust_margin!r}", f"min_raw_margin\t{self.min_raw_margin!r}",
                f"min_printed_margin\t{self.min_printed_margin!r}",
                f"worst_gamma\t{g!r}", f"worst_k\t{k!r}", f"worst_l\t{l!r}", f"worst_r\t{r!r}"]
        rows += [f"range_{name}\t{lo!r}\t{hi!r}" for name, (lo, hi) in self.ranges.items()]
        return "\n".join(rows) + "\n"


def a1_axes(g, d, params: ParamSet):
    de = params.delta
    ks = np.arange(theta_of(g, params.K6), (1 + de) / 2 + 1e-15, d)
    rs = np.arange(0.0, 1 + 1e-12, d)
    return ks, rs


def a1_l_axis(k, d, params: ParamSet):
    return np.arange(0.99 * k + d, 1 - k + params.delta + 1e-15, d)


def _slice(g, d, params, flip_b3):
    ks, rs = a1_axes(g, d, params)
    n = 0
    best = (math.inf, None)
    raw = printed = math.inf
    for k in ks:
        ls = a1_l_axis(k, d, params)
        if len(ls) == 0:
            continue
        L, R = np.meshgrid(ls, rs, indexing="ij")
        L1, L2 = a1_lhs(g, k, L, R, params.K6, params.eps1, params.delta, flip_b3)
        rob = np.maximum(L1 - UNC1 * d, L2 - UNC2 * d)
        i = np.unravel_index(int(np.argmin(rob)), rob.shape)
        if rob[i] < best[0]:
            best = (float(rob[i]), (float(g), float(k), float(L[i]), float(R[i])))
        raw = min(raw, float(np.maximum(L1, L2).min()))
        printed = min(printed, float(np.maximum(-L1 - UNC1 * d, -L2 - UNC2 * d).min()))
        n += L1.size
    return n, best, raw, printed


def worker_count() -> int:
    try:
        n = int(os.environ.get("UFL_THREADS", "0"))
    except ValueError:
        raise InputError("UFL_THREADS must be an integer") from None
    return n if n > 0 else (os.cpu_count() or 1)


def appendix_grid_search(params: ParamSet, d: float = 5e-3, flip_b3: bool = False,
                         workers: int | None = None) -> GridSearchReport:
    if not 1e-4 <= d <= 1e-2:
        raise InputError(f"grid step must lie in [1e-4, 1e-2], got {d}")
    lo, hi = params.analysis_range
    gs = np.arange(lo + d, hi - 1e-12, d)
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda g: _slice(g, d, params, flip_b3), gs))
    else:
        parts = [_slice(g, d, params, flip_b3) for g in gs]
    n = sum(p[0] for p in parts)
    best = (math.inf, None)
    for p in parts:                 # fixed order keeps the worst point deterministic
        if p[1][0] < best[0]:
            best = p[1]
    raw = min((p[2] for p in parts), default=math.inf)
    printed = min((p[3] for p in parts), default=math.inf)
    ranges = {"gamma": (float(gs[0]), float(gs[-1])) if len(gs) else (lo, hi), "r": (0.0, 1.0)}
    return GridSearchReport(d, n, best[0], best[1], raw, printed, flip_b3, ranges)
