"""Clustering procedures over the augmented support graph and the geometric
predicates they use.

Clients are addressed by position (0..nc-1).  Every procedure draws cluster
members from a shared pool of not-yet-clustered clients, so the clusters of
successive calls stay disjoint and centers stay pairwise non-adjacent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentedSolution
from .core import InputError
from .params import ParamSet


@dataclass(frozen=True)
class Cluster:
    center: int
    members: frozenset


@dataclass
class TraceRecord:
    center: int
    rule: str                  # greedy | homogeneous-normal | homogeneous-weird
    saving: float
    spending: float
    members: frozenset
    network: frozenset = frozenset()
    eligible: frozenset = frozenset()   # clients the center was chosen among
    pool: frozenset = frozenset()       # unclustered clients before this round
    nplus: frozenset = frozenset()
    nminus: frozenset = frozenset()
    interval: int = -1


@dataclass
class ClusteringResult:
    clusters: list
    trace: list
    intervals: list = field(default_factory=list)
    blocks: dict = field(default_factory=dict)

    def center_of(self, nc: int) -> np.ndarray:
        c = np.full(nc, -1, dtype=np.int64)
        for cl in self.clusters:
            for j in cl.members:
                c[j] = cl.center
        return c

    def to_tsv(self, cids) -> str:
        rows = ["cluster\tcenter\trule\tsaving\tspending\tmembers"]
        for k, t in enumerate(self.trace):
            mem = ",".join(str(int(cids[j])) for j in sorted(t.members))
            rows.append(f"{k}\t{int(cids[t.center])}\t{t.rule}\t{t.saving!r}\t{t.spending!r}\t{mem}")
        return "\n".join(rows) + "\n"


# -- geometric quantities -----------------------------------------------------

def reroute_all(jprime: int, aug: AugmentedSolution):
    """cost_{j'}(j) and z_{j'}(j) for every client j at once."""
    U = aug.close[:, jprime][:, None] & ~aug.support
    w = aug.share[:, None] * U
    tot = w.sum(axis=0)
    dc = aug.dist
    cost = np.divide((w * dc).sum(axis=0), tot, out=np.zeros(aug.nc), where=tot > 0)
    z = np.divide((w * dc[:, jprime][:, None]).sum(axis=0), tot, out=np.zeros(aug.nc), where=tot > 0)
    return cost, z


def reroute_cost(jprime: int, j: int, aug: AugmentedSolution):
    cost, z = reroute_all(jprime, aug)
    return float(cost[j]), float(z[j])


def targets(aug: AugmentedSolution, eps: float) -> np.ndarray:
    g = aug.gamma
    return (1 - eps) * aug.Cval + (3 - g) * aug.Mval + (g - 1) * aug.Dval


def classify_normal(j: int, aug: AugmentedSolution, params: ParamSet) -> bool:
    th = (params.K6 + 1 - aug.gamma) / (2 * params.K6 + 2 - aug.gamma)
    return bool(aug.Cval[j] >= th * (aug.Cval[j] + aug.Mval[j]) - params.cmp_tol)


def normal_mask(aug: AugmentedSolution, params: ParamSet) -> np.ndarray:
    th = (params.K6 + 1 - aug.gamma) / (2 * params.K6 + 2 - aug.gamma)
    return aug.Cval >= th * aug.CM - params.cmp_tol


def classify_arm(jprime: int, j: int, aug: AugmentedSolution, params: ParamSet) -> bool:
    """True when j has a small remote arm with respect to j'."""
    _, z = reroute_cost(jprime, j, aug)
    dj = float(np.linalg.norm(aug.inst.cxy[j] - aug.inst.cxy[jprime]))
    return small_arm_value(aug.dec.vstar[j], dj, z, params)


def small_arm_value(vstar: float, dj: float, z: float, params: ParamSet) -> bool:
    zz = 0.998 * z
    rhs = dj * dj + zz * zz - 2 * dj * zz * math.cos(math.pi / 2 - params.alpha)
    return bool(vstar * vstar < rhs + params.cmp_tol)


def saving_spending(jprime: int, eligible, aug: AugmentedSolution, params: ParamSet, eps: float,
                    neighbors=None):
    """(N+, N-, Saving, Spending) of center j' restricted to `eligible` clients."""
    nb = aug.neighbors() if neighbors is None else neighbors
    el = np.zeros(aug.nc, dtype=bool)
    el[list(eligible)] = True
    cost, _ = reroute_all(jprime, aug)
    slack = targets(aug, eps) - cost
    plus = el & (slack >= -params.cmp_tol)
    minus = el & ~plus & nb[jprime]
    saving = float(slack[plus].sum())
    spending = float(-slack[minus].sum())
    return (frozenset(np.flatnonzero(plus).tolist()), frozenset(np.flatnonzero(minus).tolist()),
            saving, spending)


# -- Algorithms 1 and 2 ---------------------------------------------------------

def _argmin_cm(cands, aug):
    return min(cands, key=lambda j: (aug.CM[j], j))


def cluster_greedy(network, aug: AugmentedSolution, params: ParamSet, pool=None, neighbors=None,
                   interval: int = -1) -> ClusteringResult:
    network = set(network)
    if not network:
        raise InputError("empty network")
    pool = set(network) if pool is None else pool
    nb = aug.neighbors() if neighbors is None else neighbors
    clusters, trace = [], []
    tgt = targets(aug, params.eps1)
    while network & pool:
        c = _argmin_cm(network & pool, aug)
        before = frozenset(pool)
        members = {c} | (set(np.flatnonzero(nb[c]).tolist()) & pool)
        cost, _ = reroute_all(c, aug)
        slack = tgt - cost
        m = np.array(sorted(members))
        saving = float(slack[m][slack[m] >= 0].sum())
        spending = float(-slack[m][slack[m] < 0].sum())
        pool -= members
        clusters.append(Cluster(c, frozenset(members)))
        trace.append(TraceRecord(c, "greedy", saving, spending, frozenset(members), frozenset(network),
                                 frozenset(network & before), before, interval=interval))
    return ClusteringResult(clusters, trace)


def is_homogeneous(network, aug: AugmentedSolution, params: ParamSet):
    """(holds, s, violator) for the band s <= C+M <= (1+delta)s."""
    vals = aug.CM[sorted(network)]
    s = float(vals.min())
    top = float(vals.max())
    if top <= (1 + params.delta) * s + params.cmp_tol * max(1.0, top):
        return True, s, None
    bad = sorted(network)[int(np.argmax(vals))]
    return False, s, bad


def cluster_homogeneous(network, aug: AugmentedSolution, params: ParamSet, pool=None, neighbors=None,
                        interval: int = -1) -> ClusteringResult:
    network = set(network)
    if not network:
        raise InputError("empty network")
    ok, s, bad = is_homogeneous(network, aug, params)
    if not ok:
        raise InputError(f"network is not homogeneous: client {bad} has C+M={aug.CM[bad]!r}, s={s!r}")
    pool = set(network) if pool is None else pool
    nb = aug.neighbors() if neighbors is None else neighbors
    normal = normal_mask(aug, params)
    clusters, trace = [], []
    while network & pool:
        active = network & pool
        before = frozenset(pool)
        normals = sorted(j for j in active if normal[j])
        if normals:
            best = None
            for j in normals:
                sv = saving_spending(j, active, aug, params, params.eps1, nb)[2]
                if best is None or sv > best[0]:
                    best = (sv, j)
            c, rule = best[1], "homogeneous-normal"
        else:
            c, rule = _argmin_cm(active, aug), "homogeneous-weird"
        nplus, nminus, saving, spending = saving_spending(c, pool, aug, params, params.eps1, nb)
        members = set(nplus | nminus) | {c}
        pool -= members
        clusters.append(Cluster(c, frozenset(members)))
        trace.append(TraceRecord(c, rule, saving, spending, frozenset(members), frozenset(network),
                                 frozenset(active), before, nplus, nminus, interval))
    return ClusteringResult(clusters, trace)


# -- blocks and intervals -------------------------------------------------------

@dataclass
class Interval:
    l: int
    r: int
    reward: float

    @property
    def size(self) -> int:
        return self.r - self.l + 1


@dataclass
class Blocks:
    s: float
    members: dict              # block index -> sorted client list (nonempty only)
    Cstar: dict
    Fstar: dict

    def C(self, n) -> float:
        return self.Cstar.get(n, 0.0)

    def F(self, n) -> float:
        return self.Fstar.get(n, 0.0)

    @property
    def top(self) -> int:
        return max(self.members)


def block_index(v: float, s: float, delta_prime: float) -> int:
    if v <= 0:
        return 0
    return int(math.floor(math.log(v / s) / math.log1p(delta_prime))) + 1


def build_blocks(aug: AugmentedSolution, params: ParamSet) -> Blocks:
    cm = aug.CM
    pos = cm > params.cmp_tol
    s = float(cm[pos].min()) if pos.any() else 0.0
    members: dict = {}
    for j in range(aug.nc):
        n = block_index(cm[j], s, params.delta_prime) if pos[j] else 0
        members.setdefault(n, []).append(j)
    # tiny negative F* from the LP is noise, not facility mass
    Fs = np.maximum(aug.dec.Fstar, 0.0)
    Cs = aug.dec.Cstar
    Csum = {n: float(Cs[m].sum()) for n, m in members.items()}
    Fsum = {n: float(Fs[m].sum()) for n, m in members.items()}
    return Blocks(s, dict(sorted(members.items())), Csum, Fsum)


def cut_intervals(blocks: Blocks, params: ParamSet) -> list:
    """Right-to-left scan for non-overlapping intervals with large reward.

    Block indices can be astronomically sparse, so the scan keeps r on
    nonempty blocks; an empty block always ends the inner loop, so l never
    walks across long gaps.
    """
    K2, K3, L = params.K2, params.K3, params.L_interval
    nonempty = sorted(blocks.members)
    C, F = blocks.C, blocks.F
    J = []
    r = nonempty[-1]
    while r > 0:
        below = [n for n in nonempty if n <= r]
        if not below:
            break
        r = below[-1]
        if r <= 0:
            break
        l = r
        c = f = 0.0
        while l >= 0:
            if c >= K3 * (f + F(l)) and C(l) <= (K2 - K3) / K2 * c:
                J.append((l, r))
                r = l - 1
                break
            c += C(l)
            f += F(l)
            if c < K2 * f:
                r = l - 1
                break
            if r - l + 1 == 2 * L:
                top = [n for n in nonempty if l + L <= n <= r]
                c -= sum(C(n) for n in top)
                f -= sum(F(n) for n in top)
                r -= L
            l -= 1
        else:
            # fell off the left end without emitting; nothing more to cut
            r = -1
    covered = set()
    for l, r in J:
        covered.update(n for n in nonempty if l <= n <= r)
    J += [(n, n) for n in nonempty if n not in covered]
    out = []
    for l, r in sorted(J):
        inside = [n for n in nonempty if l <= n <= r]
        out.append(Interval(l, r, sum(C(n) for n in inside) - C(l)))
    return out


def cluster_conn(aug: AugmentedSolution, params: ParamSet, inst=None, dec=None) -> ClusteringResult:
    dec = aug.dec if dec is None else dec
    if not dec.C_total > params.K1 * dec.F_total:
        raise InputError(f"instance is not connection-dominant: C*={dec.C_total:.6g}, F*={dec.F_total:.6g}")
    blocks = build_blocks(aug, params)
    intervals = cut_intervals(blocks, params)
    nb = aug.neighbors()
    pool = set(range(aug.nc))
    clusters, trace = [], []
    Fs = np.maximum(dec.Fstar, 0.0)
    for k, iv in enumerate(intervals):
        net = set()
        for n, mem in blocks.members.items():
            if iv.l <= n <= iv.r:
                net.update(mem)
        net &= pool
        if not net:
            continue
        idx = sorted(net)
        conn_dominant = dec.Cstar[idx].sum() > params.K4 * Fs[idx].sum()
        homog = is_homogeneous(net, aug, params)[0]
        if iv.size >= 2 and conn_dominant and homog:
            res = cluster_homogeneous(net, aug, params, pool, nb, interval=k)
        else:
            res = cluster_greedy(net, aug, params, pool, nb, interval=k)
        clusters += res.clusters
        trace += res.trace
    return ClusteringResult(clusters, trace, intervals, blocks.members)


def check_partition(result: ClusteringResult, nc: int) -> bool:
    seen = []
    for cl in result.clusters:
        if cl.center not in cl.members:
            return False
        seen += list(cl.members)
    return sorted(seen) == list(range(nc))
