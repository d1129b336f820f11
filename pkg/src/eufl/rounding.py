"""Randomized rounding of an augmented solution over a clustering, plus the
bifactor and unifactor drivers built on it."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentedSolution, augment, avg_distance
from .clustering import ClusteringResult, check_partition, cluster_conn, cluster_greedy
from .core import ConsistencyError, InputError, Instance, RoundedSolution, solution_from_open
from .game import GammaDistribution
from .jms import jms_solve
from .lp import solve_relaxation
from .params import ParamSet


def trial_stream(seed: int, t: int) -> np.random.Generator:
    """Generator for trial t; independent of how many trials run or in what order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


@dataclass
class Layout:
    lotteries: list            # per cluster: (copy ids, cumulative probabilities)
    independent: np.ndarray    # copies opened on their own coin

    @property
    def width(self) -> int:
        return len(self.lotteries) + len(self.independent)


def make_layout(aug: AugmentedSolution, clustering: ClusteringResult) -> Layout:
    if not check_partition(clustering, aug.nc):
        raise InputError("clustering is not a partition of the clients")
    taken = np.zeros(aug.n_copies, dtype=bool)
    lots = []
    for cl in clustering.clusters:
        ks = np.asarray(aug.close_order[cl.center])
        if taken[ks].any():
            raise ConsistencyError(f"center {cl.center} shares a close copy with another center")
        taken[ks] = True
        cum = np.cumsum(aug.ybar[ks])
        cum /= cum[-1]
        lots.append((ks, cum))
    return Layout(lots, np.flatnonzero(~taken))


def open_copies(aug: AugmentedSolution, layout: Layout, U: np.ndarray) -> np.ndarray:
    """Trials-by-copies open mask from a trials-by-width uniform matrix."""
    U = np.atleast_2d(U)
    T = U.shape[0]
    out = np.zeros((T, aug.n_copies), dtype=bool)
    for c, (ks, cum) in enumerate(layout.lotteries):
        pick = np.minimum(np.searchsorted(cum, U[:, c], side="right"), len(ks) - 1)
        out[np.arange(T), ks[pick]] = True
    ind = layout.independent
    out[:, ind] = U[:, len(layout.lotteries):] < aug.ybar[ind]
    return out


def parent_mask(aug: AugmentedSolution, copies_open: np.ndarray) -> np.ndarray:
    nf = aug.inst.nf
    P = np.zeros((aug.n_copies, nf), dtype=np.int64)
    P[np.arange(aug.n_copies), aug.parent] = 1
    return (copies_open.astype(np.int64) @ P) > 0


def trial_costs(inst: Instance, parents_open: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(facility cost, connection cost) per trial row."""
    T = parents_open.shape[0]
    fc = parents_open.astype(float) @ inst.costs
    cc = np.empty(T)
    chunk = max(1, 2_000_000 // (inst.nf * inst.nc))
    for a in range(0, T, chunk):
        po = parents_open[a:a + chunk]
        d = np.where(po[:, :, None], inst.dist[None], np.inf).min(axis=1)
        cc[a:a + chunk] = d.sum(axis=1)
    return fc, cc


def _solution(aug, copies_row, seed) -> RoundedSolution:
    ks = np.flatnonzero(copies_row)
    return solution_from_open(aug.inst, np.unique(aug.parent[ks]), seed, frozenset(int(k) for k in ks))


def round_once(aug: AugmentedSolution, clustering: ClusteringResult, seed: int, trial: int = 0) -> RoundedSolution:
    layout = make_layout(aug, clustering)
    u = trial_stream(seed, trial).random(layout.width)
    row = open_copies(aug, layout, u)[0]
    if not row.any():
        raise ConsistencyError("no facility opened although every cluster runs a lottery")
    return _solution(aug, row, seed)


@dataclass
class RoundingDiagnostics:
    p_close: np.ndarray
    p_distant: np.ndarray
    p_far: np.ndarray
    trials: int
    mean: float
    stderr: float
    costs: np.ndarray = field(repr=False, default=None)
    branch: str = "conn"
    gamma: float = float("nan")
    Fstar: float = float("nan")
    Cstar: float = float("nan")
    best_trial: int = 0

    def to_tsv(self, cids=None) -> str:
        rows = [f"# branch\t{self.branch}", f"# gamma\t{self.gamma!r}", f"# trials\t{self.trials}",
                f"# mean_cost\t{self.mean!r}", f"# stderr\t{self.stderr!r}",
                f"# Fstar\t{self.Fstar!r}", f"# Cstar\t{self.Cstar!r}", f"# best_trial\t{self.best_trial}"]
        if len(self.p_close):
            rows.append("client\tp_close\tp_distant\tp_far")
            ids = range(1, len(self.p_close) + 1) if cids is None else cids
            for j, cid in enumerate(ids):
                rows.append(f"{int(cid)}\t{float(self.p_close[j])!r}\t{float(self.p_distant[j])!r}\t{float(self.p_far[j])!r}")
        return "\n".join(rows) + "\n"


def _uniforms(seed: int, trials: int, width: int) -> np.ndarray:
    return np.stack([trial_stream(seed, t).random(width) for t in range(trials)])


def _simulate(aug, clustering, trials, seed):
    if trials < 1:
        raise InputError("trials must be at least 1")
    layout = make_layout(aug, clustering)
    op = open_copies(aug, layout, _uniforms(seed, trials, layout.width))
    return op


def estimate(aug: AugmentedSolution, clustering: ClusteringResult, trials: int, seed: int) -> RoundingDiagnostics:
    op = _simulate(aug, clustering, trials, seed)
    opi = op.astype(np.int64)
    hit_c = (opi @ aug.close.astype(np.int64)) > 0
    hit_d = (opi @ aug.distant.astype(np.int64)) > 0
    pc = hit_c.mean(axis=0)
    pd = (~hit_c & hit_d).mean(axis=0)
    pf = 1.0 - pc - pd
    fc, cc = trial_costs(aug.inst, parent_mask(aug, op))
    tot = fc + cc
    sd = float(tot.std(ddof=1)) if trials > 1 else 0.0
    return RoundingDiagnostics(pc, pd, pf, trials, float(tot.mean()), float(sd / np.sqrt(trials)), tot,
                               gamma=aug.gamma, Fstar=aug.dec.F_total, Cstar=aug.dec.C_total,
                               best_trial=int(np.argmin(tot)))


def best_solution(aug, clustering, diag: RoundingDiagnostics, seed: int) -> RoundedSolution:
    return round_once(aug, clustering, seed, diag.best_trial)


def connection_dominant(dec, params: ParamSet) -> bool:
    return dec.C_total > params.K1 * dec.F_total


def run_bifactor(inst: Instance, params: ParamSet, gamma: float, trials: int, seed: int):
    fs, _, dec = solve_relaxation(inst)
    if not connection_dominant(dec, params):
        sol = jms_solve(inst)
        empty = np.zeros(0)
        diag = RoundingDiagnostics(empty, empty, empty, trials, sol.total_cost, 0.0,
                                   np.array([sol.total_cost]), "jms", gamma, dec.F_total, dec.C_total)
        return sol, diag
    aug = augment(fs, dec, gamma, inst)
    cl = cluster_conn(aug, params)
    diag = estimate(aug, cl, trials, seed)
    return best_solution(aug, cl, diag, seed), diag


@dataclass
class UnifactorReport:
    trials: int
    mean: float
    stderr: float
    branch_counts: dict
    gammas: list               # per trial, None for JMS trials
    paths: list                # per trial: jms | conn | greedy
    best_trial: int

    def to_tsv(self) -> str:
        rows = [f"# trials\t{self.trials}", f"# mean_cost\t{self.mean!r}", f"# stderr\t{self.stderr!r}",
                f"# best_trial\t{self.best_trial}"]
        rows += [f"# {k}\t{v}" for k, v in sorted(self.branch_counts.items())]
        rows.append("trial\tpath\tgamma")
        for t, (p, g) in enumerate(zip(self.paths, self.gammas)):
            rows.append(f"{t}\t{p}\t{'' if g is None else repr(g)}")
        return "\n".join(rows) + "\n"


def unifactor_path(gamma: float | None, conn_dominant: bool, params: ParamSet) -> str:
    if gamma is None or not conn_dominant:
        return "jms"
    lo, hi = params.analysis_range
    return "conn" if lo <= gamma <= hi else "greedy"


def run_unifactor(inst: Instance, params: ParamSet, trials: int, seed: int, dist: GammaDistribution | None = None):
    if trials < 1:
        raise InputError("trials must be at least 1")
    fs, _, dec = solve_relaxation(inst)
    dom = connection_dominant(dec, params)
    dist = GammaDistribution.mu2(params.eps7, params.kappa2) if dist is None else dist
    jms_sol = None
    sols, gammas, paths = [], [], []
    for t in range(trials):
        g = trial_stream(seed, t)
        gamma = dist.sample(float(g.random())) if dom else None
        path = unifactor_path(gamma, dom, params)
        if path == "jms":
            jms_sol = jms_sol or jms_solve(inst)
            sols.append(jms_sol)
        else:
            aug = augment(fs, dec, gamma, inst)
            if path == "conn":
                cl = cluster_conn(aug, params)
            else:
                cl = cluster_greedy(range(inst.nc), aug, params)
            layout = make_layout(aug, cl)
            row = open_copies(aug, layout, g.random(layout.width))[0]
            sols.append(_solution(aug, row, seed))
        gammas.append(None if path == "jms" else float(gamma))
        paths.append(path)
    tot = np.array([s.total_cost for s in sols])
    best = int(np.argmin(tot))
    counts = {p: paths.count(p) for p in ("jms", "conn", "greedy")}
    sd = float(tot.std(ddof=1)) if trials > 1 else 0.0
    rep = UnifactorReport(trials, float(tot.mean()), float(sd / np.sqrt(trials)), counts, gammas, paths, best)
    return sols[best], rep


def closest_open_bound_check(aug: AugmentedSolution, A, j: int, trials: int, seed: int) -> bool:
    """E[distance to nearest open copy of A | some copy of A opens] <= d(j, A).

    Copies open independently with probability ybar; the check allows three
    standard errors of Monte Carlo slack.
    """
    A = np.asarray(sorted(set(int(k) for k in A)), dtype=np.int64)
    if len(A) == 0 or aug.ybar[A].sum() <= 0:
        raise InputError("copy set must carry positive mass")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(j)]))
    op = rng.random((trials, len(A))) < aug.ybar[A]
    any_open = op.any(axis=1)
    if not any_open.any():
        return True
    d = aug.dist[A, j]
    m = np.where(op[any_open], d[None, :], np.inf).min(axis=1)
    se = m.std(ddof=1) / np.sqrt(len(m)) if len(m) > 1 else 0.0
    return bool(m.mean() <= avg_distance(j, A, aug) + 3 * se + 1e-12)
