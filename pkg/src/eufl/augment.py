"""Facility-augmented solution: gamma scaling, global facility splitting and
the per-client close/distant statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConsistencyError, InputError, Instance
from .lp import ClientDecomposition, FractionalSolution

MERGE_TOL = 1e-12
MASS_TOL = 1e-9


@dataclass
class AugmentedSolution:
    """Copies of split facilities and the close/distant sets of every client.

    Copy k is the share interval [lo[k], hi[k]] of its parent facility; a
    client served by parent i with x*_ij = x uses the copies inside [0, x].
    Clients are addressed by position in the instance (0..nc-1).
    """

    gamma: float
    inst: Instance
    dec: ClientDecomposition
    parent: np.ndarray         # facility index per copy
    lo: np.ndarray
    hi: np.ndarray
    share: np.ndarray          # y* share of the copy
    ybar: np.ndarray           # gamma * share
    close: np.ndarray          # copies x clients, bool
    distant: np.ndarray        # copies x clients, bool
    close_order: list          # per client, close copy indices sorted by (distance, copy id)
    Cval: np.ndarray
    Mval: np.ndarray
    Dval: np.ndarray
    r: np.ndarray
    rprime: np.ndarray

    @property
    def n_copies(self) -> int:
        return len(self.parent)

    @property
    def nc(self) -> int:
        return self.close.shape[1]

    @property
    def dist(self) -> np.ndarray:
        """Copy-by-client distances."""
        return self.inst.dist[self.parent]

    @property
    def support(self) -> np.ndarray:
        return self.close | self.distant

    @property
    def CM(self) -> np.ndarray:
        return self.Cval + self.Mval

    def neighbors(self) -> np.ndarray:
        """Client adjacency in the augmented support graph (shared close copy)."""
        c = self.close.astype(np.int64)
        nb = (c.T @ c) > 0
        np.fill_diagonal(nb, False)
        return nb

    def stats_tsv(self) -> str:
        rows = ["client\tC\tM\tD\tr"]
        for j, cid in enumerate(self.inst.cids):
            rows.append(f"{cid}\t{self.Cval[j]!r}\t{self.Mval[j]!r}\t{self.Dval[j]!r}\t{self.r[j]!r}")
        return "\n".join(rows) + "\n"


def _merge(points: np.ndarray) -> np.ndarray:
    pts = np.sort(points)
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > MERGE_TOL:
            keep.append(p)
    return np.array(keep)


def _snap(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(grid, values), 1, len(grid) - 1)
    left, right = grid[idx - 1], grid[idx]
    return np.where(values - left <= right - values, left, right)


def augment(fs: FractionalSolution, dec: ClientDecomposition, gamma: float, inst: Instance) -> AugmentedSolution:
    if gamma < 1:
        raise InputError(f"gamma must be at least 1, got {gamma}")
    d = inst.dist
    nf, nc = d.shape
    x = np.where(fs.x > MERGE_TOL, fs.x, 0.0)
    x /= x.sum(axis=0, keepdims=True)
    y = np.maximum(fs.y, x.max(axis=1))

    # close-set cut points, per client on its boundary parent
    cuts = [[] for _ in range(nf)]
    for j in range(nc):
        order = sorted(np.flatnonzero(x[:, j]), key=lambda i: (d[i, j], i))
        mass = 0.0
        for i in order:
            if mass + gamma * x[i, j] >= 1 - MASS_TOL:
                t = (1 - mass) / gamma
                if t < x[i, j] - MERGE_TOL:
                    cuts[i].append(t)
                break
            mass += gamma * x[i, j]

    parent, lo, hi = [], [], []
    grids = []
    for i in range(nf):
        if y[i] <= MERGE_TOL:
            grids.append(None)
            continue
        pts = [0.0, y[i]] + list(x[i, x[i] > 0]) + cuts[i]
        k = 1
        while k / gamma < y[i] - MERGE_TOL:
            pts.append(k / gamma)
            k += 1
        g = _merge(np.array(pts))
        grids.append(g)
        for a, b in zip(g[:-1], g[1:]):
            parent.append(i)
            lo.append(a)
            hi.append(b)
    parent = np.array(parent, dtype=np.int64)
    lo, hi = np.array(lo), np.array(hi)
    share = hi - lo
    ybar = np.minimum(gamma * share, 1.0)
    K = len(parent)

    # support of each client: copies of parent i lying inside [0, x_ij]
    xs = np.zeros_like(x)
    for i in range(nf):
        if grids[i] is not None and np.any(x[i] > 0):
            xs[i] = np.where(x[i] > 0, _snap(x[i], grids[i]), 0.0)
    supp = hi[:, None] <= xs[parent] + MERGE_TOL / 2
    dc = d[parent]

    close = np.zeros((K, nc), dtype=bool)
    close_order = []
    for j in range(nc):
        ks = np.flatnonzero(supp[:, j])
        ks = ks[np.lexsort((ks, dc[ks, j]))]
        cum = np.cumsum(ybar[ks])
        n_close = int(np.searchsorted(cum, 1 - MASS_TOL)) + 1
        if n_close > len(ks) or abs(cum[n_close - 1] - 1) > 1e-6:
            raise ConsistencyError(f"client {j}: close mass {cum[min(n_close, len(ks)) - 1]:.12f} != 1")
        close[ks[:n_close], j] = True
        close_order.append(ks[:n_close])
    distant = supp & ~close

    def wmean(mask):
        w = share[:, None] * mask
        tot = w.sum(axis=0)
        num = (w * dc).sum(axis=0)
        return np.divide(num, tot, out=np.zeros(nc), where=tot > 0)

    Cval = wmean(close)
    Dval = wmean(distant)
    Mval = np.where(close, dc, -np.inf).max(axis=0)
    has_d = distant.any(axis=0)
    Cs, Fs = dec.Cstar, dec.Fstar
    ok = (Fs > 1e-9) & has_d
    r = np.where(ok, (Dval - Cs) / np.where(ok, Fs, 1.0), 0.0)
    r = np.clip(r, 0.0, 1.0)
    return AugmentedSolution(gamma, inst, dec, parent, lo, hi, share, ybar, close, distant,
                             close_order, Cval, Mval, Dval, r, (gamma - 1) * r)


def avg_distance(j: int, S, aug: AugmentedSolution) -> float:
    """y*-share weighted mean distance from client j to copy set S (0 if empty)."""
    S = np.asarray(sorted(S), dtype=np.int64)
    if len(S) == 0:
        return 0.0
    w = aug.share[S]
    tot = w.sum()
    if tot <= 0:
        return 0.0
    return float((w * aug.dist[S, j]).sum() / tot)
