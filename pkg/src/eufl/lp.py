"""LP relaxation of UFL, solved with a dense two-phase simplex (Bland's rule)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConsistencyError, Instance, SolverError

MAX_ITERS = 100_000


@dataclass
class SimplexResult:
    z: np.ndarray
    duals: np.ndarray
    basis: list
    objective: float
    iterations: int


def _pivot(T: np.ndarray, r: int, k: int) -> None:
    T[r] /= T[r, k]
    nz = np.flatnonzero(T[:, k])
    nz = nz[nz != r]
    if len(nz):
        T[nz] -= np.outer(T[nz, k], T[r])


def _run(T, basis, allowed, iters, tol=1e-9, piv_tol=1e-9):
    """Bland's rule on tableau T (objective in the last row) until optimal."""
    m = T.shape[0] - 1
    while True:
        rc = T[m, :-1]
        cand = np.flatnonzero((rc < -tol) & allowed)
        if len(cand) == 0:
            return iters
        k = int(cand[0])
        colk = T[:m, k]
        rows = np.flatnonzero(colk > piv_tol)
        if len(rows) == 0:
            raise SolverError("LP is unbounded", iters)
        ratios = T[rows, -1] / colk[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, k)
        basis[r] = k
        iters += 1
        if iters > MAX_ITERS:
            raise SolverError("simplex iteration cap reached", iters)


def simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> SimplexResult:
    """Minimise c.z subject to A z = b, z >= 0 (b >= 0 required).

    Rows that already own a unit column start with it basic; the rest get an
    artificial variable.  Duals are recovered from the reduced costs of each
    row's starting column.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise ValueError("simplex expects b >= 0")
    start_col = [-1] * m
    for k in range(n):
        nz = np.flatnonzero(A[:, k])
        if len(nz) == 1 and A[nz[0], k] == 1.0 and start_col[nz[0]] < 0:
            start_col[nz[0]] = k
    need_art = [r for r in range(m) if start_col[r] < 0]
    na = len(need_art)
    T = np.zeros((m + 1, n + na + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    for a, r in enumerate(need_art):
        T[r, n + a] = 1.0
        start_col[r] = n + a
    basis = list(start_col)
    allowed = np.ones(n + na, dtype=bool)

    iters = 0
    if na:
        # phase 1: minimise the sum of artificials
        T[m, :] = 0.0
        T[m, n:n + na] = 1.0
        for r in need_art:
            T[m] -= T[r]
        iters = _run(T, basis, allowed, iters)
        if -T[m, -1] > 1e-7 * max(1.0, np.abs(b).max()):
            raise SolverError("LP is infeasible", iters)
        for r in range(m):
            if basis[r] >= n:
                nz = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
                if len(nz):
                    _pivot(T, r, int(nz[0]))
                    basis[r] = int(nz[0])
        allowed[n:] = False

    # phase 2
    cfull = np.concatenate([c, np.zeros(na)])
    T[m, :-1] = cfull
    T[m, -1] = 0.0
    for r in range(m):
        T[m] -= cfull[basis[r]] * T[r]
    iters = _run(T, basis, allowed, iters)

    z = np.zeros(n + na)
    for r in range(m):
        z[basis[r]] = T[r, -1]
    duals = np.array([cfull[start_col[r]] - T[m, start_col[r]] for r in range(m)])
    return SimplexResult(z[:n], duals, basis, float(c @ z[:n]), iters)


# -- UFL relaxation -----------------------------------------------------------

@dataclass
class FractionalSolution:
    x: np.ndarray          # facility-by-client
    y: np.ndarray
    objective: float
    fids: np.ndarray
    cids: np.ndarray

    def x_map(self, threshold: float = 0.0) -> dict:
        ii, jj = np.nonzero(self.x > threshold)
        return {(int(self.fids[i]), int(self.cids[j])): float(self.x[i, j]) for i, j in zip(ii, jj)}

    def y_map(self) -> dict:
        return {int(f): float(v) for f, v in zip(self.fids, self.y)}


@dataclass
class DualSolution:
    v: np.ndarray
    w: np.ndarray          # facility-by-client
    objective: float


@dataclass
class ClientDecomposition:
    Cstar: np.ndarray
    Fstar: np.ndarray
    vstar: np.ndarray

    @property
    def C_total(self) -> float:
        return float(self.Cstar.sum())

    @property
    def F_total(self) -> float:
        return float(self.Fstar.sum())


def solve_relaxation(inst: Instance):
    """Primal, dual and per-client decomposition of the UFL relaxation.

    Columns are x_ij, y_i and slacks s_ij of the rows x_ij - y_i + s_ij = 0.
    """
    nf, nc = inst.nf, inst.nc
    d = inst.dist
    nx = nf * nc
    n = 2 * nx + nf
    m = nc + nx
    A = np.zeros((m, n))
    for j in range(nc):
        A[j, j:nx:nc] = 1.0                     # sum_i x_ij = 1
    rows = nc + np.arange(nx)
    A[rows, np.arange(nx)] = 1.0
    A[rows, nx + np.repeat(np.arange(nf), nc)] = -1.0
    A[rows, nx + nf + np.arange(nx)] = 1.0
    b = np.zeros(m)
    b[:nc] = 1.0
    c = np.concatenate([d.reshape(-1), inst.costs, np.zeros(nx)])

    res = simplex(A, b, c)
    x = res.z[:nx].reshape(nf, nc)
    y = res.z[nx:nx + nf]
    x[np.abs(x) < 1e-13] = 0.0
    y[np.abs(y) < 1e-13] = 0.0
    v = res.duals[:nc]
    w = -res.duals[nc:].reshape(nf, nc)
    w[np.abs(w) < 1e-13] = 0.0
    primal = FractionalSolution(x, y, float((d * x).sum() + inst.costs @ y), inst.fids, inst.cids)
    dual = DualSolution(v, w, float(v.sum()))
    if abs(primal.objective - dual.objective) > 1e-6 * max(1.0, abs(primal.objective)):
        raise ConsistencyError(f"duality gap {primal.objective - dual.objective:.3e}")
    Cstar = (d * x).sum(axis=0)
    Fstar = v - Cstar
    dec = ClientDecomposition(Cstar, Fstar, Cstar + Fstar)
    return primal, dual, dec


def support_graph(fs: FractionalSolution, threshold: float = 1e-9):
    """Bipartite edges (facility id -> client ids) and client neighbour sets."""
    adj = fs.x > threshold
    edges = {int(fs.fids[i]): {int(fs.cids[j]) for j in np.flatnonzero(adj[i])} for i in range(len(fs.fids))}
    share = (adj.T.astype(int) @ adj.astype(int)) > 0
    np.fill_diagonal(share, False)
    neighbors = {int(fs.cids[j]): {int(fs.cids[k]) for k in np.flatnonzero(share[j])} for j in range(len(fs.cids))}
    return edges, neighbors


def dump_tsv(primal: FractionalSolution, dual: DualSolution) -> str:
    out = []
    for i, f in enumerate(primal.fids):
        for j, cl in enumerate(primal.cids):
            if primal.x[i, j] != 0:
                out.append(f"x\t{f}\t{cl}\t{primal.x[i, j]!r}")
    for i, f in enumerate(primal.fids):
        out.append(f"y\t{f}\t{primal.y[i]!r}")
    for j, cl in enumerate(primal.cids):
        out.append(f"v\t{cl}\t{dual.v[j]!r}")
    for i, f in enumerate(primal.fids):
        for j, cl in enumerate(primal.cids):
            if dual.w[i, j] != 0:
                out.append(f"w\t{f}\t{cl}\t{dual.w[i, j]!r}")
    return "\n".join(out) + "\n"
