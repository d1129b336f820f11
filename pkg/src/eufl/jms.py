"""Greedy dual-fitting algorithm with recontribution (facility-dominant fallback)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Instance, RoundedSolution, solution_from_open

TIE = 1e-12


@dataclass
class JmsState:
    time: float = 0.0
    alpha: dict = field(default_factory=dict)        # client index -> frozen budget
    open: list = field(default_factory=list)         # facility indices in opening order
    connected: dict = field(default_factory=dict)    # client index -> facility index


def _offer(state: JmsState, d: np.ndarray, i: int, t: float) -> float:
    tot = 0.0
    for j in range(d.shape[1]):
        if j in state.connected:
            tot += max(d[state.connected[j], j] - d[i, j], 0.0)
        else:
            tot += max(t - d[i, j], 0.0)
    return tot


def _open_time(state: JmsState, d: np.ndarray, f: float, i: int) -> float:
    """Earliest t >= now at which facility i is fully paid for."""
    nc = d.shape[1]
    fixed = sum(max(d[state.connected[j], j] - d[i, j], 0.0) for j in state.connected)
    ds = np.sort([d[i, j] for j in range(nc) if j not in state.connected])
    t0 = state.time
    if len(ds) == 0:
        return np.inf
    if fixed >= f and (fixed > 0 or ds[0] <= t0 + TIE):
        return t0
    if fixed >= f:
        # zero-cost facility waits for the first client to become tight
        return max(t0, ds[0])
    need = f - fixed
    prefix = 0.0
    for k in range(1, len(ds) + 1):
        prefix += ds[k - 1]
        t = (need + prefix) / k
        hi = ds[k] if k < len(ds) else np.inf
        if t <= hi + TIE:
            return max(t, t0)
    return np.inf


def jms_run(inst: Instance) -> JmsState:
    d = inst.dist
    f = inst.costs
    nf, nc = d.shape
    st = JmsState()
    while len(st.connected) < nc:
        # facility events first, then client events; ties by id
        best = None
        for i in range(nf):
            if i in st.open:
                continue
            t = _open_time(st, d, f[i], i)
            if best is None or t < best[0] - TIE:
                best = (t, 0, i, -1)
        for i in sorted(st.open):
            for j in range(nc):
                if j not in st.connected:
                    t = max(d[i, j], st.time)
                    if best is None or t < best[0] - TIE:
                        best = (t, 1, i, j)
        t, kind, i, j = best
        st.time = t
        if kind == 0:
            st.open.append(i)
            for k in range(nc):
                if k in st.connected:
                    if d[i, k] < d[st.connected[k], k]:
                        st.connected[k] = i
                elif d[i, k] <= t + TIE:
                    st.connected[k] = i
                    st.alpha[k] = float(t)
        else:
            st.connected[j] = i
            st.alpha[j] = float(t)
    return st


def jms_solve(inst: Instance) -> RoundedSolution:
    st = jms_run(inst)
    return solution_from_open(inst, st.open)
