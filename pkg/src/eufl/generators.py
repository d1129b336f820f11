"""Seeded random instances and the graph-based hardness construction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .core import InputError, Instance

PROFILES = ("uniform_box", "clustered_blobs", "colinear_adversarial")


@dataclass(frozen=True)
class GenSpec:
    seed: int
    dim: int = 2
    n_facilities: int = 4
    n_clients: int = 6
    cost_range: tuple = (0.0, 1.0)
    coordinate_scale: float = 1.0
    profile: str = "uniform_box"

    def __post_init__(self):
        lo, hi = self.cost_range
        if self.dim < 1 or self.n_facilities < 1 or self.n_clients < 1:
            raise InputError("dim, n_facilities and n_clients must be positive")
        if not (0 <= lo <= hi):
            raise InputError(f"bad cost range {self.cost_range}")
        if not self.coordinate_scale > 0:
            raise InputError("coordinate_scale must be positive")
        if self.profile not in PROFILES:
            raise InputError(f"unknown profile {self.profile!r}")


def generate_random(spec: GenSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)
    d, nf, nc, s = spec.dim, spec.n_facilities, spec.n_clients, spec.coordinate_scale
    if spec.profile == "uniform_box":
        fxy = rng.uniform(0, s, size=(nf, d))
        cxy = rng.uniform(0, s, size=(nc, d))
    elif spec.profile == "clustered_blobs":
        k = max(2, int(round(math.sqrt(nf + nc) / 2)))
        centers = rng.uniform(0, s, size=(k, d))
        fxy = centers[rng.integers(k, size=nf)] + rng.normal(0, s / 10, size=(nf, d))
        cxy = centers[rng.integers(k, size=nc)] + rng.normal(0, s / 10, size=(nc, d))
    else:
        # hub client at the origin, facilities on both sides of it along u,
        # a dense client region at 2u with its own facilities beyond at 3u
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        jit = s / 50
        anchors = np.array([-1.0, 1.0, 3.0])
        fxy = np.outer(anchors[np.arange(nf) % 3], u) * s + rng.normal(0, jit, size=(nf, d))
        cxy = np.outer(np.r_[0.0, np.full(nc - 1, 2.0)], u) * s
        cxy[1:] += rng.normal(0, jit, size=(nc - 1, d))
    costs = rng.uniform(spec.cost_range[0], spec.cost_range[1], size=nf)
    return Instance.from_arrays(fxy, costs, cxy)


# -- hardness construction ---------------------------------------------------

@dataclass(frozen=True)
class GraphInput:
    n_vertices: int
    edges: tuple

    def __post_init__(self):
        if self.n_vertices < 1:
            raise InputError("graph needs at least one vertex")
        seen = set()
        norm_edges = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InputError(f"self-loop at {u}")
            if not (1 <= u <= self.n_vertices and 1 <= v <= self.n_vertices):
                raise InputError(f"edge ({u},{v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputError(f"duplicate edge {key}")
            seen.add(key)
            norm_edges.append(key)
        object.__setattr__(self, "edges", tuple(norm_edges))


def parse_graph(text: str) -> GraphInput:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
    except (IndexError, ValueError):
        raise InputError("graph file must be 'n m' followed by m lines 'u v'") from None
    if len(edges) != m:
        raise InputError(f"header says {m} edges, found {len(edges)}")
    return GraphInput(n, tuple(edges))


def read_graph(path) -> GraphInput:
    try:
        return parse_graph(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def gamma_corr(rho: float, mu: float) -> float:
    """P[X <= t, Y <= t] for standard normals with correlation rho, t = Phi^-1(mu).

    The inner integral over y is a normal cdf, so only the outer integral
    is done numerically.
    """
    if not (-1 <= rho <= 1 and 0 <= mu <= 1):
        raise InputError("gamma_corr needs rho in [-1,1] and mu in [0,1]")
    if mu == 0:
        return 0.0
    if mu == 1:
        return 1.0
    if rho == 1:
        return mu
    if rho == -1:
        return max(0.0, 2 * mu - 1)
    t = norm.ppf(mu)
    sq = math.sqrt(1 - rho * rho)
    val, _ = integrate.quad(lambda x: norm.pdf(x) * norm.cdf((t - rho * x) / sq), -np.inf, t,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return min(max(val, 0.0), mu)


def hardness_lambda(graph: GraphInput, q: float, h: float = 1e-5) -> float:
    rho = -q / (1 - q)
    deriv = (gamma_corr(rho, q + h) - gamma_corr(rho, q - h)) / (2 * h)
    return len(graph.edges) / graph.n_vertices * (math.sqrt(3) - 1) * deriv


def generate_hardness(graph: GraphInput, q: float, lambda_override=None) -> Instance:
    """Facility i at e_i with cost lambda, client (u, v) at e_u + e_v."""
    if not graph.edges:
        raise InputError("hardness construction needs at least one edge")
    if not (0 < q < 0.5):
        raise InputError("q must lie in (0, 1/2)")
    lam = hardness_lambda(graph, q) if lambda_override is None else float(lambda_override)
    if lam < 0:
        raise InputError("lambda must be nonnegative")
    n = graph.n_vertices
    fxy = np.eye(n)
    cxy = np.zeros((len(graph.edges), n))
    for k, (u, v) in enumerate(graph.edges):
        cxy[k, u - 1] = cxy[k, v - 1] = 1.0
    return Instance.from_arrays(fxy, np.full(n, lam), cxy)


def completeness_cost(graph: GraphInput, q: float, lam: float) -> float:
    """Cost lambda (1-q) n + m of the completeness-case solution."""
    return lam * (1 - q) * graph.n_vertices + len(graph.edges)
