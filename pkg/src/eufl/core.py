"""Problem data model: points, instances, distances and the text format."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Malformed or out-of-contract input."""


class SolverError(RuntimeError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class ConsistencyError(RuntimeError):
    """An internal invariant that should be impossible was violated."""


@dataclass(frozen=True)
class Point:
    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) < 1:
            raise InputError("a point needs at least one coordinate")
        if not all(math.isfinite(v) for v in c):
            raise InputError(f"non-finite coordinate in {c}")
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, *coords) -> "Point":
        return cls(tuple(coords))

    @property
    def dim(self) -> int:
        return len(self.coords)


def distance(a: Point, b: Point) -> float:
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return math.dist(a.coords, b.coords)


@dataclass(frozen=True)
class Facility:
    id: int
    location: Point
    open_cost: float


@dataclass(frozen=True)
class Client:
    id: int
    location: Point


@dataclass(frozen=True)
class Instance:
    """Euclidean UFL instance.  Facilities and clients are kept sorted by id.

    Array views (`fxy`, `cxy`, `costs`, `dist`) are built lazily on first use.
    """

    facilities: tuple
    clients: tuple

    def __post_init__(self):
        fac = tuple(sorted(self.facilities, key=lambda f: f.id))
        cli = tuple(sorted(self.clients, key=lambda c: c.id))
        if not fac:
            raise InputError("instance has no facilities")
        if not cli:
            raise InputError("instance has no clients")
        dims = {p.location.dim for p in fac + cli}
        if len(dims) != 1:
            raise InputError(f"points do not share a dimension: {sorted(dims)}")
        if len({f.id for f in fac}) != len(fac):
            raise InputError("duplicate facility id")
        if len({c.id for c in cli}) != len(cli):
            raise InputError("duplicate client id")
        for f in fac:
            if not (math.isfinite(f.open_cost) and f.open_cost >= 0):
                raise InputError(f"facility {f.id} has invalid cost {f.open_cost}")
        object.__setattr__(self, "facilities", fac)
        object.__setattr__(self, "clients", cli)

    @classmethod
    def from_arrays(cls, fxy, costs, cxy, fids=None, cids=None) -> "Instance":
        fxy = np.atleast_2d(np.asarray(fxy, dtype=float))
        cxy = np.atleast_2d(np.asarray(cxy, dtype=float))
        costs = np.asarray(costs, dtype=float).reshape(-1)
        if len(costs) != len(fxy):
            raise InputError("cost vector length differs from facility count")
        fids = range(1, len(fxy) + 1) if fids is None else fids
        cids = range(1, len(cxy) + 1) if cids is None else cids
        fac = tuple(Facility(int(i), Point(tuple(p)), float(c)) for i, p, c in zip(fids, fxy, costs))
        cli = tuple(Client(int(i), Point(tuple(p))) for i, p in zip(cids, cxy))
        return cls(fac, cli)

    @property
    def dim(self) -> int:
        return self.facilities[0].location.dim

    @property
    def nf(self) -> int:
        return len(self.facilities)

    @property
    def nc(self) -> int:
        return len(self.clients)

    @cached_property
    def fids(self) -> np.ndarray:
        return np.array([f.id for f in self.facilities], dtype=np.int64)

    @cached_property
    def cids(self) -> np.ndarray:
        return np.array([c.id for c in self.clients], dtype=np.int64)

    @cached_property
    def fxy(self) -> np.ndarray:
        return np.array([f.location.coords for f in self.facilities])

    @cached_property
    def cxy(self) -> np.ndarray:
        return np.array([c.location.coords for c in self.clients])

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([f.open_cost for f in self.facilities])

    @cached_property
    def dist(self) -> np.ndarray:
        """Facility-by-client distance matrix."""
        diff = self.fxy[:, None, :] - self.cxy[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def cost_of(self, open_idx) -> tuple[float, float]:
        """(facility cost, connection cost) of opening the given facility indices."""
        open_idx = np.asarray(sorted(set(int(i) for i in open_idx)), dtype=np.int64)
        if len(open_idx) == 0:
            return 0.0, math.inf
        fcost = float(self.costs[open_idx].sum())
        ccost = float(self.dist[open_idx].min(axis=0).sum())
        return fcost, ccost


# -- text format ------------------------------------------------------------

def format_instance(inst: Instance) -> str:
    out = ["UFL 1", f"dim {inst.dim}", f"facilities {inst.nf}"]
    for f in inst.facilities:
        out.append(" ".join([str(f.id), repr(float(f.open_cost))] + [repr(v) for v in f.location.coords]))
    out.append(f"clients {inst.nc}")
    for c in inst.clients:
        out.append(" ".join([str(c.id)] + [repr(v) for v in c.location.coords]))
    return "\n".join(out) + "\n"


def parse_instance(text: str) -> Instance:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    it = iter(lines)

    def expect(keyword):
        try:
            ln = next(it)
        except StopIteration:
            raise InputError(f"unexpected end of input, wanted '{keyword}'") from None
        parts = ln.split()
        if parts[0] != keyword or len(parts) != 2:
            raise InputError(f"expected '{keyword} <n>', got '{ln}'")
        return parts[1]

    try:
        if expect("UFL") != "1":
            raise InputError("unsupported format version")
        d = int(expect("dim"))
        nf = int(expect("facilities"))
        fac = []
        for _ in range(nf):
            parts = next(it).split()
            if len(parts) != d + 2:
                raise InputError(f"facility line has {len(parts)} fields, wanted {d + 2}")
            fac.append(Facility(int(parts[0]), Point(tuple(float(v) for v in parts[2:])), float(parts[1])))
        nc = int(expect("clients"))
        cli = []
        for _ in range(nc):
            parts = next(it).split()
            if len(parts) != d + 1:
                raise InputError(f"client line has {len(parts)} fields, wanted {d + 1}")
            cli.append(Client(int(parts[0]), Point(tuple(float(v) for v in parts[1:]))))
    except StopIteration:
        raise InputError("truncated instance file") from None
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from None
    if next(it, None) is not None:
        raise InputError("trailing content after client list")
    return Instance(tuple(fac), tuple(cli))


def read_instance(path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return parse_instance(text)


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(format_instance(inst))


# -- integral solutions -------------------------------------------------------

@dataclass(frozen=True)
class RoundedSolution:
    open_copies: frozenset
    open_parents: tuple        # facility ids, ascending
    assignment: dict           # client id -> facility id
    facility_cost: float
    connection_cost: float
    total_cost: float
    rng_seed: int = 0

    def to_tsv(self) -> str:
        rows = [f"open\t{f}" for f in self.open_parents]
        rows += [f"assign\t{c}\t{f}" for c, f in sorted(self.assignment.items())]
        rows.append(f"# facility_cost\t{self.facility_cost!r}")
        rows.append(f"# connection_cost\t{self.connection_cost!r}")
        rows.append(f"# total_cost\t{self.total_cost!r}")
        return "\n".join(rows) + "\n"


def solution_from_open(inst: Instance, open_idx, rng_seed: int = 0, open_copies=frozenset()) -> RoundedSolution:
    """Nearest-open assignment (ties to the lowest facility id)."""
    idx = np.array(sorted(set(int(i) for i in open_idx)), dtype=np.int64)
    if len(idx) == 0:
        raise InputError("no facility is open")
    sub = inst.dist[idx]
    near = idx[np.argmin(sub, axis=0)]
    fcost = float(inst.costs[idx].sum())
    ccost = float(sub.min(axis=0).sum())
    assignment = {int(inst.cids[j]): int(inst.fids[near[j]]) for j in range(inst.nc)}
    return RoundedSolution(frozenset(open_copies), tuple(int(inst.fids[i]) for i in idx), assignment,
                           fcost, ccost, fcost + ccost, rng_seed)
