import numpy as np
import pytest

from eufl.core import Instance
from eufl.generators import GenSpec, generate_random
from eufl.lp import solve_relaxation
from eufl.params import PAPER


def seeded(seed, nf=5, nc=8, dim=2, cost=(0.0, 0.1), profile="uniform_box"):
    return generate_random(GenSpec(seed=seed, dim=dim, n_facilities=nf, n_clients=nc,
                                   cost_range=cost, profile=profile))


def conn_dominant_suite(n, params=PAPER, profile="uniform_box", start=0):
    """First n seeds (varying sizes) whose LP split is connection-dominant."""
    out = []
    s = start
    while len(out) < n:
        inst = seeded(s, nf=4 + s % 5, nc=6 + s % 7, dim=2 + s % 2, cost=(0.0, 0.05), profile=profile)
        fs, dual, dec = solve_relaxation(inst)
        if dec.C_total > params.K1 * dec.F_total:
            out.append((s, inst, fs, dual, dec))
        s += 1
    return out


@pytest.fixture
def tiny():
    # two facilities, three clients on a line
    return Instance.from_arrays([[0.0], [4.0]], [1.0, 2.0], [[0.5], [1.0], [3.5]])
