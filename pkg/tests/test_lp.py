import numpy as np
import pytest
from scipy.optimize import linprog

from eufl.core import Instance, SolverError
from eufl.lp import dump_tsv, simplex, solve_relaxation, support_graph

from conftest import seeded


def highs_ufl(inst):
    """Reference optimum from scipy's HiGHS on the same relaxation."""
    nf, nc = inst.nf, inst.nc
    c = np.concatenate([inst.dist.reshape(-1), inst.costs])
    A_eq = np.zeros((nc, nf * nc + nf))
    for j in range(nc):
        A_eq[j, j:nf * nc:nc] = 1
    A_ub = np.zeros((nf * nc, nf * nc + nf))
    for i in range(nf):
        for j in range(nc):
            A_ub[i * nc + j, i * nc + j] = 1
            A_ub[i * nc + j, nf * nc + i] = -1
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(nf * nc), A_eq=A_eq, b_eq=np.ones(nc), method="highs")
    return res.fun


def test_simplex_small():
    # min -x - y  s.t. x + y + s = 1
    res = simplex(np.array([[1.0, 1.0, 1.0]]), np.array([1.0]), np.array([-1.0, -2.0, 0.0]))
    assert res.objective == pytest.approx(-2.0)
    assert res.z[1] == pytest.approx(1.0)
    assert res.duals[0] == pytest.approx(-2.0)


def test_simplex_infeasible_and_unbounded():
    with pytest.raises(SolverError):
        simplex(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]), np.zeros(2))
    with pytest.raises(SolverError):
        simplex(np.array([[1.0, -1.0]]), np.array([1.0]), np.array([0.0, -1.0]))


def test_single_facility():
    inst = Instance.from_arrays([[0.0, 0.0]], [2.0], [[1.0, 0.0], [0.0, 3.0]])
    fs, dual, dec = solve_relaxation(inst)
    assert fs.objective == pytest.approx(6.0)
    assert fs.y[0] == pytest.approx(1.0)
    np.testing.assert_allclose(dec.Cstar, [1.0, 3.0])
    assert dec.F_total == pytest.approx(2.0)


def test_zero_cost_colocated():
    inst = Instance.from_arrays([[0.0], [5.0]], [0.0, 0.0], [[0.0], [5.0]])
    fs, _, dec = solve_relaxation(inst)
    assert fs.objective == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_against_highs(seed):
    inst = seeded(seed, nf=3 + seed % 5, nc=4 + seed % 7, dim=1 + seed % 3, cost=(0, 1.5))
    fs, dual, dec = solve_relaxation(inst)
    assert fs.objective == pytest.approx(highs_ufl(inst), abs=1e-9)
    # strong duality and feasibility
    assert abs(fs.objective - dual.objective) <= 1e-6 * max(1, fs.objective)
    np.testing.assert_allclose(fs.x.sum(axis=0), 1.0, atol=1e-9)
    assert np.all(fs.x <= fs.y[:, None] + 1e-9)
    # dual feasibility: v_j - w_ij <= d_ij, sum_j w_ij <= f_i, w >= 0
    assert np.all(dual.v[None, :] - dual.w <= inst.dist + 1e-9)
    assert np.all(dual.w.sum(axis=1) <= inst.costs + 1e-9)
    assert np.all(dual.w >= -1e-9)
    np.testing.assert_allclose(dec.vstar, dual.v, atol=1e-12)


def test_support_graph_and_dump(tiny):
    fs, dual, _ = solve_relaxation(tiny)
    edges, nb = support_graph(fs)
    assert set(edges) == {1, 2}
    assert all(j not in nb[j] for j in nb)
    text = dump_tsv(fs, dual)
    assert text.count("\ny\t") + text.startswith("y\t") == 2
    assert "v\t3\t" in text
