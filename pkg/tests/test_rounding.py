import math
from pathlib import Path

import numpy as np
import pytest

from eufl.augment import augment
from eufl.clustering import Cluster, ClusteringResult, cluster_conn, cluster_greedy
from eufl.core import InputError, Instance
from eufl.game import GAMMA1, GAMMA2, KAPPA_LI, THETA_LI, GammaDistribution
from eufl.lp import solve_relaxation
from eufl.params import INFLATED, PAPER
from eufl.rounding import (closest_open_bound_check, estimate, make_layout, open_copies, round_once, run_bifactor,
                           run_unifactor, trial_stream, unifactor_path)
from eufl.verification import brute_force_opt

from conftest import conn_dominant_suite, seeded

DATA = Path(__file__).parent / "data"


def setup(inst, gamma=1.6774):
    fs, _, dec = solve_relaxation(inst)
    aug = augment(fs, dec, gamma, inst)
    return aug, cluster_greedy(range(inst.nc), aug, PAPER)


def test_single_pair():
    inst = Instance.from_arrays([[0.0, 0.0]], [1.5], [[3.0, 4.0]])
    aug, cl = setup(inst)
    for s in range(5):
        sol = round_once(aug, cl, s)
        assert sol.open_parents == (1,)
        assert sol.total_cost == pytest.approx(6.5)


def test_one_lottery_winner_per_cluster():
    inst = seeded(8, nf=6, nc=10, cost=(0.2, 1.0))
    aug, cl = setup(inst)
    layout = make_layout(aug, cl)
    U = np.stack([trial_stream(3, t).random(layout.width) for t in range(200)])
    op = open_copies(aug, layout, U)
    for c in cl.clusters:
        assert np.all(op[:, aug.close[:, c.center]].sum(axis=1) == 1)


def test_invalid_partition():
    aug, cl = setup(seeded(1))
    bad = ClusteringResult(cl.clusters[:-1] if len(cl.clusters) > 1 else [Cluster(0, frozenset())], [])
    with pytest.raises(InputError):
        round_once(aug, bad, 0)


def test_golden_rounding():
    from eufl.core import read_instance
    inst = read_instance(DATA / "golden_seed1.ufl")
    aug, cl = setup(inst)
    sol = round_once(aug, cl, 7)
    assert sol.to_tsv() == (DATA / "golden_seed1_round7.tsv").read_text()
    assert round_once(aug, cl, 7) == sol


def test_deterministic_when_every_mass_is_one():
    # each client sits on its own facility, LP integral, every close copy has ybar 1
    inst = Instance.from_arrays([[0.0], [10.0]], [0.1, 0.1], [[0.0], [10.0]])
    aug, cl = setup(inst)
    diag = estimate(aug, cl, 50, 0)
    np.testing.assert_array_equal(diag.p_close, 1.0)
    assert diag.stderr < 1e-15
    assert np.ptp(diag.costs) < 1e-15


@pytest.mark.parametrize("seed", range(10))
def test_assignment_optimal_and_above_opt(seed):
    inst = seeded(seed, nf=5, nc=7, cost=(0, 1))
    aug, cl = setup(inst)
    opt = brute_force_opt(inst).opt_cost
    d = inst.dist
    idx = {int(f): i for i, f in enumerate(inst.fids)}
    for t in range(20):
        sol = round_once(aug, cl, seed, t)
        assert sol.total_cost >= opt - 1e-9
        opened = [idx[f] for f in sol.open_parents]
        for j, cid in enumerate(inst.cids):
            assert d[idx[sol.assignment[int(cid)]], j] <= d[opened, j].min() + 1e-15
        assert sol.total_cost == pytest.approx(sol.facility_cost + sol.connection_cost)


def test_trial_streams_independent_of_count():
    inst = seeded(4, nf=6, nc=9, cost=(0.1, 1))
    aug, cl = setup(inst)
    a = estimate(aug, cl, 10, 5).costs
    b = estimate(aug, cl, 30, 5).costs
    np.testing.assert_array_equal(a, b[:10])
    assert round_once(aug, cl, 5, 3).total_cost == pytest.approx(b[3])


def test_probability_facts():
    for s, inst, fs, _, dec in conn_dominant_suite(8, PAPER):
        for gamma in (1.3, 1.6774, 1.9):
            aug = augment(fs, dec, gamma, inst)
            cl = cluster_greedy(range(inst.nc), aug, PAPER)
            diag = estimate(aug, cl, 4000, s)
            T = diag.trials
            sc = np.sqrt(diag.p_close * (1 - diag.p_close) / T)
            pcd = diag.p_close + diag.p_distant
            scd = np.sqrt(pcd * (1 - pcd) / T)
            assert np.all(diag.p_close >= 1 - 1 / math.e - 3 * sc)
            assert np.all(pcd >= 1 - math.exp(-gamma) - 3 * scd)
            np.testing.assert_allclose(diag.p_close + diag.p_distant + diag.p_far, 1.0)


def test_bifactor_branches():
    inst = seeded(0, nf=4, nc=6, cost=(5, 10))
    sol, diag = run_bifactor(inst, PAPER, 1.6774, 100, 0)
    assert diag.branch == "jms"
    s, inst, *_ = conn_dominant_suite(1, PAPER)[0]
    sol, diag = run_bifactor(inst, PAPER, 1.6774, 500, 1)
    assert diag.branch == "conn"
    assert sol.total_cost == pytest.approx(diag.costs.min())
    bound = 1.6774 * diag.Fstar + (1 + 2 * math.exp(-1.6774)) * diag.Cstar
    assert diag.mean <= bound + 3 * diag.stderr


def test_unifactor_paths():
    assert unifactor_path(GAMMA1, True, PAPER) == "greedy"
    assert unifactor_path(1.0, True, PAPER) == "greedy"
    assert unifactor_path(1.8, True, PAPER) == "conn"
    assert unifactor_path(2.01, True, PAPER) == "greedy"
    assert unifactor_path(None, True, PAPER) == "jms"
    assert unifactor_path(1.8, False, PAPER) == "jms"
    s, inst, *_ = conn_dominant_suite(1, PAPER)[0]
    sol, rep = run_unifactor(inst, PAPER, 60, 2)
    assert sum(rep.branch_counts.values()) == 60
    for p, g in zip(rep.paths, rep.gammas):
        assert (g is None) == (p == "jms")
        if p == "conn":
            assert 1.6 <= g <= 2
    assert rep.best_trial < 60
    assert sol.total_cost <= rep.mean + 1e-12


def test_mixture_sampling_weights():
    dist = GammaDistribution.mu2(1e-3)
    u = np.random.default_rng(0).random(100_000)
    draws = [dist.sample(x) for x in u]
    n = len(draws)
    checks = [
        (sum(g is None for g in draws), KAPPA_LI),
        (sum(g == GAMMA1 for g in draws), (1 - 1e-3) * THETA_LI),
        (sum(g is not None and GAMMA1 < g <= GAMMA2 for g in draws), (1 - 1e-3) * (1 - KAPPA_LI - THETA_LI)),
        (sum(g == 1.0 for g in draws), 1e-3 * (1 - KAPPA_LI)),
    ]
    for count, p in checks:
        assert abs(count / n - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1e-12


def test_closest_open_bound():
    inst = seeded(9, nf=6, nc=6, cost=(0.2, 1))
    aug, _ = setup(inst)
    k = int(np.flatnonzero(aug.close[:, 0])[0])
    assert closest_open_bound_check(aug, [k], 0, 1000, 0)
    ks = np.flatnonzero(aug.support[:, 0])
    assert closest_open_bound_check(aug, ks, 0, 100_000, 1)
    with pytest.raises(InputError):
        closest_open_bound_check(aug, [], 0, 10, 0)


def test_closest_open_equidistant():
    inst = Instance.from_arrays([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0], [[0.0, 0.0], [0.0, 0.1]])
    aug, _ = setup(inst)
    assert closest_open_bound_check(aug, range(aug.n_copies), 0, 20_000, 3)
