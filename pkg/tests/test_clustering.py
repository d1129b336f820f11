import math

import numpy as np
import pytest

from eufl.augment import augment
from eufl.clustering import (Blocks, block_index, build_blocks, check_partition, classify_normal, cluster_conn,
                             cluster_greedy, cluster_homogeneous, cut_intervals, is_homogeneous, reroute_all,
                             reroute_cost, saving_spending, small_arm_value, targets)
from eufl.core import InputError, Instance
from eufl.lp import solve_relaxation
from eufl.params import INFLATED, PAPER

from conftest import conn_dominant_suite, seeded


def build(inst, gamma=1.6774):
    fs, _, dec = solve_relaxation(inst)
    return augment(fs, dec, gamma, inst)


def reroute_oracle(jp, j, aug):
    """Enumerate copies one by one."""
    num = den = numz = 0.0
    for k in range(aug.n_copies):
        if aug.close[k, jp] and not aug.support[k, j]:
            den += aug.share[k]
            num += aug.share[k] * aug.dist[k, j]
            numz += aug.share[k] * aug.dist[k, jp]
    return (num / den, numz / den) if den > 0 else (0.0, 0.0)


@pytest.mark.parametrize("seed", range(8))
def test_reroute_against_oracle(seed):
    aug = build(seeded(seed, nf=4, nc=5, cost=(0.3, 2.0)))
    for jp in range(aug.nc):
        for j in range(aug.nc):
            c, z = reroute_cost(jp, j, aug)
            rc, rz = reroute_oracle(jp, j, aug)
            assert c == pytest.approx(rc, abs=1e-12) and z == pytest.approx(rz, abs=1e-12)
            # triangle inequality on the weighted means
            dj = float(np.linalg.norm(aug.inst.cxy[j] - aug.inst.cxy[jp]))
            assert c <= dj + z + 1e-9
        assert reroute_cost(jp, jp, aug) == (0.0, 0.0)


def test_reroute_disjoint_singletons():
    # j' served by facility A, j by facility B; distances d(j,A)=4, d(j',A)=3
    inst = Instance.from_arrays([[0.0], [7.0]], [0.0, 0.0], [[3.0], [4.0 + 0.0]])
    aug = build(inst)
    # j' at 3 uses A (dist 3); j at 4 uses B (dist 3) not A
    c, z = reroute_cost(0, 1, aug)
    assert (c, z) == (pytest.approx(4.0), pytest.approx(3.0))


def test_classify_normal_cases():
    aug = build(seeded(1))
    aug.Cval[:] = 1.0
    aug.Mval[:] = 1.0
    assert classify_normal(0, aug, PAPER)
    aug.Cval[0], aug.Mval[0] = 0.0, 1.0
    assert not classify_normal(0, aug, PAPER)
    th = (PAPER.K6 + 1 - aug.gamma) / (2 * PAPER.K6 + 2 - aug.gamma)
    aug.Cval[0] = th / (1 - th)     # boundary: C = theta (C + M)
    assert classify_normal(0, aug, PAPER)


def test_small_arm_value():
    # z = 0 reduces to v*^2 < d^2
    assert small_arm_value(1.0, 2.0, 0.0, PAPER)
    assert not small_arm_value(3.0, 2.0, 0.0, PAPER)
    # zero F*: v* = C*; with the right side positive the arm is small
    assert small_arm_value(0.0, 1.0, 0.5, PAPER)


def test_saving_spending_alone():
    aug = build(seeded(3))
    nplus, nminus, sv, sp = saving_spending(0, {0}, aug, PAPER, PAPER.eps1)
    assert nplus == {0} and not nminus and sp == 0.0
    assert sv == pytest.approx(targets(aug, PAPER.eps1)[0])


@pytest.mark.parametrize("seed", range(6))
def test_saving_spending_oracle(seed):
    aug = build(seeded(seed, nf=4, nc=8, cost=(0.2, 1.0)))
    nb = aug.neighbors()
    el = set(range(aug.nc))
    for jp in range(aug.nc):
        nplus, nminus, sv, sp = saving_spending(jp, el, aug, PAPER, PAPER.eps1)
        tgt = targets(aug, PAPER.eps1)
        for j in range(aug.nc):
            slack = tgt[j] - reroute_oracle(jp, j, aug)[0]
            assert (j in nplus) == (slack >= -PAPER.cmp_tol)
            assert (j in nminus) == (slack < -PAPER.cmp_tol and bool(nb[jp, j]))
        assert set(np.flatnonzero(nb[jp])) <= set(nplus | nminus)


def test_greedy_structure():
    # two clients sharing one facility; then two far apart
    inst = Instance.from_arrays([[0.0]], [1.0], [[1.0], [2.0]])
    res = cluster_greedy(range(2), build(inst), PAPER)
    assert len(res.clusters) == 1 and res.clusters[0].center == 0
    inst = Instance.from_arrays([[0.0], [100.0]], [0.0, 0.0], [[0.0], [100.0]])
    res = cluster_greedy(range(2), build(inst), PAPER)
    assert len(res.clusters) == 2


@pytest.mark.parametrize("seed", range(25))
def test_greedy_reroute_bound(seed):
    aug = build(seeded(seed, nf=3 + seed % 5, nc=5 + seed % 7, cost=(0, 1 + seed % 3)))
    res = cluster_greedy(range(aug.nc), aug, PAPER)
    assert check_partition(res, aug.nc)
    tgt = targets(aug, 0.0)
    for cl in res.clusters:
        cost, _ = reroute_all(cl.center, aug)
        for j in cl.members:
            assert cost[j] <= tgt[j] + PAPER.lp_tol


def test_homogeneous_checks():
    aug = build(seeded(5, nf=4, nc=6))
    with pytest.raises(InputError):
        cluster_homogeneous(set(), aug, PAPER)
    ok, s, bad = is_homogeneous(range(aug.nc), aug, PAPER)
    if not ok:
        with pytest.raises(InputError, match="not homogeneous"):
            cluster_homogeneous(range(aug.nc), aug, PAPER)
    res = cluster_homogeneous({2}, aug, PAPER)
    assert [c.center for c in res.clusters] == [2]


def test_homogeneous_all_weird_matches_greedy_bound():
    aug = build(seeded(6, nf=4, nc=6))
    aug.Cval[:] = 0.0            # every client weird
    aug.Mval[:] = 1.0
    res = cluster_homogeneous(range(aug.nc), aug, PAPER)
    assert all(t.rule == "homogeneous-weird" for t in res.trace)
    assert check_partition(res, aug.nc)


def test_block_index():
    assert block_index(0.0, 1.0, 0.1) == 0
    assert block_index(1.0, 1.0, 0.1) == 1
    assert block_index(1.0999, 1.0, 0.1) == 1
    assert block_index(1.1001, 1.0, 0.1) == 2
    # paper delta' gives indices beyond int64
    assert block_index(2.0, 1.0, 7e-32) > 2 ** 63


def test_cut_intervals_examples():
    zero = Blocks(0.0, {0: [0, 1]}, {0: 0.0}, {0: 0.0})
    assert [(i.l, i.r, i.reward) for i in cut_intervals(zero, PAPER)] == [(0, 0, 0.0)]
    # a lone nonempty block pairs with the empty buffer block B0 once l reaches 0
    one = Blocks(1.0, {1: [0]}, {1: 5.0}, {1: 1.0})
    assert [(i.l, i.r, i.reward) for i in cut_intervals(one, PAPER)] == [(0, 1, 5.0)]
    two = Blocks(1.0, {1: [0], 2: [1]}, {1: 0.0, 2: 10.0}, {1: 0.0, 2: 0.0})
    assert [(i.l, i.r, i.reward) for i in cut_intervals(two, PAPER)] == [(1, 2, 10.0)]
    fac = Blocks(1.0, {1: [0], 2: [1]}, {1: 1.0, 2: 1.0}, {1: 5.0, 2: 5.0})
    iv = cut_intervals(fac, PAPER)
    assert [(i.l, i.r) for i in iv] == [(1, 1), (2, 2)]


def test_cut_intervals_reward_condition():
    rng = np.random.default_rng(0)
    for _ in range(50):
        ids = sorted(set(rng.integers(1, 12, size=6).tolist()))
        C = {n: float(rng.exponential()) for n in ids}
        F = {n: float(rng.exponential() * 0.3) for n in ids}
        blocks = Blocks(1.0, {n: [k] for k, n in enumerate(ids)}, C, F)
        iv = cut_intervals(blocks, INFLATED)
        covered = [n for i in iv for n in ids if i.l <= n <= i.r]
        assert sorted(covered) == ids              # disjoint and covering
        for i in iv:
            if i.size > 1:
                inside = [n for n in ids if i.l <= n <= i.r]
                assert sum(C[n] for n in inside) - C.get(i.l, 0) >= INFLATED.K3 * sum(F[n] for n in inside) - 1e-12


def test_conn_precondition():
    aug = build(seeded(0, cost=(5, 10)))
    with pytest.raises(InputError, match="connection-dominant"):
        cluster_conn(aug, PAPER)


@pytest.mark.parametrize("params", [PAPER, INFLATED], ids=["paper", "inflated"])
def test_conn_partition_and_bound(params):
    for s, inst, fs, _, dec in conn_dominant_suite(15, params):
        aug = augment(fs, dec, 1.6774, inst)
        res = cluster_conn(aug, params)
        assert check_partition(res, aug.nc)
        centers = [c.center for c in res.clusters]
        nb = aug.neighbors()
        assert not any(nb[a, b] for a in centers for b in centers)
        total = sum(reroute_all(c.center, aug)[0][sorted(c.members)].sum() for c in res.clusters)
        assert total <= targets(aug, 0.0).sum() + 1e-9
        tsv = res.to_tsv(inst.cids)
        assert tsv.count("\n") == 1 + len(res.clusters)


def test_blocks_partition():
    for s, inst, fs, _, dec in conn_dominant_suite(5, INFLATED):
        aug = augment(fs, dec, 1.7, inst)
        b = build_blocks(aug, INFLATED)
        assert sorted(j for m in b.members.values() for j in m) == list(range(aug.nc))
        for n, mem in b.members.items():
            for j in mem:
                assert block_index(aug.CM[j], b.s, INFLATED.delta_prime) == n or n == 0
