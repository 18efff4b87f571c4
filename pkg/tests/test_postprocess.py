import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import beta as beta_dist

from oracles import brute_sets_of_size
from rydmis.counting import enumerate_optima, mis_size
from rydmis.graph import UnitDiskGraph, deserialize, generate_instance
from rydmis.postprocess import (
    add_vertices, clopper_pearson, compute_metrics, greedy_cleanup, histogram_csv,
    reduce_violations, top_half_mean,
)

PATH3 = UnitDiskGraph(1, 3, [(0, 0), (0, 1), (0, 2)])
TRIANGLE = UnitDiskGraph(2, 2, [(0, 0), (0, 1), (1, 0)])
DATA = Path(__file__).parent / "data"


def edge_violations(x, edges):
    return sum(1 for i, j in edges if x[i] and x[j])


def is_maximal(x, graph):
    return all(x[v] or any(x[j] for j in graph.neighbors[v]) for v in range(graph.n))


instances = st.builds(
    generate_instance,
    st.integers(1, 5), st.integers(1, 4), st.floats(0.5, 1.0), st.integers(0, 2**32 - 1),
).filter(lambda g: g.n <= 20)


def test_reduce_keeps_independent_input():
    x = np.array([1, 0, 1], dtype=np.uint8)
    assert np.array_equal(reduce_violations(x, PATH3, 0), x)


def test_reduce_triangle_leaves_one_vertex():
    for seed in range(20):
        assert reduce_violations([1, 1, 1], TRIANGLE, seed).sum() == 1


def test_reduce_path_removes_the_middle():
    # the middle vertex carries two violations, the ends one each
    assert reduce_violations([1, 1, 1], PATH3, 0).tolist() == [1, 0, 1]


@settings(max_examples=60, deadline=None)
@given(instances, st.integers(0, 2**32 - 1))
def test_reduce_output_is_independent_subset(g, seed):
    rng = np.random.default_rng(seed)
    edges = g.edges.tolist()
    for _ in range(20):
        x = rng.integers(0, 2, g.n).astype(np.uint8)
        y = reduce_violations(x, g, rng)
        assert edge_violations(y, edges) == 0
        assert np.all(y <= x)
        assert np.array_equal(reduce_violations(y, g, rng), y)


@settings(max_examples=40, deadline=None)
@given(instances, st.integers(0, 2**32 - 1))
def test_add_is_monotone_and_maximal(g, seed):
    rng = np.random.default_rng(seed)
    x = reduce_violations(rng.integers(0, 2, g.n), g, rng)
    y = add_vertices(x, g, rng)
    assert np.all(y >= x)
    assert edge_violations(y, g.edges.tolist()) == 0
    assert is_maximal(y, g)
    assert np.array_equal(add_vertices(y, g, rng), y)


def test_add_rejects_dependent_input():
    with pytest.raises(ValueError, match="not an independent set"):
        add_vertices([1, 1, 0], PATH3)


def test_add_on_empty_path():
    # of the six vertex orders, four start at an end and reach {v1, v3}
    orders = list(itertools.permutations(range(3)))
    assert sum(1 for o in orders if o[0] != 1) == 4
    sizes = [int(add_vertices([0, 0, 0], PATH3, seed).sum()) for seed in range(300)]
    assert min(sizes) >= 1
    assert sum(s == 2 for s in sizes) / len(sizes) >= 0.99


def test_greedy_cleanup_is_maximal_independent():
    g = generate_instance(6, 6, 0.8, 4)
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = greedy_cleanup(rng.integers(0, 2, g.n), g, rng)
        assert edge_violations(y, g.edges.tolist()) == 0 and is_maximal(y, g)


def test_metrics_all_optimal():
    opt = enumerate_optima(PATH3, 2)
    rep = compute_metrics([[1, 0, 1]] * 5, PATH3, opt)
    assert (rep.r, rep.r_05, rep.p_mis, rep.mean_hamming) == (1.0, 1.0, 1.0, 0.0)
    assert rep.histogram == {2: 5}


def test_metrics_half_and_half():
    g = generate_instance(5, 5, 0.8, 2)
    k = mis_size(g)
    opt = enumerate_optima(g, k)
    best = opt.configurations[0]
    worse = best.copy()
    worse[np.flatnonzero(best)[0]] = 0
    rep = compute_metrics([best, worse] * 10, g, opt)
    assert rep.r == pytest.approx(1 - 1 / (2 * k))
    assert rep.r_05 == 1.0
    assert rep.p_mis == 0.5
    assert sum(rep.histogram.values()) == 20


def test_metrics_rejects_empty():
    with pytest.raises(ValueError, match="empty shot list"):
        compute_metrics(np.zeros((0, 3)), PATH3, enumerate_optima(PATH3, 2))


def test_violation_limit_filter():
    g = generate_instance(5, 5, 1.0, 0)
    opt = enumerate_optima(g, mis_size(g))
    full = np.ones(g.n, dtype=np.uint8)
    rep = compute_metrics([full, opt.configurations[0]], g, opt, limit_violations=True)
    assert rep.n_excluded == 1 and rep.n_shots == 1 and rep.p_mis == 1.0
    assert compute_metrics([full, opt.configurations[0]], g, opt).n_excluded == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=40))
def test_top_half_dominates_mean(sizes):
    assert top_half_mean(sizes) >= np.mean(sizes) - 1e-12


def test_addition_only_helps():
    g = generate_instance(5, 5, 0.8, 6)
    opt = enumerate_optima(g, mis_size(g))
    rng = np.random.default_rng(1)
    shots = rng.integers(0, 2, (200, g.n))
    plain = compute_metrics(shots, g, opt, rng=1)
    added = compute_metrics(shots, g, opt, rng=1, add=True)
    assert added.p_mis >= plain.p_mis
    assert added.r >= plain.r


def test_clopper_pearson_against_beta_quantiles():
    for k, n in [(0, 10), (3, 10), (10, 10), (17, 50)]:
        lo, hi = clopper_pearson(k, n)
        a = 0.32
        want_lo = 0.0 if k == 0 else beta_dist.ppf(a / 2, k, n - k + 1)
        want_hi = 1.0 if k == n else beta_dist.ppf(1 - a / 2, k + 1, n - k)
        assert lo == pytest.approx(want_lo, abs=1e-9)
        assert hi == pytest.approx(want_hi, abs=1e-9)


def test_fixture_recomputation():
    data = json.loads((DATA / "shots50.json").read_text())
    g = deserialize(json.dumps(data["instance"]))
    shots = np.array([[int(c) for c in s] for s in data["shots"]], dtype=np.uint8)
    edges = g.edges.tolist()
    assert all(edge_violations(s, edges) == 0 for s in shots)

    k = max(i for i in range(g.n + 1) if brute_sets_of_size(g.n, edges, i))
    optima = brute_sets_of_size(g.n, edges, k)
    sizes = sorted((int(s.sum()) for s in shots), reverse=True)
    hits = sum(tuple(int(v) for v in s) in optima for s in shots)
    hd = [min(sum(a != b for a, b in zip(s, o)) for o in optima) / g.n for s in shots]
    top = sizes[: math.ceil(len(sizes) / 2)]

    rep = compute_metrics(shots, g, enumerate_optima(g, mis_size(g)))
    assert rep.mis_size == k
    assert rep.r == pytest.approx(sum(sizes) / len(sizes) / k)
    assert rep.r_05 == pytest.approx(sum(top) / len(top) / k)
    assert rep.p_mis == pytest.approx(hits / 50)
    assert rep.mean_hamming == pytest.approx(sum(hd) / 50)
    assert rep.histogram == {s: sizes.count(s) for s in set(sizes)}
    lo = beta_dist.ppf(0.16, hits, 50 - hits + 1)
    hi = beta_dist.ppf(0.84, hits + 1, 50 - hits)
    assert rep.p_mis_interval == pytest.approx((lo, hi))


def test_report_serializes():
    rep = compute_metrics([[1, 0, 1], [0, 1, 0]], PATH3, enumerate_optima(PATH3, 2))
    d = rep.as_dict()
    assert d["histogram"] == {"1": 1, "2": 1}
    assert json.loads(json.dumps(d))["p_mis"] == 0.5
    assert histogram_csv(rep) == "size,count\r\n1,1\r\n2,1\r\n"
