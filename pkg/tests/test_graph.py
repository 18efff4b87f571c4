import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import branch_mis, pair_edges
from rydmis.graph import (
    InstanceFormatError, PhysicalParams, UnitDiskGraph, count_violations, deserialize,
    generate_instance, serialize,
)
from rydmis.reduction import EmbeddedGraph, EmbeddingError, reduce_planar_degree3


def edge_set(g):
    return {tuple(e) for e in g.edges.tolist()}


def test_full_2x2_block_is_clique():
    g = generate_instance(2, 2, 1.0, 123)
    assert g.n == 4
    assert len(g.edges) == 6


def test_fig3_size():
    assert generate_instance(15, 15, 0.8, 5).n == 180


def test_4x4_seed7_edges_match_pairwise_check():
    g = generate_instance(4, 4, 0.8, 7)
    assert g.n == 13
    assert edge_set(g) == set(pair_edges(list(g.vertices), 1.7))


def test_generation_is_deterministic():
    a = generate_instance(6, 7, 0.8, 99)
    b = generate_instance(6, 7, 0.8, 99)
    assert a == b and a.vertices == b.vertices
    assert generate_instance(6, 7, 0.8, 100) != a


def test_empty_instance_rejected():
    with pytest.raises(ValueError, match="empty instance"):
        generate_instance(1, 1, 0.3, 0)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 9), st.integers(1, 9), st.floats(0.05, 1.0), st.integers(0, 2**63)
)
def test_generated_graph_invariants(rows, cols, filling, seed):
    if round(filling * rows * cols + 1e-12) == 0 or math.floor(filling * rows * cols + 0.5) == 0:
        return
    g = generate_instance(rows, cols, filling, seed)
    assert g.n == math.floor(filling * rows * cols + 0.5)
    assert list(g.vertices) == sorted(g.vertices)
    assert max(g.degree(), default=0) <= 8
    for i, j in g.edges:
        (r1, c1), (r2, c2) = g.vertices[i], g.vertices[j]
        assert (r1 - r2) ** 2 + (c1 - c2) ** 2 in (1, 2)
    for i, ns in enumerate(g.neighbors):
        assert all(i in g.neighbors[j] for j in ns)
    assert edge_set(g) == set(pair_edges(list(g.vertices), 1.7))


def test_physical_constants():
    p = PhysicalParams()
    # nearest and diagonal neighbour interactions in MHz
    assert p.interaction_mhz(1.0) == pytest.approx(862690 / 4.5**6)
    assert p.interaction_mhz(1.0) == pytest.approx(107, rel=0.05)
    assert p.interaction_mhz(math.sqrt(2)) == pytest.approx(13, rel=0.02)
    assert p.blockade_radius_um / p.lattice_constant_um == pytest.approx(1.72, abs=0.01)
    assert p.pi_time == pytest.approx(0.125)
    with pytest.raises(ValueError):
        PhysicalParams(rabi_frequency_mhz=0)


def test_graph_is_immutable():
    g = generate_instance(3, 3, 0.8, 1)
    with pytest.raises(AttributeError):
        g.n_rows = 5


def test_connectivity_metadata():
    g = UnitDiskGraph(1, 5, [(0, 0), (0, 1), (0, 3)])
    assert not g.is_connected()
    assert UnitDiskGraph(1, 3, [(0, 0), (0, 1), (0, 2)]).is_connected()


# serialization ---------------------------------------------------------------

def test_round_trip_is_byte_identical():
    g = generate_instance(15, 15, 0.8, 2024)
    text = serialize(g)
    assert text.endswith("\n")
    g2 = deserialize(text)
    assert serialize(g2) == text
    assert len(g2.edges) == len(g.edges)
    assert g2.vertices == g.vertices


def test_canonical_layout():
    g = generate_instance(2, 2, 1.0, 3)
    doc = json.loads(serialize(g))
    assert list(doc) == ["n_rows", "n_cols", "filling", "seed", "radius_factor", "vertices"]
    assert doc["vertices"] == [[0, 0], [0, 1], [1, 0], [1, 1]]


def _doc(**over):
    doc = {"n_rows": 4, "n_cols": 4, "filling": 0.8, "seed": None, "radius_factor": 1.7,
           "vertices": [[0, 0], [3, 3]]}
    doc.update(over)
    return json.dumps(doc) + "\n"


def test_rejects_duplicate_vertex():
    with pytest.raises(InstanceFormatError, match=r"vertices\[1\].*duplicate"):
        deserialize(_doc(vertices=[[3, 3], [3, 3]]))


def test_rejects_out_of_range():
    with pytest.raises(InstanceFormatError, match=r"vertices\[1\]"):
        deserialize(_doc(vertices=[[0, 0], [4, 0]]))


def test_rejects_malformed_json_with_line():
    with pytest.raises(InstanceFormatError, match="line 2"):
        deserialize('{"n_rows": 4,\n "n_cols": }')


def test_rejects_missing_field():
    with pytest.raises(InstanceFormatError, match="radius_factor"):
        deserialize(json.dumps({"n_rows": 1, "n_cols": 1, "filling": 1, "seed": 0, "vertices": []}))


# reduction -------------------------------------------------------------------

def check_chain_structure(g, mapping):
    originals = set(mapping.values())
    for v, ns in enumerate(g.neighbors):
        if v not in originals:
            assert len(ns) == 2


def test_single_edge_reduction():
    emb = EmbeddedGraph({"u": (0, 0), "v": (0, 1)}, [("u", "v", [])])
    g, offset, mapping = reduce_planar_degree3(emb, return_mapping=True)
    n_anc = g.n - 2
    assert n_anc % 2 == 0 and offset == n_anc // 2
    check_chain_structure(g, mapping)
    assert branch_mis(g.n, g.edges.tolist()) == 1 + offset


def test_reduction_without_edges():
    emb = EmbeddedGraph({0: (0, 0), 1: (2, 1), 2: (1, 3)})
    g, offset = reduce_planar_degree3(emb)
    assert offset == 0
    assert g.n == 3 and len(g.edges) == 0
    assert {tuple(p) for p in g.vertices} == {(0, 0), (24, 12), (12, 36)}


def test_reduction_path_of_four():
    pos = {0: (0, 0), 1: (1, 1), 2: (1, 2), 3: (0, 2)}
    edges = [(0, 1, [(0, 0), (0, 1), (1, 1)]), (1, 2, []), (2, 3, [])]
    g, offset, mapping = reduce_planar_degree3(EmbeddedGraph(pos, edges), return_mapping=True)
    assert abs(g.radius_factor - math.sqrt(2)) < 1e-12
    check_chain_structure(g, mapping)
    mis_in = branch_mis(4, [(0, 1), (1, 2), (2, 3)])
    assert branch_mis(g.n, g.edges.tolist()) == mis_in + offset


def test_reduction_degree_three_star_and_cycle():
    star = EmbeddedGraph({0: (1, 1), 1: (0, 1), 2: (1, 2), 3: (2, 1)}, [(0, 1, []), (0, 2, []), (0, 3, [])])
    g, offset = reduce_planar_degree3(star)
    assert branch_mis(g.n, g.edges.tolist()) == 3 + offset
    square = EmbeddedGraph(
        {0: (0, 0), 1: (0, 1), 2: (1, 1), 3: (1, 0)},
        [(0, 1, []), (1, 2, []), (2, 3, []), (3, 0, [])],
    )
    g, offset = reduce_planar_degree3(square, grid_spacing=12)
    assert branch_mis(g.n, g.edges.tolist()) == 2 + offset
    assert max(g.degree()) <= 3


def test_reduction_rejects_crossing_paths():
    emb = EmbeddedGraph(
        {0: (0, 1), 1: (2, 1), 2: (1, 0), 3: (1, 2)},
        [(0, 1, []), (2, 3, [])],
    )
    with pytest.raises(EmbeddingError, match="embedding failed"):
        reduce_planar_degree3(emb)


def test_reduction_rejects_degree_four():
    emb = EmbeddedGraph(
        {0: (1, 1), 1: (0, 1), 2: (1, 2), 3: (2, 1), 4: (1, 0)},
        [(0, 1, []), (0, 2, []), (0, 3, []), (0, 4, [])],
    )
    with pytest.raises(EmbeddingError, match="embedding failed"):
        reduce_planar_degree3(emb)


def test_violation_count():
    g = UnitDiskGraph(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)])
    assert count_violations(np.ones(4), g) == 6
    assert count_violations(np.array([1, 0, 0, 0]), g) == 0
