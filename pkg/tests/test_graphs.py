import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grnnctl.graphs import (
    UNREACHABLE,
    Topology,
    directed_distance,
    export_topology,
    hop_distance_matrix,
    normalized_adjacency,
    sample_topology,
    support_mask,
    topology_from_positions,
    topology_from_json,
)
from grnnctl.seeding import stream


def chain3():
    """Directed 3-chain 0 -> 1 -> 2 in receiver-row convention."""
    adj = np.zeros((3, 3), dtype=bool)
    adj[1, 0] = True
    adj[2, 1] = True
    return Topology(adjacency=adj)


def test_line4_edges(line4):
    assert line4.edge_list() == [(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]
    assert line4.num_directed_edges == 6
    assert line4.self_loops() == []
    assert line4.is_symmetric()


def test_two_nodes_single_neighbour():
    t = topology_from_positions([0.2, 0.7], k=1)
    assert t.edge_list() == [(0, 1), (1, 0)]


def test_topology_rejects_bad_inputs():
    with pytest.raises(ValueError):
        topology_from_positions([0.1], k=1)
    with pytest.raises(ValueError):
        topology_from_positions([0.1, 0.2, 0.3], k=3)
    with pytest.raises(ValueError):
        Topology(adjacency=np.zeros((2, 3), dtype=bool))


def test_nearest_neighbour_tie_breaks_to_lower_index():
    # node 1 sits exactly between nodes 0 and 2; nodes 2 and 3 pair off with
    # each other, so the only way a 1-2 link can appear is through node 1
    # winning the tie toward index 2. It must not.
    t = topology_from_positions([0.0, 0.5, 1.0, 1.01], k=1)
    edges = t.edge_list()
    assert (0, 1) in edges and (1, 0) in edges
    assert (1, 2) not in edges and (2, 1) not in edges


@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.data())
def test_sampled_topologies_are_symmetric(seed, n, data):
    k = data.draw(st.integers(1, n - 1))
    t = sample_topology(n, k, np.random.default_rng(seed))
    assert t.is_symmetric()
    assert n * k <= t.num_directed_edges <= 2 * n * k


def test_mean_support_density():
    """Mean occupied support of the shift operator at n=20, k=5.

    The headline density figure of ~141 out of the possible 400 matrix
    positions counts every slot the operator may use, which includes each
    node's own diagonal entry. The off-diagonal communication links alone
    average about 119; adding the 20 diagonal slots lands near 141.
    """
    edges = [
        sample_topology(20, 5, stream(s, 0)).num_directed_edges
        for s in range(1000)
    ]
    assert np.mean(edges) + 20 == pytest.approx(141, abs=15)
    assert 100 <= min(edges) and max(edges) <= 200


def test_directed_distance_self_is_zero(line4):
    for i in range(4):
        assert directed_distance(line4, i, i) == 0


def test_directed_distance_chain():
    t = chain3()
    assert directed_distance(t, 0, 2) == 2
    assert directed_distance(t, 2, 0) == UNREACHABLE
    assert UNREACHABLE > 10**9


def test_directed_distance_line4(line4):
    assert directed_distance(line4, 0, 3) == 3


def test_hop_distance_matrix_matches_pairwise(line4):
    d = hop_distance_matrix(line4)
    for i in range(4):
        for j in range(4):
            assert d[i, j] == directed_distance(line4, i, j)


@given(st.integers(0, 2**32 - 1))
def test_edge_iff_distance_one(seed):
    t = sample_topology(8, 2, np.random.default_rng(seed))
    d = hop_distance_matrix(t)
    for i in range(8):
        for j in range(8):
            if i == j:
                continue
            # adjacency[i, j]: j sends to i, i.e. dist(j -> i) == 1
            assert t.adjacency[i, j] == (d[j, i] == 1)


@given(st.integers(0, 2**32 - 1))
def test_hop_distance_triangle_inequality(seed):
    t = sample_topology(7, 2, np.random.default_rng(seed))
    d = hop_distance_matrix(t)
    for i in range(7):
        for j in range(7):
            for k in range(7):
                if np.isfinite(d[i, k]) and np.isfinite(d[k, j]):
                    assert d[i, j] <= d[i, k] + d[k, j]


@given(st.integers(0, 2**32 - 1))
def test_shift_powers_respect_hop_distance(seed):
    """Row i of S^k can only be supported where hop distance <= k."""
    t = sample_topology(8, 2, np.random.default_rng(seed))
    s = normalized_adjacency(t)
    d = hop_distance_matrix(t)
    power = np.eye(8)
    for k in range(1, 4):
        power = power @ s
        beyond = d.T > k  # entry (i, j) reads dist(j -> i)
        assert np.all(power[beyond] == 0.0)


def test_normalized_adjacency_two_node_complete():
    t = topology_from_positions([0.2, 0.7], k=1)
    assert np.array_equal(normalized_adjacency(t), [[0.0, 1.0], [1.0, 0.0]])


def test_normalized_adjacency_triangle():
    adj = np.ones((3, 3), dtype=bool)
    np.fill_diagonal(adj, False)
    t = Topology(adjacency=adj)
    assert normalized_adjacency(t) == pytest.approx(adj.astype(float) / 2.0)


@given(st.integers(0, 2**32 - 1))
def test_normalized_adjacency_unit_spectral_radius(seed):
    t = sample_topology(9, 3, np.random.default_rng(seed))
    s = normalized_adjacency(t)
    assert np.array_equal(s, s.T)
    radius = np.abs(np.linalg.eigvalsh(s)).max()
    assert radius == pytest.approx(1.0, abs=1e-10)


def test_normalized_adjacency_rejects_edgeless():
    with pytest.raises(ValueError):
        normalized_adjacency(Topology(adjacency=np.zeros((3, 3), dtype=bool)))


def test_normalized_adjacency_rejects_asymmetric():
    with pytest.raises(ValueError):
        normalized_adjacency(chain3())


def test_support_mask_empty_graph_is_identity():
    t = Topology(adjacency=np.zeros((3, 3), dtype=bool))
    assert np.array_equal(support_mask(t), np.eye(3, dtype=bool))


def test_support_mask_line4(line4):
    m = support_mask(line4)
    assert np.all(np.diag(m))
    assert int(m.sum()) == 6 + 4
    off = m & ~np.eye(4, dtype=bool)
    assert np.array_equal(off, line4.adjacency)


def test_export_dot_empty_graph_lists_nodes_only():
    t = Topology(adjacency=np.zeros((2, 2), dtype=bool))
    text = export_topology(t, "dot")
    assert "->" not in text
    assert text.count("\n") >= 2


def test_export_dot_two_node_complete():
    t = topology_from_positions([0.2, 0.7], k=1)
    text = export_topology(t, "dot")
    assert text.count("->") == 2


def test_export_json_roundtrip_is_byte_identical(line4):
    text = export_topology(line4, "json")
    parsed = topology_from_json(text)
    assert export_topology(parsed, "json") == text
    assert np.array_equal(parsed.adjacency, line4.adjacency)
    payload = json.loads(text)
    assert payload["n"] == 4


def test_export_rejects_unknown_format(line4):
    with pytest.raises(ValueError):
        export_topology(line4, "gml")
