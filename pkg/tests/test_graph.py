import numpy as np
import pytest

from pgprune.geometry import Pose2
from pgprune.graph import (
    Edge,
    EdgeKind,
    GraphError,
    PoseGraph,
    Provenance,
    graphs_equal,
    validate_information,
)


def chain(n=4):
    g = PoseGraph(gauge_id=0)
    for i in range(n):
        g.add_vertex(i, Pose2(float(i), 0, 0))
    for i in range(n - 1):
        g.add_edge(Edge(i, i + 1, Pose2(1, 0, 0), np.eye(3), kind=EdgeKind.ODOMETRY))
    return g


def test_duplicate_vertex_id_rejected():
    g = PoseGraph()
    g.add_vertex(1, Pose2(0, 0, 0))
    with pytest.raises(GraphError):
        g.add_vertex(1, Pose2(1, 1, 0))


def test_seq_increases_with_insertion_order():
    g = PoseGraph()
    for vid in (5, 2, 9):
        g.add_vertex(vid, Pose2(0, 0, 0))
    seqs = [g.vertices[v].seq for v in (5, 2, 9)]
    assert seqs == sorted(seqs) and len(set(seqs)) == 3


def test_self_edge_rejected():
    g = chain(2)
    with pytest.raises(GraphError):
        g.add_edge(Edge(0, 0, Pose2(0, 0, 0), np.eye(3)))


def test_dangling_edge_rejected():
    g = chain(2)
    with pytest.raises(GraphError):
        g.add_edge(Edge(0, 99, Pose2(0, 0, 0), np.eye(3)))


def test_odometry_branching_rejected():
    g = chain(3)
    g.add_vertex(10, Pose2(0, 1, 0))
    with pytest.raises(GraphError):  # vertex 0 already has odometry out
        g.add_edge(Edge(0, 10, Pose2(0, 1, 0), np.eye(3), kind=EdgeKind.ODOMETRY))
    with pytest.raises(GraphError):  # vertex 1 already has odometry in
        g.add_edge(Edge(10, 1, Pose2(0, -1, 0), np.eye(3), kind=EdgeKind.ODOMETRY))


def test_odometry_cycle_rejected():
    g = chain(3)
    with pytest.raises(GraphError):
        g.add_edge(Edge(2, 0, Pose2(-2, 0, 0), np.eye(3), kind=EdgeKind.ODOMETRY))


def test_loop_edge_between_chain_ends_is_fine():
    g = chain(3)
    g.add_edge(Edge(2, 0, Pose2(-2, 0, 0), np.eye(3), kind=EdgeKind.LOOP_CLOSURE))
    assert g.num_edges() == 3


def test_non_positive_definite_information_rejected():
    g = chain(2)
    bad = np.diag([1.0, -1.0, 1.0])
    with pytest.raises(GraphError):
        g.add_edge(Edge(0, 1, Pose2(0, 0, 0), bad))


def test_asymmetric_information_rejected():
    m = np.eye(3)
    m[0, 1] = 1e-3
    with pytest.raises(GraphError):
        validate_information(m)


def test_validate_information_symmetrizes_dust():
    m = np.eye(3)
    m[0, 1] = 1e-15
    out = validate_information(m)
    assert out[0, 1] == out[1, 0]


def test_connectivity():
    g = chain(3)
    assert g.is_connected()
    g.add_vertex(50, Pose2(9, 9, 0))
    assert not g.is_connected()


def test_chain_endpoints():
    g = chain(4)
    assert g.chain_endpoint_ids() == {0, 3}


def test_remove_vertex_drops_adjacent_edges():
    g = chain(4)
    g.add_edge(Edge(0, 2, Pose2(2, 0, 0), np.eye(3), kind=EdgeKind.LOOP_CLOSURE))
    g.remove_vertex(2)
    assert g.num_edges() == 1  # only 0->1 left
    assert g.odo_out(1) is None


def test_copy_is_deep():
    g = chain(3)
    h = g.copy()
    h.vertices[1].pose = Pose2(99, 0, 0)
    next(iter(h.edges.values())).info[0, 0] = 123.0
    assert g.vertices[1].pose.x == 1.0
    assert next(iter(g.edges.values())).info[0, 0] == 1.0
    assert graphs_equal(g, chain(3))


def test_find_edges_unordered():
    g = chain(3)
    g.add_edge(Edge(2, 0, Pose2(-2, 0, 0), np.eye(3), kind=EdgeKind.LOOP_CLOSURE))
    assert len(g.find_edges(0, 2)) == 1
    assert len(g.find_edges(2, 0)) == 1
    assert g.find_edges(0, 1)[0].kind is EdgeKind.ODOMETRY


def test_effective_gauge_falls_back_to_lowest_id():
    g = PoseGraph()
    g.add_vertex(7, Pose2(0, 0, 0))
    g.add_vertex(3, Pose2(1, 0, 0))
    assert g.effective_gauge() == 3
    g.gauge_id = 7
    assert g.effective_gauge() == 7


def test_provenance_default_genuine():
    g = chain(2)
    assert all(e.provenance is Provenance.GENUINE for e in g.edges.values())
