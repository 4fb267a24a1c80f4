import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syncnet.graph import (GraphError, Topology, algebraic_connectivity, connected_components,
                           fiedler_lower_bound, gen_erdos_renyi, gen_grid, gen_ring,
                           gen_scale_free, generalized_inverse, incidence, is_connected,
                           laplacian_spectrum, max_degree, min_degree, read_edge_list,
                           ring_lambda2, ring_lambda2_approx, weighted_laplacian,
                           write_edge_list, zero_eigenvalue_count)


def star(leaves):
    return Topology.from_edges(leaves + 1, [(0, k) for k in range(1, leaves + 1)])


@st.composite
def weighted_graphs(draw, max_n=9):
    n = draw(st.integers(2, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    weights = draw(st.lists(st.floats(0.1, 5.0), min_size=len(pairs), max_size=len(pairs)))
    edges = [(i, j, w) for (i, j), k, w in zip(pairs, keep, weights) if k]
    # a spanning path keeps every sample connected
    edges_set = {(i, j) for i, j, _ in edges}
    edges += [(i, i + 1, 1.0) for i in range(n - 1) if (i, i + 1) not in edges_set]
    return Topology.from_edges(n, edges)


class TestTopology:
    def test_edges_are_canonicalised(self):
        t = Topology.from_edges(3, [(2, 0, 2.0), (1, 0)])
        assert t.edges() == [(0, 1, 1.0), (0, 2, 2.0)]

    @pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1, -1.0)], [(0, 1), (1, 0)],
                                       [(0, 1, float("nan"))]])
    def test_rejects_bad_edges(self, edges):
        with pytest.raises(GraphError):
            Topology.from_edges(3, edges)

    def test_equality_and_hash(self):
        a = gen_ring(6, 2)
        b = Topology.from_edges(6, reversed(a.edges()))
        assert a == b and hash(a) == hash(b)
        assert a != a.with_weights(np.full(a.n_edges, 2.0))


class TestIncidence:
    def test_single_edge(self):
        b = incidence(Topology.from_edges(2, [(0, 1, 1.0)]))
        assert b[:, 0].tolist() == [-1, 1]

    def test_triangle_gram(self):
        b = incidence(Topology.from_edges(3, [(0, 1), (0, 2), (1, 2)]))
        assert (b @ b.T).tolist() == [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]

    @given(weighted_graphs())
    @settings(max_examples=40, deadline=None)
    def test_columns_sum_to_zero(self, topo):
        assert np.all(incidence(topo).sum(axis=0) == 0)


class TestLaplacian:
    def test_single_edge(self):
        lap = weighted_laplacian(Topology.from_edges(2, [(0, 1, 2.5)]))
        assert lap.tolist() == [[2.5, -2.5], [-2.5, 2.5]]

    def test_cycle4_spectrum(self):
        eigs = laplacian_spectrum(weighted_laplacian(gen_ring(4, 2)))
        assert np.allclose(eigs, [0, 2, 2, 4], atol=1e-12)

    @given(weighted_graphs(), st.floats(0.1, 10.0))
    @settings(max_examples=40, deadline=None)
    def test_scaling_and_structure(self, topo, s):
        lap = weighted_laplacian(topo)
        assert np.allclose(weighted_laplacian(topo, topo.weights * s), s * lap)
        assert np.allclose(lap, lap.T)
        assert np.allclose(lap.sum(axis=1), 0.0)
        assert laplacian_spectrum(lap)[0] > -1e-9
        b = incidence(topo)
        assert np.allclose(b @ np.diag(topo.weights) @ b.T, lap)

    def test_lambda2_small_cases(self):
        assert algebraic_connectivity(weighted_laplacian(Topology.from_edges(2, [(0, 1)]))) \
            == pytest.approx(2.0, abs=1e-12)
        assert algebraic_connectivity(weighted_laplacian(gen_ring(4, 2))) \
            == pytest.approx(2.0, abs=1e-12)

    def test_disconnected_lambda2_zero(self):
        t = Topology.from_edges(4, [(0, 1), (2, 3)])
        lap = weighted_laplacian(t)
        assert algebraic_connectivity(lap) == pytest.approx(0.0, abs=1e-12)
        assert zero_eigenvalue_count(lap) == 2

    def test_lambda2_needs_two_nodes(self):
        with pytest.raises(ValueError):
            algebraic_connectivity(np.zeros((1, 1)))


class TestDegreesAndConnectivity:
    def test_degrees(self):
        assert max_degree(Topology.from_edges(2, [(0, 1, 3.0)])) == 3.0
        assert max_degree(gen_ring(10, 2)) == 2.0
        assert max_degree(star(5)) == 5.0
        assert min_degree(star(5)) == 1.0

    def test_connectivity_flags(self):
        assert is_connected(Topology.from_edges(2, [(0, 1)]))
        assert not is_connected(Topology.from_edges(3, [(0, 1)]))
        assert connected_components(Topology.from_edges(3, [(0, 1)])) == [[0, 1], [2]]

    @pytest.mark.parametrize("seed", range(5))
    def test_traversal_matches_null_space(self, seed):
        t = gen_scale_free(40, 3, 2, seed)
        assert is_connected(t)
        assert zero_eigenvalue_count(weighted_laplacian(t)) == 1
        split = Topology.from_edges(6, [(0, 1), (1, 2), (3, 4)])
        assert len(connected_components(split)) == zero_eigenvalue_count(weighted_laplacian(split))


class TestGeneralizedInverse:
    def test_single_edge(self):
        pinv = generalized_inverse(weighted_laplacian(Topology.from_edges(2, [(0, 1)])))
        assert np.allclose(pinv, 0.25 * np.array([[1, -1], [-1, 1]]), atol=1e-14)

    @given(weighted_graphs())
    @settings(max_examples=30, deadline=None)
    def test_projector_identity(self, topo):
        lap = weighted_laplacian(topo)
        n = topo.n
        assert np.allclose(lap @ generalized_inverse(lap), np.eye(n) - np.ones((n, n)) / n,
                           atol=1e-9)
        assert np.allclose(generalized_inverse(lap), np.linalg.pinv(lap), atol=1e-8)

    def test_continuity_in_weights(self):
        t = gen_erdos_renyi(12, 0.4, 3)
        base = generalized_inverse(weighted_laplacian(t))
        gaps = [np.abs(generalized_inverse(weighted_laplacian(t, t.weights + eps)) - base).max()
                for eps in (1e-1, 1e-3, 1e-5, 1e-7)]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-6

    def test_disconnected_rejected(self):
        with pytest.raises(GraphError):
            generalized_inverse(weighted_laplacian(Topology.from_edges(3, [(0, 1)])))


class TestGenerators:
    def test_ring_small(self):
        t = gen_ring(4, 2)
        assert t.n_edges == 4
        assert gen_ring(16, 4).neighbor_counts().tolist() == [4] * 16

    @pytest.mark.parametrize("n,d", [(5, 3), (4, 4), (6, 0)])
    def test_ring_invalid(self, n, d):
        with pytest.raises(GraphError):
            gen_ring(n, d)

    def test_ring_lambda2_formula(self):
        lap = weighted_laplacian(gen_ring(64, 4))
        exact = 4 * (math.sin(math.pi / 64) ** 2 + math.sin(2 * math.pi / 64) ** 2)
        assert algebraic_connectivity(lap) == pytest.approx(exact, abs=1e-12)
        assert ring_lambda2(64, 4) == pytest.approx(exact, abs=1e-15)
        assert ring_lambda2_approx(256, 4) == pytest.approx(ring_lambda2(256, 4), rel=1e-3)

    def test_grid_shapes(self):
        square = gen_grid(2, 2, 1.0)
        assert square.edges() == [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]
        assert square.neighbor_counts().tolist() == [2, 2, 2, 2]
        big = gen_grid(40, 40, 2.0)
        assert max_degree(big) == 12
        assert is_connected(big)

    def test_grid_disconnected_radius(self):
        with pytest.raises(GraphError):
            gen_grid(3, 3, 0.5)

    def test_scale_free(self):
        assert gen_scale_free(4, 4, 2, 0).n_edges == 6
        t = gen_scale_free(64, 3, 3, 11)
        assert t.n_edges == 186
        assert is_connected(t)
        assert gen_scale_free(64, 3, 3, 11) == t

    def test_scale_free_lambda2_flat(self):
        means = [np.mean([algebraic_connectivity(weighted_laplacian(gen_scale_free(n, 3, 3, s)))
                          for s in range(8)]) for n in (64, 128, 256)]
        assert max(means) / min(means) < 1.5

    def test_erdos_renyi_connected(self):
        for seed in range(5):
            assert is_connected(gen_erdos_renyi(20, 0.2, seed))


class TestFiedlerBound:
    @pytest.mark.parametrize("seed", range(10))
    def test_holds_on_random_graphs(self, seed):
        t = gen_erdos_renyi(15, 0.3, seed)
        assert algebraic_connectivity(weighted_laplacian(t)) >= fiedler_lower_bound(t) - 1e-12

    def test_minimum_degree_form_can_fail_on_bottlenecks(self):
        clique = [(i, j) for i in range(10) for j in range(i + 1, 10)]
        edges = clique + [(i + 10, j + 10) for i, j in clique] + [(9, 10)]
        barbell = Topology.from_edges(20, edges)
        assert algebraic_connectivity(weighted_laplacian(barbell)) < fiedler_lower_bound(barbell)


class TestEdgeListIO:
    def test_round_trip(self, tmp_path):
        t = gen_erdos_renyi(10, 0.4, 1)
        t = t.with_weights(np.random.default_rng(0).uniform(0.1, 3.0, t.n_edges))
        path = tmp_path / "g.txt"
        write_edge_list(t, path)
        assert read_edge_list(path) == t
        assert path.read_text().splitlines()[0] == f"{t.n} {t.n_edges}"

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 2\n0 1 1.0\n")
        with pytest.raises(GraphError):
            read_edge_list(path)
