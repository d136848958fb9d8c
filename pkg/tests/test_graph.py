import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import hsbm_motif as hm
from hsbm_motif.graph import (
    EdgeListParseError,
    GraphError,
    partition_from_csv,
    partition_to_csv,
)


def load(text: str) -> hm.SparseGraph:
    return hm.load_edge_list(io.StringIO(text))


class TestLoadEdgeList:
    def test_two_edges(self):
        g = load("0 1\n1 2")
        assert g.n_vertices == 3
        assert g.n_edges == 2
        assert g.vertex_ids == ("0", "1", "2")
        assert set(map(tuple, g.edge_array())) == {(0, 1), (1, 2)}

    def test_symmetrize_dedupe_and_loop(self):
        g = load("0 1\n1 0\n2 2")
        assert g.n_vertices == 3
        assert g.n_edges == 1
        assert g.n_loops_dropped == 1
        assert g.degrees.tolist() == [1, 1, 0]  # vertex 2 isolated but present

    def test_comments_and_blank_lines(self):
        g = load("# header\n\na b\n# mid\nb c\n")
        assert g.vertex_ids == ("a", "b", "c")
        assert g.n_edges == 2

    def test_malformed_line_reports_number(self):
        with pytest.raises(EdgeListParseError, match="line 3"):
            load("0 1\n1 2\n2 3 4")

    def test_empty_input(self):
        with pytest.raises(EdgeListParseError, match="empty"):
            load("# only comments\n")

    def test_arbitrary_string_tokens(self):
        g = load("alice bob\nbob carol")
        assert g.vertex_ids == ("alice", "bob", "carol")


class TestSaveRoundTrip:
    def test_isolated_vertex_survives(self):
        g = load("0 1\n1 0\n2 2")
        buf = io.StringIO()
        hm.save_edge_list(g, buf)
        again = load(buf.getvalue())
        assert again == g

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 12), st.sets(st.tuples(st.integers(0, 11), st.integers(0, 11))))
    def test_load_save_load_identity(self, n, pairs):
        u = np.array([a % n for a, _ in pairs], dtype=np.int64)
        v = np.array([b % n for _, b in pairs], dtype=np.int64)
        g = hm.graph_from_edges(n, u, v, vertex_ids=tuple(f"v{i}" for i in range(n)))
        buf = io.StringIO()
        hm.save_edge_list(g, buf)
        first = load(buf.getvalue())
        buf2 = io.StringIO()
        hm.save_edge_list(first, buf2)
        assert load(buf2.getvalue()) == first == g


class TestInvariants:
    def test_rejects_self_loops(self):
        import scipy.sparse as sp

        adj = sp.csr_array(np.array([[1, 0], [0, 0]], dtype=np.uint8))
        with pytest.raises(GraphError, match="self-loops"):
            hm.SparseGraph(adjacency=adj)

    def test_rejects_asymmetric(self):
        import scipy.sparse as sp

        adj = sp.csr_array(np.array([[0, 1], [0, 0]], dtype=np.uint8))
        with pytest.raises(GraphError, match="symmetric"):
            hm.SparseGraph(adjacency=adj)

    def test_rejects_weights(self):
        import scipy.sparse as sp

        adj = sp.csr_array(np.array([[0, 2], [2, 0]], dtype=np.uint8))
        with pytest.raises(GraphError, match="0 or 1"):
            hm.SparseGraph(adjacency=adj)


class TestLargestConnectedComponent:
    def test_tie_break_by_min_vertex(self):
        # two triangles + an isolated vertex; the one containing vertex 0 wins
        g = load("0 1\n1 2\n2 0\n4 5\n5 6\n6 4\n3 3")
        lcc = hm.largest_connected_component(g)
        assert lcc.n_vertices == 3
        assert lcc.vertex_ids == ("0", "1", "2")

    def test_connected_graph_unchanged(self):
        g = load("0 1\n1 2\n2 3\n3 4")
        assert hm.largest_connected_component(g) == g

    def test_empty_graph_errors(self):
        import scipy.sparse as sp

        with pytest.raises(GraphError):
            hm.largest_connected_component(
                hm.SparseGraph(adjacency=sp.csr_array((0, 0), dtype=np.uint8))
            )

    def test_matches_bfs_oracle_and_covers_benchmark(self, bench_sample):
        graph, _ = bench_sample
        lcc = hm.largest_connected_component(graph)
        # independent BFS oracle
        adj = [graph.neighbors(v) for v in range(graph.n_vertices)]
        seen = np.zeros(graph.n_vertices, dtype=bool)
        best = []
        for start in range(graph.n_vertices):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(int(w))
            if len(comp) > len(best):
                best = comp
        assert lcc.n_vertices == len(best)
        assert lcc.n_vertices >= 0.99 * graph.n_vertices


class TestInducedSubgraph:
    def test_triangle_pair(self):
        g = load("0 1\n1 2\n2 0")
        sub = hm.induced_subgraph(g, [0, 1])
        assert sub.n_edges == 1
        assert sub.vertex_ids == ("0", "1")

    def test_identity(self):
        g = load("0 1\n1 2\n2 0\n3 0")
        assert hm.induced_subgraph(g, np.arange(4)) == g

    def test_out_of_range(self):
        g = load("0 1")
        with pytest.raises(GraphError, match="out of range"):
            hm.induced_subgraph(g, [0, 5])

    def test_empty_set(self):
        g = load("0 1")
        with pytest.raises(GraphError, match="empty"):
            hm.induced_subgraph(g, [])

    def test_benchmark_block_density(self, bench_sample):
        # restrict to the first subgraph (300 vertices) and check the density
        # of its first internal block against the latent dot product
        graph, latents = bench_sample
        first = np.flatnonzero(latents.top_level_labels() == 0)
        assert first.size == 300
        sub = hm.induced_subgraph(graph, first)
        inner = np.flatnonzero(latents.block_labels[first] == 0)
        blk = hm.induced_subgraph(sub, inner)
        m = blk.n_vertices
        expected = float(
            latents.positions[first[inner[0]]] @ latents.positions[first[inner[0]]]
        )
        pairs = m * (m - 1) / 2
        sigma = np.sqrt(expected * (1 - expected) / pairs)
        assert abs(blk.density - expected) < 4 * sigma


class TestBlockDensity:
    def test_complete_bipartite(self):
        g = load("a c\na d\nb c\nb d")
        # vertex order of first appearance: a, c, d, b -> parts {a,b}, {c,d}
        part = hm.VertexPartition(np.array([0, 1, 1, 0]), 2)
        dens = hm.block_density(g, part)
        assert np.allclose(dens, [[0, 1], [1, 0]])

    def test_edgeless(self):
        g = load("0 0\n1 1\n2 2\n3 3")
        dens = hm.block_density(g, hm.VertexPartition(np.array([0, 0, 1, 1]), 2))
        assert np.allclose(dens, 0)

    def test_singleton_cluster_is_nan_not_zero(self):
        g = load("0 1\n1 2")
        dens = hm.block_density(g, hm.VertexPartition(np.array([0, 0, 1]), 2))
        assert np.isnan(dens[1, 1])
        assert not np.isnan(dens[0, 0])

    def test_single_cluster_equals_graph_density(self):
        g = load("0 1\n1 2\n2 3\n3 0\n0 2")
        dens = hm.block_density(g, hm.VertexPartition(np.zeros(4, dtype=int), 1))
        assert dens[0, 0] == pytest.approx(g.density)

    def test_benchmark_within_point_02_of_truth(self, bench_sample):
        # [expected matrix derived from the constructed latent dot products]
        graph, latents = bench_sample
        part = hm.VertexPartition(latents.top_level_labels(), 8)
        observed = hm.block_density(graph, part)
        x = latents.positions
        expected = np.zeros((8, 8))
        for i in range(8):
            for j in range(8):
                rows_i = np.flatnonzero(part.labels == i)
                rows_j = np.flatnonzero(part.labels == j)
                block = x[rows_i] @ x[rows_j].T
                if i == j:
                    s = (block.sum() - np.trace(block)) / (len(rows_i) * (len(rows_i) - 1))
                else:
                    s = block.mean()
                expected[i, j] = s
        assert np.nanmax(np.abs(observed - expected)) < 0.02

    def test_partition_size_mismatch(self):
        g = load("0 1")
        with pytest.raises(GraphError):
            hm.block_density(g, hm.VertexPartition(np.array([0]), 1))


class TestPartitionCsv:
    def test_round_trip(self):
        part = hm.VertexPartition(np.array([0, 1, 1, 2]), 3)
        buf = io.StringIO()
        partition_to_csv(part, ["a", "b", "c", "d"], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "vertex_id,cluster"
        assert len(lines) == 5
        back, ids = partition_from_csv(io.StringIO(buf.getvalue()))
        assert back == part
        assert ids == ("a", "b", "c", "d")
