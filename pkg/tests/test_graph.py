import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randsc import ConvergenceError, EigenBasis
from randsc.graph import (
    DenseSymMatrix,
    EdgeListParseError,
    SparseSymGraph,
    load_edge_list,
    matvec,
    operator_norm,
    residual_operator,
)

from oracles import jacobi_eigh


def random_graph(n, density, rng, weighted=False):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < density
    w = rng.uniform(0.5, 2.0, keep.sum()) if weighted else None
    return SparseSymGraph(n, iu[keep], ju[keep], w)


@st.composite
def graphs(draw, max_n=25):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    weights = draw(st.lists(st.floats(0.1, 10.0), min_size=len(chosen), max_size=len(chosen)))
    rows = [p[0] for p in chosen]
    cols = [p[1] for p in chosen]
    return SparseSymGraph(n, rows, cols, weights)


class TestSparseSymGraph:
    def test_orientation_is_canonicalised(self):
        G = SparseSymGraph(3, [2, 0], [0, 1], [5.0, 1.0])
        assert list(G.entries()) == [(0, 1, 1.0), (0, 2, 5.0)]
        assert G.weight(2, 0) == G.weight(0, 2) == 5.0

    def test_csr_is_symmetric_with_empty_diagonal(self):
        G = random_graph(30, 0.3, np.random.default_rng(0), weighted=True)
        D = G.to_dense()
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0)

    @pytest.mark.parametrize(
        "rows, cols, weights, msg",
        [
            ([0], [3], None, "out of range"),
            ([-1], [1], None, "out of range"),
            ([1], [1], None, "diagonal"),
            ([0, 1], [1, 0], None, "duplicate"),
            ([0], [1], [0.0], "strictly positive"),
            ([0], [1], [np.nan], "strictly positive"),
        ],
    )
    def test_invalid_input(self, rows, cols, weights, msg):
        with pytest.raises(ValueError, match=msg):
            SparseSymGraph(3, rows, cols, weights)

    def test_storage_is_read_only(self):
        G = SparseSymGraph(3, [0], [1])
        with pytest.raises(ValueError):
            G.weights[0] = 3.0
        with pytest.raises(ValueError):
            G.csr.data[0] = 3.0

    def test_degrees_and_row_norms(self):
        G = SparseSymGraph(3, [0, 0], [1, 2], [3.0, 4.0])
        assert G.degrees().tolist() == [2, 1, 1]
        assert np.allclose(G.row_norms(), [5.0, 3.0, 4.0])

    def test_from_dense_roundtrip(self):
        G = random_graph(12, 0.4, np.random.default_rng(1), weighted=True)
        assert np.array_equal(SparseSymGraph.from_dense(G.to_dense()).to_dense(), G.to_dense())

    @given(graphs())
    def test_symmetry_invariant(self, G):
        for i, j, w in G.entries():
            assert i < j
            assert G.weight(j, i) == w


class TestDenseSymMatrix:
    def test_lower_triangle_mirrors_upper_exactly(self):
        rng = np.random.default_rng(2)
        M = rng.standard_normal((6, 6))
        M = M + M.T
        M[3, 1] += 1e-13
        D = DenseSymMatrix(M)
        assert np.array_equal(D.values, D.values.T)
        assert D.values[3, 1] == M[1, 3]

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            DenseSymMatrix([[0.0, 1.0], [2.0, 0.0]])


class TestLoadEdgeList:
    def test_single_edge(self):
        el = load_edge_list(["0 1"])
        assert el.graph.n == 2
        assert list(el.graph.entries()) == [(0, 1, 1.0)]

    def test_duplicates_loops_and_reindexing(self):
        el = load_edge_list(["# c", "1 2", "2 1", "3 3"])
        assert el.graph.n == 3
        assert list(el.graph.entries()) == [(0, 1, 1.0)]
        assert el.n_duplicates == 1
        assert el.n_self_loops == 1
        assert el.n_isolated == 1
        assert el.node_ids.tolist() == [1, 2, 3]
        assert el.index_of() == {1: 0, 2: 1, 3: 2}

    def test_bytes_and_paths(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_bytes(b"10\t20\n20\t30\n")
        el = load_edge_list(str(p))
        assert el.graph.nnz == 2
        assert load_edge_list(b"10 20\n20 30\n").graph.nnz == 2

    def test_malformed_line_reports_line_number(self):
        with pytest.raises(EdgeListParseError) as exc:
            load_edge_list(["0 1", "", "2 x"])
        assert exc.value.lineno == 3
        with pytest.raises(EdgeListParseError, match="line 1"):
            load_edge_list(["7"])

    def test_empty_input_is_a_valid_empty_graph(self):
        el = load_edge_list([])
        assert el.graph.n == 0 and el.graph.nnz == 0

    def test_one_indexed_without_reindexing(self):
        el = load_edge_list(["1 3"], one_indexed=True, reindex=False)
        assert el.graph.n == 3
        assert list(el.graph.entries()) == [(0, 2, 1.0)]

    def test_custom_delimiter_and_comment(self):
        el = load_edge_list(["% header", "0,1", "1,2"], delimiter=",", comment="%")
        assert el.graph.nnz == 2

    @given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), max_size=40), st.randoms())
    def test_row_order_does_not_matter(self, edges, rnd):
        lines = [f"{a} {b}" for a, b in edges]
        shuffled = lines[:]
        rnd.shuffle(shuffled)
        a, b = load_edge_list(lines), load_edge_list(shuffled)
        assert a.graph.n == b.graph.n
        assert np.array_equal(a.graph.to_dense(), b.graph.to_dense())
        assert np.array_equal(a.node_ids, b.node_ids)


class TestMatvec:
    def test_zero_graph(self):
        assert np.array_equal(matvec(SparseSymGraph(4), np.arange(4.0)), np.zeros(4))

    def test_single_edge(self):
        assert matvec(SparseSymGraph(2, [0], [1]), np.array([2.0, 3.0])).tolist() == [3.0, 2.0]

    def test_matches_dense_product(self):
        rng = np.random.default_rng(3)
        G = random_graph(50, 0.2, rng, weighted=True)
        x = rng.standard_normal(50)
        assert np.allclose(matvec(G, x), G.to_dense() @ x, atol=1e-12, rtol=0)
        X = rng.standard_normal((50, 4))
        assert np.allclose(G @ X, G.to_dense() @ X, atol=1e-12, rtol=0)

    def test_repeated_calls_are_bit_identical(self):
        rng = np.random.default_rng(4)
        G = random_graph(200, 0.1, rng, weighted=True)
        x = rng.standard_normal(200)
        assert np.array_equal(matvec(G, x), matvec(G, x))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            matvec(SparseSymGraph(3), np.ones(4))

    @given(graphs(), st.data())
    def test_bilinear_symmetry(self, G, data):
        x = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=G.n, max_size=G.n)))
        y = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=G.n, max_size=G.n)))
        assert abs(matvec(G, x) @ y - matvec(G, y) @ x) <= 1e-10 * max(1.0, np.abs(G.to_dense()).sum() * 25)


class TestOperatorNorm:
    def test_diagonal(self):
        assert operator_norm(np.diag([3.0, 1.0, -4.0]), rng=0) == pytest.approx(4.0, rel=1e-6)

    def test_rank_one(self):
        u = np.array([1.0, 1.0, 1.0, 1.0])  # norm 2
        assert operator_norm(np.outer(u, u), rng=0) == pytest.approx(4.0, rel=1e-6)

    def test_matches_jacobi_oracle(self):
        rng = np.random.default_rng(5)
        M = rng.standard_normal((30, 30))
        M = (M + M.T) / 2
        lam, _ = jacobi_eigh(M)
        truth = np.abs(lam).max()
        est = operator_norm(M, tol=1e-12, max_iter=20000, rng=1, block_size=4)
        assert abs(est - truth) <= 1e-8 * truth

    def test_opposite_sign_top_pair(self):
        # the Rayleigh quotient oscillates here; the block fallback must still converge
        M = np.diag([5.0, -5.0, 1.0, 0.5])
        assert operator_norm(M, tol=1e-10, rng=0) == pytest.approx(5.0, rel=1e-8)

    @pytest.mark.parametrize("c", [-2.0, 0.5])
    def test_scaling(self, c):
        rng = np.random.default_rng(6)
        M = rng.standard_normal((25, 25))
        M = M + M.T
        a = operator_norm(M, tol=1e-10, max_iter=20000, rng=0, block_size=4)
        b = operator_norm(c * M, tol=1e-10, max_iter=20000, rng=0, block_size=4)
        assert b == pytest.approx(abs(c) * a, rel=1e-6)

    def test_zero_operator(self):
        assert operator_norm(np.zeros((5, 5)), rng=0) == 0.0

    def test_nonconvergence_carries_last_estimate(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((40, 40))
        M = M + M.T
        with pytest.raises(ConvergenceError) as exc:
            operator_norm(M, tol=1e-15, max_iter=2, rng=0)
        assert exc.value.value > 0
        assert exc.value.n_iter == 2

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            operator_norm(np.eye(3), tol=0)
        with pytest.raises(ValueError):
            operator_norm(np.eye(3), n=4)


class TestResidualOperator:
    def test_exact_factor_gives_zero(self):
        e1 = np.zeros((4, 1))
        e1[0] = 1
        P = DenseSymMatrix(5 * (e1 @ e1.T))
        op = residual_operator(EigenBasis(e1, [5.0]), P)
        assert np.allclose(op @ np.eye(4), 0, atol=1e-15)

    def test_zero_eigenvalue_gives_minus_P(self):
        rng = np.random.default_rng(8)
        P = rng.random((6, 6))
        P = DenseSymMatrix(P + P.T)
        U = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        op = residual_operator(EigenBasis(U, [0.0, 0.0]), P)
        assert np.allclose(op @ np.eye(6), -P.values, atol=1e-12)

    def test_matches_densified_difference(self):
        rng = np.random.default_rng(9)
        U = np.linalg.qr(rng.standard_normal((20, 2)))[0]
        basis = EigenBasis(U, [3.0, -1.5])
        P = rng.random((20, 20))
        P = DenseSymMatrix(P + P.T)
        op = residual_operator(basis, P)
        x = rng.standard_normal(20)
        assert np.allclose(op @ x, (basis.to_dense() - P.values) @ x, atol=1e-12, rtol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            residual_operator(EigenBasis(np.eye(3)[:, :1], [1.0]), DenseSymMatrix(np.eye(4)))


@settings(max_examples=25)
@given(graphs(max_n=12))
def test_operator_norm_agrees_with_dense(G):
    truth = float(np.abs(np.linalg.eigvalsh(G.to_dense())).max()) if G.n else 0.0
    est = operator_norm(G, tol=1e-12, max_iter=50000, rng=0, block_size=3)
    assert est == pytest.approx(truth, rel=1e-6, abs=1e-12)
