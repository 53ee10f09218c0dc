import numpy as np
import pytest

from gbpwls import corpus, oracle
from gbpwls.errors import UnobservableSystemError
from gbpwls.graph import (EdgeSpec, MeasurementGraph, NodeSpec,
                          SelfMeasurement, build_line_graph)
from gbpwls.randomness import seeded_instance

from conftest import assert_close


def stacked_regression(graph):
    """Independent oracle: whitened stacked regression solved by lstsq."""
    offsets, pos = {}, 0
    for i in graph.node_ids:
        offsets[i] = pos
        pos += graph.node(i).dim
    H_rows, y_rows = [], []

    def add(C_map, R, z):
        w = np.linalg.cholesky(np.linalg.inv(R))
        row = np.zeros((len(z), pos))
        for i, C in C_map.items():
            row[:, offsets[i]:offsets[i] + C.shape[1]] = C
        H_rows.append(w.T @ row)
        y_rows.append(w.T @ z)

    for i in graph.node_ids:
        sm = graph.node(i).self_meas
        if sm is not None:
            add({i: np.asarray(sm.C)}, np.asarray(sm.R), np.asarray(sm.z))
    for e in graph.edges:
        add({e.i: np.asarray(e.C_ij), e.j: np.asarray(e.C_ji)},
            np.asarray(e.R), np.asarray(e.z))
    H = np.vstack(H_rows)
    y = np.concatenate(y_rows)
    x, *_ = np.linalg.lstsq(H, y, rcond=None)
    cov = np.linalg.inv(H.T @ H)
    return x, cov, offsets


class TestGlobalSolve:
    def test_single_node(self):
        sm = SelfMeasurement([[2.0]], [[5.0]], [0.2])
        g = MeasurementGraph([NodeSpec(1, 1, sm)], [])
        ml = oracle.solve_ml(g)
        # 2x = 0.2 weighted: x = 0.1, var = 5/4
        assert_close(ml.x_hat[1], [0.1])
        assert_close(ml.Sigma[1], [[1.25]])

    def test_unobservable_raises(self):
        nodes = [NodeSpec(1, 1, None), NodeSpec(2, 1, None)]
        g = MeasurementGraph(nodes, [EdgeSpec(1, 2, [[1.0]], [[1.0]],
                                              [[1.0]], [0.0])])
        with pytest.raises(UnobservableSystemError):
            oracle.solve_ml(g)

    @pytest.mark.parametrize("name", ["ring8", "tree15", "k5", "vector-ring8"])
    def test_matches_stacked_regression(self, name):
        g = seeded_instance(corpus.build(name), 11)
        ml = oracle.solve_ml(g)
        x, cov, offsets = stacked_regression(g)
        for i in g.node_ids:
            s = slice(offsets[i], offsets[i] + g.node(i).dim)
            assert_close(ml.x_hat[i], x[s], 1e-10, f"x_hat[{i}]")
            assert_close(ml.Sigma[i], cov[s, s], 1e-10, f"Sigma[{i}]")


class TestTridiagonal:
    def test_dense_roundtrip(self):
        sys = oracle.TriDiagonalSystem(
            (np.array([[2.0]]), np.array([[2.0]])),
            (np.array([[1.0]]),),
            (np.array([1.0]), np.array([0.0])))
        A, B, off = sys.dense()
        assert_close(A, [[2.0, 1.0], [1.0, 2.0]])
        assert_close(B, [1.0, 0.0])

    def test_layered_solve_matches_global(self, ring8_seeded):
        line = build_line_graph(ring8_seeded, 1)
        sys = oracle.assemble_tridiagonal(line)
        blocks = oracle.solve_full(sys)
        ml = oracle.solve_ml(ring8_seeded)
        x = np.concatenate(blocks)
        for pos, u in enumerate(line.state_order()):
            assert_close(x[pos], ml.x_hat[u], 1e-10, f"node {u}")

    def test_layered_information_spd(self, ring8_seeded):
        sys = oracle.assemble_tridiagonal(build_line_graph(ring8_seeded, 1))
        A, _, _ = sys.dense()
        assert np.linalg.eigvalsh(A)[0] > 0

    def test_truncation_noop_when_uncoupled(self, ring8_seeded):
        line = build_line_graph(ring8_seeded, 1)
        sys = oracle.assemble_tridiagonal(line)
        zero = np.zeros_like(sys.upper[-1])
        # removing the last layer changes nothing once it is disconnected
        # and its shared measurement rows are dropped from the previous diag
        cut = oracle.TriDiagonalSystem(
            sys.diag[:-1] + (sys.diag[-1],),
            sys.upper[:-1] + (zero,), sys.rhs)
        full_cut = oracle.solve_full(cut)
        sub = oracle.TriDiagonalSystem(sys.diag[:-1], sys.upper[:-1],
                                       sys.rhs[:-1])
        assert_close(full_cut[0], oracle.solve_full(sub)[0], 1e-10)

    def test_schur_pivots_match_dense_elimination(self, ring8_seeded):
        sys = oracle.assemble_tridiagonal(build_line_graph(ring8_seeded, 1))
        pivots = oracle.schur_diagonals(sys)
        A, _, off = sys.dense()
        for t in range(1, sys.n):
            lead = A[:off[t + 1], :off[t + 1]]
            inner = lead[:off[t], :off[t]]
            cross = lead[:off[t], off[t]:]
            s = lead[off[t]:, off[t]:] - cross.T @ np.linalg.solve(inner, cross)
            assert_close(pivots[t], s, 1e-10, f"pivot {t}")


class TestProductFormula:
    def test_two_layer_hand_value(self):
        # A = [[2, 1], [1, 2]], B = [1, 0]: full x1 = 2/3, truncated x1 = 1/2
        sys = oracle.TriDiagonalSystem(
            (np.array([[2.0]]), np.array([[2.0]])),
            (np.array([[1.0]]),),
            (np.array([1.0]), np.array([0.0])))
        full = oracle.solve_full(sys)
        trunc = oracle.solve_truncated(sys)
        delta = oracle.error_product_formula(sys, full[-1])
        assert_close(trunc, [0.5])
        assert_close(delta, trunc - full[0], 1e-12)

    def test_zero_tail_means_zero_error(self, ring8_seeded):
        sys = oracle.assemble_tridiagonal(build_line_graph(ring8_seeded, 1))
        delta = oracle.error_product_formula(sys, np.zeros_like(sys.rhs[-1]))
        assert_close(delta, np.zeros_like(delta), 1e-14)

    @pytest.mark.parametrize("name,seed", [("ring8", 7), ("ring10", 3),
                                           ("vector-ring8", 5)])
    def test_matches_truncation_difference(self, name, seed):
        g = seeded_instance(corpus.build(name), seed)
        sys = oracle.assemble_tridiagonal(build_line_graph(g, 1))
        full = oracle.solve_full(sys)
        trunc = oracle.solve_truncated(sys)
        delta = oracle.error_product_formula(sys, full[-1])
        assert_close(delta, trunc - full[0], 1e-11)
