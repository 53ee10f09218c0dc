import math

import numpy as np
import pytest

from gbpwls import convergence, corpus
from gbpwls.errors import DominanceViolationError, FixedPointError
from gbpwls.graph import (EdgeSpec, MeasurementGraph, NodeSpec,
                          SelfMeasurement)
from gbpwls.linalg import spectral_radius

from conftest import assert_close


def ring_fixed_point_closed_form(r_self=5.0, r_edge=1.0):
    """On a homogeneous scalar ring the outgoing information solves
    q = 1/r_self + q / (r_edge * q + 1)."""
    a = 1.0 / r_self
    q = (a + math.sqrt(a * a + 4.0 * a / r_edge)) / 2.0
    rho = 1.0 / (r_edge * q + 1.0)
    alpha = (a + 1.0 / r_edge) / q - 1.0
    return q, rho, alpha


def scalar_node(i, r_self=5.0, with_self=True):
    sm = SelfMeasurement([[1.0]], [[r_self]], [0.0]) if with_self else None
    return NodeSpec(i, 1, sm)


def scalar_edge(i, j):
    return EdgeSpec(i, j, [[1.0]], [[1.0]], [[1.0]], [0.0])


def cycle_with_chord():
    # 4-cycle plus the (1,3) chord: nodes 1 and 3 see three neighbors
    nodes = [scalar_node(i) for i in (1, 2, 3, 4)]
    edges = [scalar_edge(1, 2), scalar_edge(2, 3), scalar_edge(3, 4),
             scalar_edge(1, 4), scalar_edge(1, 3)]
    return MeasurementGraph(nodes, edges).ensure_valid()


class TestFixedPoint:
    def test_ring_closed_form(self, ring8):
        q, rho, alpha = ring_fixed_point_closed_form()
        fp = convergence.fixed_point(ring8)
        for s in ring8.directed_pairs():
            assert_close(fp.Q_out[s], [[q]], 1e-10)
            assert_close(fp.Q_in[s], [[q / (q + 1.0)]], 1e-10)
            assert_close(fp.R_in[s], [[1.0 + 1.0 / q]], 1e-10)
        for i in ring8.node_ids:
            assert_close(fp.Q_node[i], [[0.2 + 2.0 * q / (q + 1.0)]], 1e-10)

    def test_path_hand_values(self):
        g = MeasurementGraph([scalar_node(i) for i in (1, 2, 3)],
                             [scalar_edge(1, 2), scalar_edge(2, 3)])
        fp = convergence.fixed_point(g.ensure_valid())
        assert_close(fp.Q_out[(1, 2)], [[0.2]])
        assert_close(fp.Q_in[(1, 2)], [[1.0 / 6.0]])
        assert_close(fp.Q_out[(2, 3)], [[0.2 + 1.0 / 6.0]])
        assert_close(fp.Q_node[3], [[0.2 + 11.0 / 41.0]])

    def test_dominance_enforced_on_cycles(self):
        nodes = [scalar_node(i, with_self=False) for i in (1, 2, 3, 4)]
        edges = [scalar_edge(1, 2), scalar_edge(2, 3), scalar_edge(3, 4),
                 scalar_edge(1, 4)]
        g = MeasurementGraph(nodes, edges)
        with pytest.raises(DominanceViolationError):
            convergence.fixed_point(g)

    def test_dominance_skippable(self):
        g = corpus.build("dense7")
        with pytest.raises(DominanceViolationError):
            convergence.fixed_point(g)
        fp = convergence.fixed_point(g, require_dominance=False)
        assert fp.residual < 1e-12

    def test_iteration_cap_raises(self, ring8):
        with pytest.raises(FixedPointError):
            convergence.fixed_point(ring8, tol=1e-15, max_iters=3)

    def test_acyclic_terminates_fast(self, tree15):
        fp = convergence.fixed_point(tree15)
        # finite-step convergence: one confirming iteration past the diameter
        from gbpwls.graph import diameter
        assert fp.iterations <= diameter(tree15) + 2


class TestConstants:
    def test_ring_values(self, ring8):
        q, rho_ref, alpha_ref = ring_fixed_point_closed_form()
        fp = convergence.fixed_point(ring8)
        eta, rho, alpha = convergence.constants(ring8, fp)
        assert_close(eta, 1.0 / 1.2)
        assert_close(rho, rho_ref, 1e-10)
        assert_close(alpha, alpha_ref, 1e-10)

    def test_rho_below_one_everywhere(self):
        for name in corpus.CORPUS:
            g = corpus.build(name)
            fp = convergence.fixed_point(g, require_dominance=False)
            _, rho, _ = convergence.constants(g, fp)
            assert rho < 1.0, name


class TestDynamicsMatrix:
    def test_sparsity_pattern(self):
        g = cycle_with_chord()
        fp = convergence.fixed_point(g)
        A = convergence.assemble_A_infinity(g, fp)
        for (i, j) in A.slots:
            for (w, v) in A.slots:
                blk = A.block((i, j), (w, v))
                feeds = (v == i and w != j and w in g.neighbors(i))
                if feeds:
                    assert np.abs(blk).max() > 0
                else:
                    assert np.abs(blk).max() == 0

    def test_chord_node_block_shape(self):
        # the degree-3 nodes contribute 3x3 per-node blocks with zero diagonal
        g = cycle_with_chord()
        fp = convergence.fixed_point(g)
        A = convergence.assemble_A_infinity(g, fp)
        rows = [s for s in A.slots if s[0] == 1]
        assert len(rows) == 3
        for (i, j) in rows:
            assert np.abs(A.block((i, j), (j, i))).max() == 0

    def test_prune_restricts_to_core(self):
        g = corpus.build("ring-pendant")
        fp = convergence.fixed_point(g)
        A = convergence.assemble_A_infinity(g, fp)
        A_bar = convergence.prune_A(g, A)
        assert all(s[0] in {1, 2, 3, 4} and s[1] in {1, 2, 3, 4}
                   for s in A_bar.slots)
        assert len(A_bar.slots) == 8

    def test_tree_prunes_to_nothing(self, tree15):
        fp = convergence.fixed_point(tree15)
        A = convergence.assemble_A_infinity(tree15, fp)
        A_bar = convergence.prune_A(tree15, A)
        assert A_bar.slots == ()
        assert A_bar.matrix.shape == (0, 0)

    def test_similarity_preserves_spectrum(self, ring8):
        fp = convergence.fixed_point(ring8)
        A = convergence.assemble_A_infinity(ring8, fp)
        B, beta = convergence.assemble_B_infinity(fp, A)
        assert_close(beta, spectral_radius(A.matrix), 1e-9)
        ev_a = np.sort(np.abs(np.linalg.eigvals(A.matrix)))
        ev_b = np.sort(np.abs(np.linalg.eigvals(B)))
        assert np.abs(ev_a - ev_b).max() < 1e-8


class TestVerdicts:
    def test_marginal_band(self):
        one = convergence.SlotMatrix(np.array([[1.0]]), ((1, 2),), {(1, 2): 0})
        v = convergence.stability_verdict(one)
        assert not v.stable and v.marginal
        small = convergence.SlotMatrix(np.array([[0.5]]), ((1, 2),), {(1, 2): 0})
        assert convergence.stability_verdict(small).stable

    def test_single_cycle_distributed_pass(self, ring8):
        rep = convergence.analyze_stability(ring8)
        assert rep.distributed_verdict == "pass"
        assert rep.per_node_sigma == {}
        assert_close(rep.rho_bar, rep.rho)

    def test_k5_distributed_values(self):
        # dense stable graph: every node is tested and the condition holds
        rep = convergence.analyze_stability(corpus.build("k5"))
        assert rep.distributed_verdict == "pass"
        assert set(rep.per_node_sigma) == {1, 2, 3, 4, 5}
        sig = max(rep.per_node_sigma.values())
        assert_close(sig, 0.9125657912961054, 1e-9)
        assert_close(rep.rho_bar, sig * sig, 1e-9)

    def test_tree_not_applicable(self, tree15):
        rep = convergence.analyze_stability(tree15)
        assert rep.distributed_verdict == "not-applicable"
        assert rep.spectral_radius == 0.0
        assert rep.stable

    def test_dichotomy(self, ring8):
        stable = convergence.analyze_stability(ring8)
        assert stable.stable and stable.spectral_radius < 1.0
        unstable = convergence.analyze_stability(corpus.build("dense7"))
        assert not unstable.stable and not unstable.marginal
        assert unstable.spectral_radius > 1.0

    def test_report_constants_consistent(self, ring8):
        rep = convergence.analyze_stability(ring8)
        q, rho_ref, alpha_ref = ring_fixed_point_closed_form()
        assert_close(rep.eta, 1.0 / 1.2)
        assert_close(rep.rho, rho_ref, 1e-10)
        assert_close(rep.alpha, alpha_ref, 1e-10)
        assert_close(rep.beta, rep.spectral_radius, 1e-9)
