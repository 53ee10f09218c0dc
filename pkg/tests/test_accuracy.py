import math

import numpy as np
import pytest

from gbpwls import accuracy, convergence, corpus, messages, oracle
from gbpwls.graph import cycle_free_depth
from gbpwls.randomness import seeded_instance

from conftest import assert_close


def full_pipeline(name, seed, extra_iters=5):
    g = seeded_instance(corpus.build(name), seed)
    ml = oracle.solve_ml(g)
    st = convergence.analyze_stability(g)
    d = cycle_free_depth(g, 1)
    horizon = int(d) if d != math.inf else 0
    trace, _ = messages.run(g, max(200, horizon + extra_iters), 1e-14)
    return g, ml, st, trace


class TestReducedConstants:
    def test_ring8_hand_values(self, ring8):
        alpha_t, rho_t = accuracy.reduced_constants(ring8, 1)
        # the split surrogate is a path whose endpoint copies carry doubled
        # self covariance 10: the extreme slots give 10/11 and 25/8 exactly
        assert_close(rho_t, 10.0 / 11.0, 1e-10)
        assert_close(alpha_t, 3.125, 1e-10)

    def test_acyclic_uses_graph_itself(self, tree15):
        alpha_t, rho_t = accuracy.reduced_constants(tree15, 1)
        fp = convergence.fixed_point(tree15)
        _, rho, alpha = convergence.constants(tree15, fp)
        assert_close(rho_t, rho)
        assert_close(alpha_t, alpha)


class TestKappa:
    def test_ring8_boundary_energy(self):
        g, ml, _, _ = full_pipeline("ring8", 7)
        # horizon 3 around node 1; the only boundary node is 5, reached
        # through two unit-coefficient, unit-noise edges
        assert_close(accuracy.kappa(g, 1, ml),
                     2.0 * float(ml.x_hat[5][0]) ** 2, 1e-12)

    def test_acyclic_zero(self, tree15_seeded):
        ml = oracle.solve_ml(tree15_seeded)
        assert accuracy.kappa(tree15_seeded, 1, ml) == 0.0


class TestInformationSandwich:
    def test_ring8_holds(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        alpha_t, rho_t = accuracy.reduced_constants(g, 1)
        rec = accuracy.q_accuracy(g, 1, trace[2].Q[1], ml, alpha_t, rho_t, 3,
                                  Q_at_inf=trace[-1].Q[1], alpha=st.alpha,
                                  rho=st.rho)
        assert rec.lower_ok and rec.upper_ok
        assert rec.inf_available and rec.inf_lower_ok and rec.inf_upper_ok
        assert 0.0 < rec.gap_at_d <= rec.bound_at_d
        assert rec.gap_at_inf <= rec.gap_at_d + 1e-12

    def test_violated_bound_detected(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        rec = accuracy.q_accuracy(g, 1, 2.0 * trace[2].Q[1], ml, 0.01, 0.5, 3)
        assert not rec.upper_ok


class TestEstimateBound:
    def test_ring8_holds(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        kap = accuracy.kappa(g, 1, ml)
        rec = accuracy.x_accuracy(g, 1, trace[3].x_hat[1], trace[0].Q[1], ml,
                                  kap, st.eta, 3)
        assert rec.ok
        assert rec.weighted_error <= rec.bound * (1 + 1e-8) + 1e-8
        assert not rec.asymptotic_applicable

    def test_asymptotic_branch(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        kap = accuracy.kappa(g, 1, ml)
        # force the smallness precondition with tiny rates
        rec = accuracy.x_accuracy(g, 1, trace[3].x_hat[1], trace[0].Q[1], ml,
                                  kap, st.eta, 3, x_at_inf=trace[-1].x_hat[1],
                                  rho=1e-4, beta=1e-4)
        assert rec.asymptotic_applicable
        assert rec.asymptotic_error <= rec.asymptotic_bound + 1e-8


class TestLayeredValidation:
    @pytest.mark.parametrize("name,seed", [("ring8", 7), ("vector-ring8", 7),
                                           ("ring10", 3)])
    def test_three_way_agreement(self, name, seed):
        g = seeded_instance(corpus.build(name), seed)
        ml = oracle.solve_ml(g)
        rec = accuracy.layered_validation(g, 1, ml)
        assert rec.applicable
        assert rec.k_star == int(cycle_free_depth(g, 1)) + 1
        assert rec.ok, f"disagreement {rec.max_disagreement:.3e}"
        assert_close(rec.delta_engine, rec.delta_truncated, 1e-9)
        assert_close(rec.delta_product, rec.delta_truncated, 1e-9)

    def test_acyclic_not_applicable(self, tree15_seeded):
        ml = oracle.solve_ml(tree15_seeded)
        rec = accuracy.layered_validation(tree15_seeded, 1, ml)
        assert not rec.applicable and rec.ok


class TestNodeAccuracy:
    def test_ring8_full_report(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        rep = accuracy.node_accuracy(g, 1, ml, st, trace)
        assert rep.d == 3 and not rep.exact
        assert rep.q_record.lower_ok and rep.q_record.upper_ok
        assert rep.x_record.ok
        assert rep.layered.ok

    def test_tree_exact(self, tree15_seeded):
        ml = oracle.solve_ml(tree15_seeded)
        st = convergence.analyze_stability(tree15_seeded)
        trace, _ = messages.run(tree15_seeded, 50, 1e-14)
        rep = accuracy.node_accuracy(tree15_seeded, 1, ml, st, trace)
        assert rep.exact and rep.d == math.inf
        assert "acyclic: exact in diameter iterations" in rep.notes

    def test_horizon_zero_skips_sandwich(self):
        g, ml, st, trace = full_pipeline("k5", 7)
        rep = accuracy.node_accuracy(g, 1, ml, st, trace)
        assert rep.d == 0
        assert rep.q_record is None
        assert rep.x_record is not None and rep.x_record.ok
        assert any("horizon 0" in n for n in rep.notes)

    def test_unstable_skips_asymptotics(self):
        g = seeded_instance(corpus.build("dense7"), 1)
        ml = oracle.solve_ml(g)
        st = convergence.analyze_stability(g)
        trace, _ = messages.run(g, 5, 0.0)
        rep = accuracy.node_accuracy(g, 1, ml, st, trace)
        assert any("unstable" in n for n in rep.notes)
        assert rep.x_record is not None
        assert not rep.x_record.asymptotic_applicable

    def test_short_trace_rejected(self):
        g, ml, st, trace = full_pipeline("ring8", 7)
        with pytest.raises(ValueError):
            accuracy.node_accuracy(g, 1, ml, st, trace[:2])
