"""Accuracy of the distributed estimates against the centralized solution.

Quantifies two gaps for a chosen center node: the information-matrix excess
after the cycle-free horizon, bounded via constants of an acyclic surrogate
graph, and the estimate error, bounded by the boundary-energy constant kappa
decaying in the dominance ratio eta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import convergence, messages, oracle as oracle_mod
from .graph import (MeasurementGraph, bfs_distances, build_line_graph,
                    build_reduced_graph, cycle_free_depth, is_acyclic)
from .linalg import psd_inv_sqrt, psd_leq, spectral_norm, sym_inv, symmetrize

PSD_SLACK = 1e-8

# Asymptotic estimate bound applies only once the geometric factors are small.
SMALLNESS_THRESHOLD = 1e-3
ASYMPTOTIC_SLACK = 0.1


def reduced_constants(graph: MeasurementGraph, i: int):
    """(alpha, rho) of the acyclic surrogate around node i.

    For an acyclic graph the surrogate is the graph itself.
    """
    if is_acyclic(graph):
        target = graph
    else:
        target = build_reduced_graph(graph, i).graph.ensure_valid()
    fp = convergence.fixed_point(target)
    _, rho, alpha = convergence.constants(target, fp)
    return alpha, rho


def kappa(graph: MeasurementGraph, i: int,
          ml: oracle_mod.OracleSolution) -> float:
    """Boundary energy just past the cycle-free horizon of node i.

    Sums (x_j^ML)^T C_jt^T R_tj^{-1} C_jt x_j^ML over edges (t, j) with t at
    distance d_i from i and j adjacent at distance d_i + 1.
    """
    d = cycle_free_depth(graph, i)
    if d == math.inf:
        return 0.0
    dist = bfs_distances(graph, i)
    total = 0.0
    for t in sorted(u for u, h in dist.items() if h == d):
        for j in graph.neighbors(t):
            if dist[j] != d + 1:
                continue
            e = graph.edge(t, j)
            cj = e.coef(j)
            v = cj @ ml.x_hat[j]
            total += float(v @ np.linalg.solve(e.R, v))
    return total


def _relative_gap(Q, Q_ml):
    w = psd_inv_sqrt(Q_ml)
    return spectral_norm(symmetrize(w @ (Q - Q_ml) @ w))


@dataclass(frozen=True)
class QAccuracyRecord:
    node: int
    d: int
    bound_at_d: float
    gap_at_d: float
    lower_ok: bool
    upper_ok: bool
    inf_available: bool
    inf_lower_bound: float
    gap_at_inf: float
    inf_lower_ok: bool
    inf_upper_ok: bool


def q_accuracy(graph, i, Q_at_d, ml, alpha_tilde, rho_tilde, d,
               Q_at_inf=None, alpha=None, rho=None) -> QAccuracyRecord:
    """Sandwich check on the belief information matrix at the horizon and,
    when available, the two-sided check on its limit."""
    Q_ml = ml.Q[i]
    bound = alpha_tilde * rho_tilde ** (d - 1)
    lower_ok = psd_leq(Q_ml, Q_at_d, PSD_SLACK)
    upper_ok = psd_leq(Q_at_d, (1.0 + bound) * Q_ml, PSD_SLACK)
    gap = _relative_gap(Q_at_d, Q_ml)

    inf_available = Q_at_inf is not None and alpha is not None and rho is not None
    inf_lower_bound = float("nan")
    gap_inf = float("nan")
    inf_lower_ok = inf_upper_ok = False
    if inf_available:
        g = alpha * rho ** (d - 1)
        inf_lower_bound = g / (1.0 + g)
        inf_lower_ok = psd_leq((1.0 - inf_lower_bound) * Q_ml, Q_at_inf, PSD_SLACK)
        inf_upper_ok = psd_leq(Q_at_inf, (1.0 + bound) * Q_ml, PSD_SLACK)
        gap_inf = _relative_gap(Q_at_inf, Q_ml)
    return QAccuracyRecord(i, d, bound, gap, lower_ok, upper_ok,
                           inf_available, inf_lower_bound, gap_inf,
                           inf_lower_ok, inf_upper_ok)


@dataclass(frozen=True)
class XAccuracyRecord:
    node: int
    d: int
    weighted_error: float
    bound: float
    ok: bool
    asymptotic_applicable: bool
    asymptotic_error: float
    asymptotic_bound: float
    asymptotic_ok: bool


def x_accuracy(graph, i, x_at_d, Q_at_1, ml, kappa_val, eta, d,
               x_at_inf=None, rho=None, beta=None) -> XAccuracyRecord:
    """Quadratic-form bound on the horizon estimate error; when the geometric
    factors are small enough, also the asymptotic squared-norm bound."""
    dx = x_at_d - ml.x_hat[i]
    weighted = float(dx @ Q_at_1 @ dx)
    bound = kappa_val * eta ** d
    ok = weighted <= bound * (1.0 + PSD_SLACK) + PSD_SLACK

    applicable = (x_at_inf is not None and rho is not None and beta is not None
                  and rho ** (d - 1) < SMALLNESS_THRESHOLD
                  and beta ** (d - 1) < SMALLNESS_THRESHOLD)
    a_err = a_bound = float("nan")
    a_ok = False
    if applicable:
        a_err = float(np.linalg.norm(x_at_inf - ml.x_hat[i]) ** 2)
        a_bound = (1.0 + ASYMPTOTIC_SLACK) * bound * spectral_norm(sym_inv(Q_at_1))
        a_ok = a_err <= a_bound + PSD_SLACK
    return XAccuracyRecord(i, d, weighted, bound, ok,
                           applicable, a_err, a_bound, a_ok)


@dataclass(frozen=True)
class LayeredValidationRecord:
    node: int
    applicable: bool
    k_star: int
    delta_engine: np.ndarray | None
    delta_truncated: np.ndarray | None
    delta_product: np.ndarray | None
    max_disagreement: float
    ok: bool


def layered_validation(graph: MeasurementGraph, i: int,
                       ml: oracle_mod.OracleSolution,
                       x_engine_at=None) -> LayeredValidationRecord:
    """Cross-check three routes to the horizon estimate error of node i.

    Routes: engine estimate minus the centralized value, truncated layered
    solve minus the full layered solve, and the block-elimination product
    formula.  x_engine_at, when given, maps an iteration index to the
    engine's estimate of node i at that iteration (avoids a fresh run).
    """
    d = cycle_free_depth(graph, i)
    if d == math.inf:
        return LayeredValidationRecord(i, False, 0, None, None, None, 0.0, True)
    line = build_line_graph(graph, i)
    sys = oracle_mod.assemble_tridiagonal(line)
    full = oracle_mod.solve_full(sys)
    x_trunc = oracle_mod.solve_truncated(sys)
    delta_trunc = x_trunc - full[0]
    delta_prod = oracle_mod.error_product_formula(sys, full[-1])

    # the truncated layered system carries exactly the information the engine
    # has accumulated at the center after d+1 iterations
    k_star = d + 1
    if x_engine_at is None:
        trace, _ = messages.run(graph, max_iters=k_star, tol=0.0)
        x_k = trace[k_star - 1].x_hat[i]
    else:
        x_k = x_engine_at(k_star)
    delta_engine = x_k - ml.x_hat[i]

    disagreement = max(
        float(np.linalg.norm(delta_engine - delta_trunc)),
        float(np.linalg.norm(delta_prod - delta_trunc)),
    )
    scale = 1.0 + float(np.linalg.norm(delta_trunc))
    ok = disagreement / scale < 1e-9
    return LayeredValidationRecord(i, True, k_star, delta_engine, delta_trunc,
                                   delta_prod, disagreement, ok)


@dataclass(frozen=True)
class AccuracyReport:
    node: int
    d: float
    alpha_tilde: float
    rho_tilde: float
    eta: float
    kappa: float
    q_record: QAccuracyRecord | None
    x_record: XAccuracyRecord | None
    layered: LayeredValidationRecord | None
    exact: bool          # acyclic graph: estimates are exact at the diameter
    notes: tuple = ()


def node_accuracy(graph: MeasurementGraph, i: int,
                  ml: oracle_mod.OracleSolution,
                  stability: convergence.StabilityReport,
                  trace) -> AccuracyReport:
    """Full per-node accuracy report given a long-enough engine trace.

    trace[k-1] must hold the engine beliefs at iteration k; for the
    asymptotic parts the last entry is taken as the limit.
    """
    d = cycle_free_depth(graph, i)
    eta = stability.eta
    if d == math.inf:
        alpha_tilde, rho_tilde = stability.alpha, stability.rho
        return AccuracyReport(i, d, alpha_tilde, rho_tilde, eta, 0.0,
                              None, None,
                              layered_validation(graph, i, ml),
                              exact=True,
                              notes=("acyclic: exact in diameter iterations",))

    notes = []
    try:
        alpha_tilde, rho_tilde = reduced_constants(graph, i)
    except Exception as exc:  # surrogate may violate the dominance condition
        return AccuracyReport(i, d, float("nan"), float("nan"), eta,
                              kappa(graph, i, ml), None, None, None, False,
                              notes=(f"reduced constants unavailable: {exc}",))

    if len(trace) <= d:
        raise ValueError("trace too short for the cycle-free horizon")
    stable = stability.stable
    Q_inf = trace[-1].Q[i] if stable else None
    x_inf = trace[-1].x_hat.get(i) if stable else None
    if not stable:
        notes.append("unstable: asymptotic checks skipped")

    if d >= 1:
        q_rec = q_accuracy(graph, i, trace[d - 1].Q[i], ml, alpha_tilde,
                           rho_tilde, d, Q_at_inf=Q_inf, alpha=stability.alpha,
                           rho=stability.rho)
    else:
        # no information matrix exists before the first iteration
        q_rec = None
        notes.append("horizon 0: information sandwich not applicable")
    kap = kappa(graph, i, ml)
    x_rec = x_accuracy(graph, i, trace[d].x_hat[i], trace[0].Q[i], ml, kap,
                       eta, d, x_at_inf=x_inf, rho=stability.rho,
                       beta=stability.beta)
    lay = layered_validation(graph, i, ml,
                             x_engine_at=lambda k: trace[k - 1].x_hat[i])
    return AccuracyReport(i, d, alpha_tilde, rho_tilde, eta, kap,
                          q_rec, x_rec, lay, False, tuple(notes))
