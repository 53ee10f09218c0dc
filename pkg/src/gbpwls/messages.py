"""Synchronous Gaussian belief propagation over a measurement graph.

Messages are exchanged in information form (vector alpha, matrix Q).  One
iteration updates every node belief from the previous factor-to-variable
messages, then every directed factor message from the fresh beliefs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInformationError
from .graph import MeasurementGraph
from .linalg import RCOND_TOL, sym_inv, sym_rcond, sym_solve, symmetrize

# Estimate norm above which a run is declared divergent.
DIVERGENCE_GUARD = 1e12


@dataclass(frozen=True)
class DirectedMessage:
    alpha: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True)
class MessageSet:
    """All directed messages at one iteration.

    Keys are directed pairs (src, dst) over the edge {src, dst}:
    factor_to_var[(src, dst)] lives in dst's state space, var_to_factor
    [(src, dst)] is node src's outgoing belief toward that edge and lives in
    src's state space.  derived[(src, dst)] holds the transformed measurement
    (z, R) feeding the factor_to_var message into dst.
    """

    iteration: int
    factor_to_var: dict
    var_to_factor: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BeliefState:
    """Per-node information parameters and estimates at one iteration.

    Nodes whose belief information matrix is numerically singular appear in
    alpha/Q but not in x_hat/Sigma.
    """

    iteration: int
    alpha: dict
    Q: dict
    x_hat: dict
    Sigma: dict


def init_messages(graph: MeasurementGraph) -> MessageSet:
    """Iteration-0 messages: each edge sends its raw information both ways."""
    f2v = {}
    derived = {}
    for e in graph.edges:
        for dst in (e.i, e.j):
            src = e.other(dst)
            c = e.coef(dst)
            rinv_c = np.linalg.solve(e.R, c)
            f2v[(src, dst)] = DirectedMessage(c.T @ np.linalg.solve(e.R, e.z),
                                              symmetrize(c.T @ rinv_c))
            derived[(src, dst)] = (np.asarray(e.z, float), np.asarray(e.R, float))
    return MessageSet(0, f2v, {}, derived)


def _node_information(graph, i, f2v):
    node = graph.node(i)
    alpha = np.zeros(node.dim)
    Q = np.zeros((node.dim, node.dim))
    sm = node.self_meas
    if sm is not None:
        alpha = alpha + sm.information_vector()
        Q = Q + sm.information()
    for j in graph.neighbors(i):
        msg = f2v[(j, i)]
        alpha = alpha + msg.alpha
        Q = Q + msg.Q
    return alpha, symmetrize(Q)


def step(graph: MeasurementGraph, msgs: MessageSet):
    """One synchronous iteration; returns (MessageSet, BeliefState) at k+1."""
    k = msgs.iteration + 1
    alpha_n, Q_n, x_hat, Sigma = {}, {}, {}, {}
    for i in graph.node_ids:
        alpha_n[i], Q_n[i] = _node_information(graph, i, msgs.factor_to_var)
        if sym_rcond(Q_n[i]) >= RCOND_TOL:
            x_hat[i] = sym_solve(Q_n[i], alpha_n[i])
            Sigma[i] = sym_inv(Q_n[i])
    beliefs = BeliefState(k, alpha_n, Q_n, x_hat, Sigma)

    v2f = {}
    for (i, j) in graph.directed_pairs():
        inc = msgs.factor_to_var[(j, i)]
        v2f[(i, j)] = DirectedMessage(alpha_n[i] - inc.alpha,
                                      symmetrize(Q_n[i] - inc.Q))

    f2v, derived = {}, {}
    for (i, j) in graph.directed_pairs():
        out = v2f[(i, j)]
        if sym_rcond(out.Q) < RCOND_TOL:
            raise SingularInformationError("outgoing information", f"({i},{j})")
        e = graph.edge(i, j)
        ci, cj = e.coef(i), e.coef(j)
        z_msg = e.z - ci @ sym_solve(out.Q, out.alpha)
        R_msg = symmetrize(e.R + ci @ sym_solve(out.Q, ci.T))
        rinv_cj = np.linalg.solve(R_msg, cj)
        f2v[(i, j)] = DirectedMessage(cj.T @ np.linalg.solve(R_msg, z_msg),
                                      symmetrize(cj.T @ rinv_cj))
        derived[(i, j)] = (z_msg, R_msg)

    return MessageSet(k, f2v, v2f, derived), beliefs


def _relative_change(beliefs, prev):
    worst = 0.0
    for i in beliefs.Q:
        if i not in beliefs.x_hat or i not in prev.x_hat:
            return np.inf
        dx = np.linalg.norm(beliefs.x_hat[i] - prev.x_hat[i])
        worst = max(worst, dx / (1.0 + np.linalg.norm(beliefs.x_hat[i])))
        dq = np.linalg.norm(beliefs.Q[i] - prev.Q[i])
        worst = max(worst, dq / (1.0 + np.linalg.norm(beliefs.Q[i])))
    return worst


def run(graph: MeasurementGraph, max_iters: int, tol: float):
    """Iterate to convergence; returns (trace of BeliefState, reason).

    Reasons: "converged" (relative change in x_hat and Q below tol),
    "diverged" (estimate norm passed the guard), "iteration cap".
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    msgs = init_messages(graph)
    trace = []
    prev = None
    for _ in range(max_iters):
        msgs, beliefs = step(graph, msgs)
        trace.append(beliefs)
        if beliefs.x_hat and max(np.linalg.norm(v) for v in beliefs.x_hat.values()) > DIVERGENCE_GUARD:
            return trace, "diverged"
        if prev is not None and _relative_change(beliefs, prev) < tol:
            return trace, "converged"
        prev = beliefs
    return trace, "iteration cap"
