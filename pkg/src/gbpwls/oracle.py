"""Centralized weighted-least-squares ground truth.

Assembles the global information system over all node states, solves it
exactly, and provides the layered block-tridiagonal solvers used by the
estimate-accuracy analysis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularInformationError, UnobservableSystemError
from .graph import LineGraph, MeasurementGraph
from .linalg import RCOND_TOL, is_spd, sym_inv, sym_rcond, sym_solve, symmetrize

# Above this node count the full covariance is not materialized; per-node
# blocks are extracted by column solves instead.
FULL_COVARIANCE_NODE_CAP = 200


@dataclass(frozen=True)
class GlobalSystem:
    """Global information matrix J, vector b, and per-node block offsets."""

    J: np.ndarray
    b: np.ndarray
    offsets: dict
    dims: dict


def assemble_global(graph: MeasurementGraph) -> GlobalSystem:
    offsets, dims = {}, {}
    pos = 0
    for i in graph.node_ids:
        offsets[i] = pos
        dims[i] = graph.node(i).dim
        pos += dims[i]
    J = np.zeros((pos, pos))
    b = np.zeros(pos)

    def blk(i):
        return slice(offsets[i], offsets[i] + dims[i])

    for i in graph.node_ids:
        sm = graph.node(i).self_meas
        if sm is not None:
            J[blk(i), blk(i)] += sm.information()
            b[blk(i)] += sm.information_vector()
    for e in graph.edges:
        ci, cj = np.asarray(e.C_ij), np.asarray(e.C_ji)
        rinv_ci = np.linalg.solve(e.R, ci)
        rinv_cj = np.linalg.solve(e.R, cj)
        rinv_z = np.linalg.solve(e.R, np.asarray(e.z))
        J[blk(e.i), blk(e.i)] += ci.T @ rinv_ci
        J[blk(e.j), blk(e.j)] += cj.T @ rinv_cj
        J[blk(e.i), blk(e.j)] += ci.T @ rinv_cj
        J[blk(e.j), blk(e.i)] += cj.T @ rinv_ci
        b[blk(e.i)] += ci.T @ rinv_z
        b[blk(e.j)] += cj.T @ rinv_z
    return GlobalSystem(symmetrize(J), b, offsets, dims)


@dataclass(frozen=True)
class OracleSolution:
    """Per-node maximum-likelihood marginals."""

    x_hat: dict
    Sigma: dict
    Q: dict
    system: GlobalSystem


def solve_ml(graph: MeasurementGraph) -> OracleSolution:
    sys = assemble_global(graph)
    if not is_spd(sys.J):
        raise UnobservableSystemError(
            "global information matrix is not positive definite")
    x = sym_solve(sys.J, sys.b)
    x_hat, Sigma, Q = {}, {}, {}
    full_cov = graph.n_nodes <= FULL_COVARIANCE_NODE_CAP
    cov = sym_inv(sys.J) if full_cov else None
    for i in graph.node_ids:
        s = slice(sys.offsets[i], sys.offsets[i] + sys.dims[i])
        x_hat[i] = x[s]
        if full_cov:
            Sigma[i] = symmetrize(cov[s, s])
        else:
            rhs = np.zeros((sys.J.shape[0], sys.dims[i]))
            rhs[s] = np.eye(sys.dims[i])
            Sigma[i] = symmetrize(sym_solve(sys.J, rhs)[s])
        Q[i] = sym_inv(Sigma[i])
    return OracleSolution(x_hat, Sigma, Q, sys)


@dataclass(frozen=True)
class TriDiagonalSystem:
    """Symmetric block-tridiagonal normal equations A x = B."""

    diag: tuple          # A_tt
    upper: tuple         # A_{t,t+1}
    rhs: tuple           # B_t

    @property
    def n(self) -> int:
        return len(self.diag)

    def dense(self):
        dims = [d.shape[0] for d in self.diag]
        off = np.concatenate(([0], np.cumsum(dims)))
        A = np.zeros((off[-1], off[-1]))
        B = np.zeros(off[-1])
        for t in range(self.n):
            A[off[t]:off[t + 1], off[t]:off[t + 1]] = self.diag[t]
            B[off[t]:off[t + 1]] = self.rhs[t]
        for t in range(self.n - 1):
            A[off[t]:off[t + 1], off[t + 1]:off[t + 2]] = self.upper[t]
            A[off[t + 1]:off[t + 2], off[t]:off[t + 1]] = self.upper[t].T
        return A, B, off


def _info_pair(C, R, z):
    """(C^T R^{-1} C, C^T R^{-1} z), robust to zero measurement rows."""
    if C.shape[0] == 0:
        return np.zeros((C.shape[1], C.shape[1])), np.zeros(C.shape[1])
    return symmetrize(C.T @ np.linalg.solve(R, C)), C.T @ np.linalg.solve(R, z)


def _cross_info(C_lo, R, C_hi):
    if C_lo.shape[0] == 0:
        return np.zeros((C_lo.shape[1], C_hi.shape[1]))
    return C_lo.T @ np.linalg.solve(R, C_hi)


def assemble_tridiagonal(line: LineGraph) -> TriDiagonalSystem:
    n = line.n_layers
    diag, upper, rhs = [], [], []
    for t in range(n):
        A_tt, B_t = _info_pair(line.C_self[t], line.R_self[t], line.z_self[t])
        if t > 0:
            q, v = _info_pair(line.C_cross_hi[t - 1], line.R_cross[t - 1],
                              line.z_cross[t - 1])
            A_tt = A_tt + q
            B_t = B_t + v
        if t < n - 1:
            q, v = _info_pair(line.C_cross_lo[t], line.R_cross[t], line.z_cross[t])
            A_tt = A_tt + q
            B_t = B_t + v
        diag.append(symmetrize(A_tt))
        rhs.append(B_t)
    for t in range(n - 1):
        upper.append(_cross_info(line.C_cross_lo[t], line.R_cross[t],
                                 line.C_cross_hi[t]))
    return TriDiagonalSystem(tuple(diag), tuple(upper), tuple(rhs))


def solve_full(sys: TriDiagonalSystem) -> list:
    """Block solution of the complete tridiagonal system."""
    A, B, off = sys.dense()
    if sym_rcond(A) < RCOND_TOL:
        raise SingularInformationError("tridiagonal system", "full solve")
    x = sym_solve(A, B)
    return [x[off[t]:off[t + 1]] for t in range(sys.n)]


def solve_truncated(sys: TriDiagonalSystem) -> np.ndarray:
    """First block of the solution with the last block row/column removed."""
    if sys.n < 2:
        raise ValueError("truncation needs at least two layers")
    cut = TriDiagonalSystem(sys.diag[:-1], sys.upper[:-1], sys.rhs[:-1])
    A, B, off = cut.dense()
    if sym_rcond(A) < RCOND_TOL:
        raise SingularInformationError("tridiagonal system", "truncated solve")
    x = sym_solve(A, B)
    return x[off[0]:off[1]]


def schur_diagonals(sys: TriDiagonalSystem) -> list:
    """Forward block-elimination pivots: S_1 = A_11, S_t = A_tt - A^T S^{-1} A."""
    pivots = [sys.diag[0]]
    for t in range(1, sys.n):
        a = sys.upper[t - 1]
        prev = pivots[-1]
        if sym_rcond(prev) < RCOND_TOL:
            raise SingularInformationError("elimination pivot", f"layer {t - 1}")
        pivots.append(symmetrize(sys.diag[t] - a.T @ sym_solve(prev, a)))
    return pivots


def error_product_formula(sys: TriDiagonalSystem, x_last_ml: np.ndarray) -> np.ndarray:
    """Truncation error on the first block via the band-matrix product formula.

    Evaluates (-S_1^{-1} A_12)(-S_2^{-1} A_23)...(-S_{n-1}^{-1} A_{n-1,n}) x_n^ML
    with S_t the forward elimination pivots, then flips the sign so the result
    equals (truncated first block) - (full first block); the raw product comes
    out as the negative of that difference.
    """
    if sys.n < 2:
        raise ValueError("product formula needs at least two layers")
    pivots = schur_diagonals(sys)[:-1]
    v = np.asarray(x_last_ml, float)
    for t in range(sys.n - 2, -1, -1):
        if sym_rcond(pivots[t]) < RCOND_TOL:
            raise SingularInformationError("elimination pivot", f"layer {t}")
        v = -sym_solve(pivots[t], sys.upper[t] @ v)
    return -v
