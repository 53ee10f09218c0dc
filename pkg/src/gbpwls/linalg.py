"""Dense symmetric linear algebra helpers.

All definiteness decisions in the package go through this module so that a
single relative tolerance policy applies everywhere.
"""
from __future__ import annotations

import numpy as np

# A symmetric matrix counts as SPD iff its smallest eigenvalue exceeds
# SPD_REL_TOL times its largest one.
SPD_REL_TOL = 1e-10

# Reciprocal-condition threshold below which a solve is refused.
RCOND_TOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average away floating-point asymmetry of a mathematically symmetric matrix."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def is_spd(m: np.ndarray, rel_tol: float = SPD_REL_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if m.shape[0] == 0:
        return True
    if not np.allclose(m, m.T, rtol=1e-8, atol=1e-12):
        return False
    w = np.linalg.eigvalsh(symmetrize(m))
    top = w[-1]
    return top > 0.0 and w[0] > rel_tol * top


def min_eig_rel(m: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix, scaled by its spectral norm.

    Nonnegative result means PSD within round-off; the magnitude tells how far
    from the PSD cone the matrix sits, scale free.
    """
    m = symmetrize(m)
    if m.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh(m)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    return w[0] / scale


def psd_leq(a: np.ndarray, b: np.ndarray, slack: float = 0.0) -> bool:
    """True iff a <= b in the PSD order, up to a relative eigenvalue slack."""
    return min_eig_rel(np.asarray(b, float) - np.asarray(a, float)) >= -slack


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Unique symmetric PSD square root (tiny negative eigenvalues clipped)."""
    m = symmetrize(m)
    if m.shape[0] == 0:
        return m.copy()
    w, u = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return symmetrize((u * np.sqrt(w)) @ u.T)


def psd_inv_sqrt(m: np.ndarray) -> np.ndarray:
    """Inverse of the symmetric PSD square root; requires m to be SPD-like."""
    m = symmetrize(m)
    if m.shape[0] == 0:
        return m.copy()
    w, u = np.linalg.eigh(m)
    if w[-1] <= 0.0 or w[0] <= RCOND_TOL * w[-1]:
        raise np.linalg.LinAlgError("matrix not positive definite enough for inverse sqrt")
    return symmetrize((u / np.sqrt(w)) @ u.T)


def sym_rcond(m: np.ndarray) -> float:
    """Reciprocal condition estimate |lambda|_min / |lambda|_max for symmetric m."""
    m = symmetrize(m)
    if m.shape[0] == 0:
        return 1.0
    w = np.abs(np.linalg.eigvalsh(m))
    top = w.max()
    if top == 0.0:
        return 0.0
    return w.min() / top


def sym_solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve m @ x = rhs for symmetric positive definite m."""
    import scipy.linalg

    m = symmetrize(m)
    if m.shape[0] == 0:
        return np.zeros_like(rhs)
    c, low = scipy.linalg.cho_factor(m, check_finite=False)
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)


def sym_inv(m: np.ndarray) -> np.ndarray:
    """Explicit inverse of a symmetric positive definite matrix."""
    m = symmetrize(m)
    if m.shape[0] == 0:
        return m.copy()
    return symmetrize(sym_solve(m, np.eye(m.shape[0])))


def spectral_norm(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def spectral_radius(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def block_diag(blocks) -> np.ndarray:
    import scipy.linalg

    blocks = [np.atleast_2d(np.asarray(b, float)) for b in blocks]
    if not blocks:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*blocks)
