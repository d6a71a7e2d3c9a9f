"""Dense least-squares machinery for operator construction.

Householder QR with back-substitution; no pivoting. Rank problems surface as
SingularFitError rather than being regularised away, and the triangular
conditioning is reported to the caller via ``condition_estimate``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ContractViolationError, SingularFitError

RANK_TOLERANCE = 1e-12


class LeastSquaresSolution(NamedTuple):
    coefficients: np.ndarray
    condition_estimate: float


class PseudoInverse(NamedTuple):
    weights: np.ndarray  # n x s: derivative weights per stencil value
    condition_estimate: float


def _validate(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ContractViolationError(f"matrix must be 2-D, got shape {a.shape}")
    if a.shape[0] < a.shape[1]:
        raise ContractViolationError(f"system must have rows >= cols, got {a.shape}")
    if not np.isfinite(a).all():
        raise ContractViolationError("matrix entries must be finite")
    return a


def householder_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (V, R) with the Householder vectors stored column-wise in V."""
    r = _validate(a).copy()
    s, n = r.shape
    v_store = np.zeros((s, n))
    for j in range(n):
        x = r[j:, j]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            # leave a zero pivot; the rank check below reports the column
            continue
        v = x.copy()
        v[0] += np.copysign(norm_x, x[0])
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        v_store[j:, j] = v
    return v_store, np.triu(r[:n, :])


def _apply_qt(v_store: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.array(b, dtype=np.float64, copy=True)
    if out.ndim == 1:
        out = out[:, None]
        squeeze = True
    else:
        squeeze = False
    s, n = v_store.shape
    for j in range(n):
        v = v_store[j:, j]
        out[j:, :] -= 2.0 * np.outer(v, v @ out[j:, :])
    return out[:, 0] if squeeze else out


def _check_rank(r: np.ndarray) -> float:
    diag = np.abs(np.diag(r))
    top = diag.max(initial=0.0)
    bad = np.flatnonzero(diag < RANK_TOLERANCE * top) if top > 0.0 else np.arange(diag.size)
    if bad.size:
        col = int(bad[0])
        raise SingularFitError(col, f"rank-deficient fit: column {col} has negligible pivot")
    return float(top / diag.min())


def _back_substitute(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = r.shape[0]
    x = np.zeros_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - r[i, i + 1:] @ x[i + 1:]) / r[i, i]
    return x


def qr_least_squares(a: np.ndarray, b: np.ndarray) -> LeastSquaresSolution:
    """Minimise ||a x - b|| over x; raises SingularFitError on rank deficiency."""
    a = _validate(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.shape[0],):
        raise ContractViolationError(f"rhs must have length {a.shape[0]}, got {b.shape}")
    v_store, r = householder_factor(a)
    cond = _check_rank(r)
    qtb = _apply_qt(v_store, b)
    x = _back_substitute(r, qtb[: a.shape[1]])
    return LeastSquaresSolution(x, cond)


def solve_pseudoinverse_rows(a: np.ndarray) -> PseudoInverse:
    """Least-squares pseudo-inverse of a full-rank tall matrix, one QR factorisation."""
    a = _validate(a)
    s, n = a.shape
    v_store, r = householder_factor(a)
    cond = _check_rank(r)
    qt = _apply_qt(v_store, np.eye(s))
    weights = _back_substitute(r, qt[:n, :])
    return PseudoInverse(weights, cond)
