"""Baseline schemes: per-axis linear interpolation / averaging restriction,
and their collapse into a single sparse matrix.

Interpolation is separable: one small matrix per axis, tangential applied
twice and a normal one across the face. Every row of every axis matrix sums
to one, so constants survive each stage. The collapsed form multiplies the
per-axis weights out into one CSR operator over the whole source region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .csr import CsrOperator, OperatorKey, from_triplets
from .errors import ConfigurationError, ContractViolationError
from .geometry import FaceConfig, HaloBuffer, from_reference, to_reference


@dataclass(frozen=True)
class AxisOperator:
    kind: str  # 'tangential' | 'normal' | 'restrict_tangential' | 'restrict_normal'
    matrix: np.ndarray


def interp_row_1d(levels: np.ndarray, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear-interpolation row for one target coordinate over source levels.

    Interior targets use the bracketing pair; targets beyond the outermost
    level take the constant slope of the nearest pair. A single level yields
    weight one. Coincident targets come out one-hot (the partner weight is
    exactly zero).
    """
    n = levels.size
    if n == 1:
        return np.array([0]), np.array([1.0])
    hi = int(np.searchsorted(levels, x))
    if hi <= 0:
        a, b = 0, 1
    elif hi >= n:
        a, b = n - 2, n - 1
    else:
        a, b = hi - 1, hi
    t = (x - levels[a]) / (levels[b] - levels[a])
    return np.array([a, b]), np.array([1.0 - t, t])


def _coarse_tangential_levels(p: int) -> np.ndarray:
    return (np.arange(p) + 0.5) * 3.0


def _coarse_normal_levels(k: int) -> np.ndarray:
    return (np.arange(2 * k) + 0.5 - k) * 3.0


def _fine_normal_levels(k: int) -> np.ndarray:
    return np.arange(2 * k) + 0.5 - k


def _rows_to_matrix(rows, n_cols: int) -> np.ndarray:
    mat = np.zeros((len(rows), n_cols))
    for r, (idx, w) in enumerate(rows):
        mat[r, idx] += w
    return mat


def build_axis_tangential(p: int) -> AxisOperator:
    """3p x p map from coarse tangential centres onto fine ones."""
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    levels = _coarse_tangential_levels(p)
    rows = [interp_row_1d(levels, m + 0.5) for m in range(3 * p)]
    return AxisOperator("tangential", _rows_to_matrix(rows, p))


def build_axis_normal(k: int) -> AxisOperator:
    """k x 2k map from the straddling coarse layers onto the fine halo layers."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    levels = _coarse_normal_levels(k)
    rows = [interp_row_1d(levels, i + 0.5) for i in range(k)]
    return AxisOperator("normal", _rows_to_matrix(rows, 2 * k))


def build_restrict_axis_tangential(p: int) -> AxisOperator:
    """p x 3p tangential averaging: each coarse cell takes the mean of its three children."""
    mat = np.zeros((p, 3 * p))
    for j in range(p):
        mat[j, 3 * j : 3 * j + 3] = 1.0 / 3.0
    return AxisOperator("restrict_tangential", mat)


def build_restrict_axis_normal(k: int) -> AxisOperator:
    """k x 2k normal reduction onto the coarse halo layers.

    A layer whose three fine children all fall inside the source window takes
    their mean. Deeper layers have no children in the window (the coarse halo
    is three times deeper than the fine source), so they continue the profile
    linearly from the nearest pair of fine layers, which keeps degree-one data
    exact everywhere.
    """
    levels = _fine_normal_levels(k)
    rows = []
    for j in range(k):
        lo = k + 3 * j
        if lo + 2 < 2 * k:
            rows.append((np.array([lo, lo + 1, lo + 2]), np.full(3, 1.0 / 3.0)))
        else:
            rows.append(interp_row_1d(levels, (j + 0.5) * 3.0))
    return AxisOperator("restrict_normal", _rows_to_matrix(rows, 2 * k))


def tensor_contract(
    mat_x: np.ndarray,
    mat_y: np.ndarray,
    mat_z: np.ndarray,
    grid: np.ndarray,
    work: dict | None = None,
) -> np.ndarray:
    """Apply one matrix per axis to a (nz, ny, nx, u) grid; channels ride along.

    With ``work`` supplied, all intermediates live in that dict and no array
    is allocated after the first call.
    """
    nz, ny, nx, u = grid.shape
    ax, ay, az = mat_x.shape[0], mat_y.shape[0], mat_z.shape[0]

    def buf(name, shape):
        if work is None:
            return np.empty(shape)
        arr = work.get(name)
        if arr is None or arr.shape != shape:
            arr = np.empty(shape)
            work[name] = arr
        return arr

    t1 = buf("t1", (nz * ny, ax, u))
    np.matmul(mat_x, grid.reshape(nz * ny, nx, u), out=t1)
    t1c = buf("t1c", (nz, ax, ny, u))
    np.copyto(t1c, t1.reshape(nz, ny, ax, u).transpose(0, 2, 1, 3))
    t2 = buf("t2", (nz, ax, ay, u))
    np.matmul(mat_y, t1c, out=t2)
    t2c = buf("t2c", (ax, ay, nz, u))
    np.copyto(t2c, t2.transpose(1, 2, 0, 3))
    t3 = buf("t3", (ax, ay, az, u))
    np.matmul(mat_z, t2c, out=t3)
    out = buf("out", (az, ay, ax, u))
    np.copyto(out, t3.transpose(2, 1, 0, 3))
    return out


def _segment_tangential_slices(p: int, segment: int) -> tuple[slice, slice]:
    sy = (segment % 3) * p
    sz = (segment // 3) * p
    return slice(sy, sy + p), slice(sz, sz + p)


def _half_normal_slice(k: int, half: str | None) -> slice:
    if half is None:
        return slice(0, k)
    lo = geometry.inner_half_layers(k)
    if half == "inner":
        return slice(0, lo)
    if half == "outer":
        return slice(lo, k)
    raise ConfigurationError(f"half must be 'inner', 'outer' or None, got {half!r}")


def apply_tensor_interpolate(cfg: FaceConfig, coarse: HaloBuffer, work: dict | None = None) -> HaloBuffer:
    """Fill cfg.segment's fine halo block from the coarse source buffer."""
    ref_src = to_reference(cfg, coarse)
    if ref_src.region != geometry.ref_interp_source(cfg.p, cfg.k):
        raise ContractViolationError("buffer does not match the interpolation source region")
    if not np.isfinite(ref_src.values).all():
        raise ContractViolationError("source buffer contains non-finite values")
    pn = build_axis_normal(cfg.k).matrix
    pt = build_axis_tangential(cfg.p).matrix
    ys, zs = _segment_tangential_slices(cfg.p, cfg.segment)
    out = tensor_contract(pn, pt[ys], pt[zs], ref_src.grid(), work)
    target = geometry.ref_interp_target_segment(cfg.p, cfg.k, cfg.segment)
    return from_reference(cfg, HaloBuffer(target, coarse.u, out.reshape(-1)))


def apply_tensor_restrict(
    cfg: FaceConfig, fine: HaloBuffer, half: str | None = None, work: dict | None = None
) -> HaloBuffer:
    """Fill the coarse halo (or one normal-depth half of it) from the fine source."""
    ref_src = to_reference(cfg, fine)
    if ref_src.region != geometry.ref_restrict_source(cfg.p, cfg.k):
        raise ContractViolationError("buffer does not match the restriction source region")
    if not np.isfinite(ref_src.values).all():
        raise ContractViolationError("source buffer contains non-finite values")
    rn = build_restrict_axis_normal(cfg.k).matrix[_half_normal_slice(cfg.k, half)]
    rt = build_restrict_axis_tangential(cfg.p).matrix
    out = tensor_contract(rn, rt, rt, ref_src.grid(), work)
    target = geometry.ref_restrict_target(cfg.p, cfg.k, half)
    return from_reference(cfg, HaloBuffer(target, fine.u, out.reshape(-1)))


def _collapse(p: int, k: int, role: str) -> CsrOperator:
    if role == "interpolate":
        src = geometry.ref_interp_source(p, k)
        tgt = geometry.ref_interp_target_full(p, k)
        x_rows = [interp_row_1d(_coarse_normal_levels(k), i + 0.5) for i in range(k)]
        t_rows = [interp_row_1d(_coarse_tangential_levels(p), m + 0.5) for m in range(3 * p)]
    elif role == "restrict":
        src = geometry.ref_restrict_source(p, k)
        tgt = geometry.ref_restrict_target(p, k, None)
        ax_n = build_restrict_axis_normal(k).matrix
        x_rows = [(np.flatnonzero(ax_n[j]), ax_n[j, np.flatnonzero(ax_n[j])]) for j in range(k)]
        t_rows = [(np.arange(3 * j, 3 * j + 3), np.full(3, 1.0 / 3.0)) for j in range(p)]
    else:
        raise ConfigurationError(f"role must be 'interpolate' or 'restrict', got {role!r}")

    nx_t, ny_t, nz_t = tgt.extents
    entries = []
    for k2 in range(nz_t):
        zi, zw = t_rows[k2]
        for j in range(ny_t):
            yi, yw = t_rows[j]
            for i in range(nx_t):
                xi, xw = x_rows[i]
                row = tgt.linearize((i, j, k2))
                for a, wa in zip(xi, xw):
                    for b, wb in zip(yi, yw):
                        wab = wa * wb
                        for c, wc in zip(zi, zw):
                            entries.append((row, src.linearize((a, b, c)), wab * wc))
    key = OperatorKey(role, "matrix_linear", p, k)
    return from_triplets(
        tgt.cell_count,
        src.cell_count,
        entries,
        scheme_tag="matrix_linear",
        built_for=key,
        source_region=src,
        target_region=tgt,
    )


def collapse_to_matrix(cfg: FaceConfig, role: str) -> CsrOperator:
    """Single full-face CSR operator reproducing the tensor-product result."""
    return _collapse(cfg.p, cfg.k, role)
