"""Second- and third-order operator construction.

Each target cell is expanded about its nearest source cell: a polynomial
least-squares fit over a compact stencil recovers the scaled derivatives at
that source cell, and evaluating the expansion at the target centre turns the
fit weights into one sparse operator row. Stencils are cubes translated
inward wherever the source box ends, so cells near face boundaries reuse the
same machinery with a shifted window; no data outside the face-local source
box is ever addressed.

Working in source-spacing units keeps the fit matrices identically
conditioned at every mesh width.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import geometry, linear
from .csr import CsrOperator, OperatorKey, extract_half, extract_segment, from_triplets
from .errors import ConfigurationError, StencilInfeasibleError
from .linalg import solve_pseudoinverse_rows

STENCIL_BLOCK = {2: 3, 3: 5}
STENCIL_MARGIN = 3
CONDITION_WARN_THRESHOLD = 1e12


@dataclass(frozen=True)
class TaylorBasis:
    """Factorial-normalised monomials x^a y^b z^c / (a! b! c!), graded lexicographic."""

    order: int
    exponents: tuple[tuple[int, int, int], ...]

    @property
    def n(self) -> int:
        return len(self.exponents)

    def design(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        cols = []
        for a, b, c in self.exponents:
            norm = math.factorial(a) * math.factorial(b) * math.factorial(c)
            cols.append(pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c / norm)
        return np.stack(cols, axis=1)

    def evaluate_point(self, delta) -> np.ndarray:
        return self.design(np.asarray(delta, dtype=np.float64)[None, :])[0]


def taylor_basis(order: int) -> TaylorBasis:
    if order not in (2, 3):
        raise ConfigurationError(f"order must be 2 or 3, got {order}")
    exponents = []
    for deg in range(order + 1):
        for a in range(deg, -1, -1):
            for b in range(deg - a, -1, -1):
                exponents.append((a, b, deg - a - b))
    return TaylorBasis(order, tuple(exponents))


@dataclass(frozen=True)
class StencilSpec:
    centre: tuple[int, int, int]
    offsets: np.ndarray  # (s, 3) integer cell offsets relative to centre

    @property
    def s(self) -> int:
        return self.offsets.shape[0]


@dataclass(frozen=True)
class DerivativeFit:
    stencil: StencilSpec
    weights: np.ndarray  # (n, s): each scaled derivative as weights on stencil values
    condition_estimate: float


def _axis_requirement_note(order: int) -> str:
    k_min = math.ceil((order + 1) / 2)
    return (
        f"order {order} needs at least {order + 1} source levels per axis "
        f"(interpolation: p >= {order + 1} tangentially; either role: k >= {k_min})"
    )


def nearest_source_cell(target: tuple[int, int, int], role: str, p: int, k: int) -> tuple[int, int, int]:
    """Source cell whose centre is closest to the target cell's centre.

    Ties break toward the smaller index, axis by axis, which is the
    lexicographically smallest minimiser.
    """
    if role == "interpolate":
        tgt = geometry.ref_interp_target_full(p, k)
        src = geometry.ref_interp_source(p, k)
    elif role == "restrict":
        tgt = geometry.ref_restrict_target(p, k, None)
        src = geometry.ref_restrict_source(p, k)
    else:
        raise ConfigurationError(f"role must be 'interpolate' or 'restrict', got {role!r}")
    centre = tgt.centre_of(target)
    out = []
    for d in range(3):
        levels = src.origin[d] + (np.arange(src.extents[d]) + 0.5) * src.spacing
        out.append(int(np.argmin(np.abs(levels - centre[d]))))
    return tuple(out)


def select_stencil(centre: tuple[int, int, int], region: geometry.RegionShape, order: int) -> StencilSpec:
    """Axis-aligned block around ``centre``, translated inward to fit the region."""
    basis = taylor_basis(order)
    block = STENCIL_BLOCK[order]
    axis_offsets = []
    for d in range(3):
        extent = region.extents[d]
        if not 0 <= centre[d] < extent:
            raise ConfigurationError(f"stencil centre {centre} outside region extents {region.extents}")
        levels = min(block, extent)
        if levels < order + 1:
            raise StencilInfeasibleError(
                f"axis {d} of source region {region.extents} offers {extent} cells; "
                + _axis_requirement_note(order)
            )
        start = max(0, min(centre[d] - block // 2, extent - levels))
        axis_offsets.append(np.arange(start, start + levels) - centre[d])
    s = axis_offsets[0].size * axis_offsets[1].size * axis_offsets[2].size
    if s < basis.n + STENCIL_MARGIN:
        raise StencilInfeasibleError(
            f"stencil of {s} cells cannot support {basis.n} derivatives "
            f"plus margin {STENCIL_MARGIN}; " + _axis_requirement_note(order)
        )
    ox, oy, oz = np.meshgrid(axis_offsets[0], axis_offsets[1], axis_offsets[2], indexing="ij")
    offsets = np.stack([ox, oy, oz], axis=-1).transpose(2, 1, 0, 3).reshape(-1, 3)
    offsets.setflags(write=False)
    return StencilSpec(tuple(centre), offsets)


def build_derivative_fit(
    stencil: StencilSpec, basis: TaylorBasis, spacing_units: float = 1.0
) -> DerivativeFit:
    """Least-squares weights recovering the scaled derivatives at the stencil centre."""
    a = basis.design(stencil.offsets * spacing_units)
    weights, cond = solve_pseudoinverse_rows(a)
    return DerivativeFit(stencil, weights, cond)


def scheme_order(scheme: str) -> int:
    if scheme == "order2":
        return 2
    if scheme == "order3":
        return 3
    raise ConfigurationError(f"not a polynomial scheme: {scheme!r}")


def condition_warning(condition_estimate: float) -> str | None:
    """Warning text when a fit's triangular conditioning has exploded."""
    if condition_estimate > CONDITION_WARN_THRESHOLD:
        return (
            f"derivative fit condition_estimate {condition_estimate:.3e} exceeds "
            f"{CONDITION_WARN_THRESHOLD:g}; operator accuracy may floor well above "
            "machine precision"
        )
    return None


def _build_taylor_operator(p: int, k: int, order: int, role: str) -> CsrOperator:
    if role == "interpolate":
        src = geometry.ref_interp_source(p, k)
        tgt = geometry.ref_interp_target_full(p, k)
    else:
        src = geometry.ref_restrict_source(p, k)
        tgt = geometry.ref_restrict_target(p, k, None)
    basis = taylor_basis(order)
    src_origin = np.asarray(src.origin)
    tgt_origin = np.asarray(tgt.origin)

    fits: dict[tuple[int, int, int], tuple[DerivativeFit, np.ndarray]] = {}
    entries = []
    max_cond = 0.0
    warnings: list[str] = []
    for r in range(tgt.cell_count):
        t_idx = tgt.delinearize(r)
        c_idx = nearest_source_cell(t_idx, role, p, k)
        cached = fits.get(c_idx)
        if cached is None:
            fit = build_derivative_fit(select_stencil(c_idx, src, order), basis)
            warn = condition_warning(fit.condition_estimate)
            if warn is not None:
                warnings.append(f"source cell {c_idx}: {warn}")
            cells = fit.stencil.offsets + np.asarray(c_idx)
            cols = np.array([src.linearize(tuple(cell)) for cell in cells], dtype=np.int64)
            cached = (fit, cols)
            fits[c_idx] = cached
        fit, cols = cached
        t_centre = tgt_origin + (np.asarray(t_idx) + 0.5) * tgt.spacing
        c_centre = src_origin + (np.asarray(c_idx) + 0.5) * src.spacing
        delta = (t_centre - c_centre) / src.spacing
        row_w = basis.evaluate_point(delta) @ fit.weights
        entries.extend(zip([r] * cols.size, cols.tolist(), row_w.tolist()))
        max_cond = max(max_cond, fit.condition_estimate)

    scheme = f"order{order}"
    key = OperatorKey(role, scheme, p, k)
    return from_triplets(
        tgt.cell_count,
        src.cell_count,
        entries,
        scheme_tag=scheme,
        built_for=key,
        source_region=src,
        target_region=tgt,
        max_condition=max_cond,
        condition_warnings=tuple(warnings),
    )


def build_interpolation(cfg: geometry.FaceConfig, order: int) -> CsrOperator:
    """Full-face higher-order interpolation operator on the reference configuration."""
    return _build_taylor_operator(cfg.p, cfg.k, order, "interpolate")


def build_restriction(cfg: geometry.FaceConfig, order: int, half: str | None = None) -> CsrOperator:
    """Higher-order restriction operator; ``half`` selects the inner/outer target rows."""
    op = _build_taylor_operator(cfg.p, cfg.k, order, "restrict")
    if half is None:
        return op
    return extract_half(op, half)


def taylor_target_offset(target: tuple[int, int, int], role: str, p: int, k: int) -> np.ndarray:
    """Offset (in source-spacing units) between a target centre and its fit centre."""
    if role == "interpolate":
        src, tgt = geometry.ref_interp_source(p, k), geometry.ref_interp_target_full(p, k)
    else:
        src, tgt = geometry.ref_restrict_source(p, k), geometry.ref_restrict_target(p, k, None)
    c = nearest_source_cell(target, role, p, k)
    t_centre = np.asarray(tgt.centre_of(target))
    c_centre = np.asarray(src.centre_of(c))
    return (t_centre - c_centre) / src.spacing


# ---------------------------------------------------------------------------
# Operator cache: one build per reference fingerprint, segment/half extraction
# reuses the stored full operator.
# ---------------------------------------------------------------------------

class OperatorCache:
    def __init__(self):
        self._store: dict[OperatorKey, CsrOperator] = {}
        self._lock = threading.Lock()

    def build_uncached(self, key: OperatorKey) -> CsrOperator:
        if key.scheme == "matrix_linear":
            full = linear._collapse(key.p, key.k, key.role)
        elif key.scheme in ("order2", "order3"):
            full = _build_taylor_operator(key.p, key.k, scheme_order(key.scheme), key.role)
        else:
            raise ConfigurationError(f"scheme {key.scheme!r} has no matrix form")
        if key.segment is not None:
            return extract_segment(full, key.segment)
        if key.half is not None:
            return extract_half(full, key.half)
        return full

    def get(self, key: OperatorKey) -> CsrOperator:
        op = self._store.get(key)
        if op is not None:
            return op
        if key.segment is not None or key.half is not None:
            full_key = OperatorKey(key.role, key.scheme, key.p, key.k)
            full = self.get(full_key)
            op = extract_segment(full, key.segment) if key.segment is not None else extract_half(full, key.half)
        else:
            op = self.build_uncached(key)
        with self._lock:
            return self._store.setdefault(key, op)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()


DEFAULT_CACHE = OperatorCache()


def operator_cache_get(
    cfg: geometry.FaceConfig,
    scheme: str,
    role: str = "interpolate",
    half: str | None = None,
    cache: OperatorCache | None = None,
) -> CsrOperator:
    """Memoised reference operator for cfg's (p, k) and the requested row block.

    Interpolation returns cfg.segment's rows; restriction returns ``half``'s
    rows (or the full target when ``half`` is None).
    """
    cache = cache or DEFAULT_CACHE
    if role == "interpolate":
        key = OperatorKey(role, scheme, cfg.p, cfg.k, segment=cfg.segment)
    else:
        key = OperatorKey(role, scheme, cfg.p, cfg.k, half=half)
    return cache.get(key)
