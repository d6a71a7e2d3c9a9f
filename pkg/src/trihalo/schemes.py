"""Uniform application of any scheme to world-layout halo buffers.

Every exchange follows the same three steps: copy the world source into the
reference coordinate system, apply the stored reference operator (matrix or
per-axis), copy the result back into the world halo. ``HaloExchange``
precomputes the two permutations as flat index arrays and reuses all
intermediate storage, so repeated calls allocate nothing.
"""

from __future__ import annotations

import numpy as np

from . import csr, geometry, linear, taylor
from .csr import CsrOperator, OperatorKey
from .errors import ConfigurationError, ContractViolationError, StencilInfeasibleError
from .geometry import FaceConfig, HaloBuffer

SCHEMES = ("tensor_linear", "matrix_linear", "order2", "order3")
MATRIX_SCHEMES = ("matrix_linear", "order2", "order3")


def scheme_feasible(scheme: str, role: str, p: int, k: int) -> tuple[bool, str]:
    """Whether the scheme can build its stencils on this source region."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if role not in ("interpolate", "restrict"):
        raise ConfigurationError(f"role must be 'interpolate' or 'restrict', got {role!r}")
    geometry.validate_pk(p, k)
    if scheme in ("tensor_linear", "matrix_linear"):
        return True, ""
    order = taylor.scheme_order(scheme)
    block = taylor.STENCIL_BLOCK[order]
    extents = (2 * k, p, p) if role == "interpolate" else (2 * k, 3 * p, 3 * p)
    s = 1
    for extent in extents:
        levels = min(block, extent)
        if levels < order + 1:
            return False, (
                f"{scheme} {role} infeasible at p={p}, k={k}: an axis offers only "
                f"{extent} source cells; {taylor._axis_requirement_note(order)}"
            )
        s *= levels
    need = taylor.taylor_basis(order).n + taylor.STENCIL_MARGIN
    if s < need:
        return False, f"{scheme} {role} infeasible at p={p}, k={k}: stencil {s} < {need}"
    return True, ""


def require_feasible(scheme: str, role: str, p: int, k: int) -> None:
    ok, reason = scheme_feasible(scheme, role, p, k)
    if not ok:
        raise StencilInfeasibleError(reason)


def build_reference_operator(
    scheme: str,
    role: str,
    p: int,
    k: int,
    segment: int | None = None,
    half: str | None = None,
    cache: taylor.OperatorCache | None = None,
) -> CsrOperator:
    """Matrix form of a scheme on the reference face; tensor_linear has none."""
    if scheme == "tensor_linear":
        raise ConfigurationError("tensor_linear is applied per axis and has no matrix form")
    require_feasible(scheme, role, p, k)
    cache = cache or taylor.DEFAULT_CACHE
    return cache.get(OperatorKey(role, scheme, p, k, segment=segment, half=half))


def interpolate_halo(
    cfg: FaceConfig,
    scheme: str,
    coarse: HaloBuffer,
    cache: taylor.OperatorCache | None = None,
) -> HaloBuffer:
    """Fill cfg.segment's fine halo block from coarse source data, any scheme."""
    require_feasible(scheme, "interpolate", cfg.p, cfg.k)
    if scheme == "tensor_linear":
        return linear.apply_tensor_interpolate(cfg, coarse)
    op = taylor.operator_cache_get(cfg, scheme, "interpolate", cache=cache)
    ref_src = geometry.to_reference(cfg, coarse)
    return geometry.from_reference(cfg, csr.apply(op, ref_src))


def restrict_halo(
    cfg: FaceConfig,
    scheme: str,
    fine: HaloBuffer,
    half: str | None = None,
    cache: taylor.OperatorCache | None = None,
) -> HaloBuffer:
    """Fill the coarse halo (or one half of its depth) from fine source data."""
    require_feasible(scheme, "restrict", cfg.p, cfg.k)
    if scheme == "tensor_linear":
        return linear.apply_tensor_restrict(cfg, fine, half)
    op = taylor.operator_cache_get(cfg, scheme, "restrict", half=half, cache=cache)
    ref_src = geometry.to_reference(cfg, fine)
    return geometry.from_reference(cfg, csr.apply(op, ref_src))


def apply_scheme(
    cfg: FaceConfig,
    scheme: str,
    role: str,
    src: HaloBuffer,
    half: str | None = None,
    cache: taylor.OperatorCache | None = None,
) -> HaloBuffer:
    if role == "interpolate":
        return interpolate_halo(cfg, scheme, src, cache=cache)
    if role == "restrict":
        return restrict_halo(cfg, scheme, src, half=half, cache=cache)
    raise ConfigurationError(f"role must be 'interpolate' or 'restrict', got {role!r}")


class HaloExchange:
    """Reusable exchange: all buffers and index maps are allocated once."""

    def __init__(
        self,
        cfg: FaceConfig,
        scheme: str,
        role: str,
        half: str | None = None,
        cache: taylor.OperatorCache | None = None,
    ):
        require_feasible(scheme, role, cfg.p, cfg.k)
        self.cfg = cfg
        self.scheme = scheme
        self.role = role
        self.half = half
        p, k, u = cfg.p, cfg.k, cfg.u
        frame = geometry.reference_frame(cfg)

        if role == "interpolate":
            ref_src = geometry.ref_interp_source(p, k)
            ref_tgt = geometry.ref_interp_target_segment(p, k, cfg.segment)
        else:
            ref_src = geometry.ref_restrict_source(p, k)
            ref_tgt = geometry.ref_restrict_target(p, k, half)
        self.source_region = frame.inverse().map_region(ref_src)
        self.target_region = frame.inverse().map_region(ref_tgt)

        src_cells = geometry.gather_cell_indices(frame, self.source_region)
        tgt_cells = geometry.gather_cell_indices(frame.inverse(), ref_tgt)
        lanes = np.arange(u, dtype=np.int64)
        self._gather = (src_cells[:, None] * u + lanes).ravel()
        self._scatter = (tgt_cells[:, None] * u + lanes).ravel()
        self._ref_src = np.empty(ref_src.cell_count * u)
        self._ref_out = np.empty(ref_tgt.cell_count * u)

        if scheme == "tensor_linear":
            self._op = None
            self._work: dict = {}
            nx, ny, nz = ref_src.extents
            self._grid_shape = (nz, ny, nx, u)
            if role == "interpolate":
                pn = linear.build_axis_normal(k).matrix
                pt = linear.build_axis_tangential(p).matrix
                ys, zs = linear._segment_tangential_slices(p, cfg.segment)
                self._mats = (pn, pt[ys], pt[zs])
            else:
                rn = linear.build_restrict_axis_normal(k).matrix
                rn = rn[linear._half_normal_slice(k, half)]
                rt = linear.build_restrict_axis_tangential(p).matrix
                self._mats = (rn, rt, rt)
        else:
            self._op = build_reference_operator(
                scheme, role, p, k,
                segment=cfg.segment if role == "interpolate" else None,
                half=half if role == "restrict" else None,
                cache=cache,
            )

    def make_buffers(self, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
        """World-layout source and output arrays sized for this exchange."""
        n_src = self.source_region.cell_count * self.cfg.u
        n_out = self.target_region.cell_count * self.cfg.u
        src = rng.standard_normal(n_src) if rng is not None else np.zeros(n_src)
        return src, np.zeros(n_out)

    def run(self, src_values: np.ndarray, out_values: np.ndarray) -> None:
        if not np.isfinite(src_values).all():
            raise ContractViolationError("source buffer contains non-finite values")
        np.take(src_values, self._gather, out=self._ref_src)
        if self._op is not None:
            csr._apply_kernel(
                self._op.row_offsets,
                self._op.col_indices,
                self._op.values,
                self._ref_src,
                self._ref_out,
                self.cfg.u,
            )
            np.take(self._ref_out, self._scatter, out=out_values)
        else:
            grid = self._ref_src.reshape(self._grid_shape)
            out = linear.tensor_contract(*self._mats, grid, self._work)
            np.take(out.reshape(-1), self._scatter, out=out_values)
