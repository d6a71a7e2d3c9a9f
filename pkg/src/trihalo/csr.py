"""Compressed-sparse-row operators over AoS halo buffers.

The apply kernel keeps the unknowns channel as the innermost contiguous loop,
so one weight is reused across all u values of a cell. Operators are
immutable once built and carry the reference-face fingerprint they were
constructed for.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .geometry import HaloBuffer, RegionShape

DROP_TOLERANCE = 1e-14

SCHEME_TAGS = ("tensor_linear", "matrix_linear", "order2", "order3")
ROLES = ("interpolate", "restrict")


@dataclass(frozen=True)
class OperatorKey:
    """Reference-face fingerprint: which operator a CSR matrix realises."""

    role: str
    scheme: str
    p: int
    k: int
    segment: int | None = None  # interpolation row block; None = full face
    half: str | None = None     # restriction row block; None = full target


@dataclass(frozen=True, eq=False)
class CsrOperator:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray = field(repr=False)
    col_indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    scheme_tag: str
    built_for: OperatorKey | None = None
    source_region: RegionShape | None = None
    target_region: RegionShape | None = None
    max_condition: float = float("nan")
    condition_warnings: tuple[str, ...] = ()

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        for r in range(self.n_rows):
            lo, hi = self.row_offsets[r], self.row_offsets[r + 1]
            dense[r, self.col_indices[lo:hi]] = self.values[lo:hi]
        return dense

    def row_sums(self) -> np.ndarray:
        sums = np.zeros(self.n_rows)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        np.add.at(sums, rows, self.values)
        return sums

    def arrays_equal(self, other: "CsrOperator") -> bool:
        return (
            self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )


def from_triplets(
    n_rows: int,
    n_cols: int,
    entries,
    scheme_tag: str = "matrix_linear",
    built_for: OperatorKey | None = None,
    source_region: RegionShape | None = None,
    target_region: RegionShape | None = None,
    max_condition: float = float("nan"),
    condition_warnings: tuple[str, ...] = (),
) -> CsrOperator:
    """Canonical CSR from (row, col, value) triplets.

    Duplicates are summed, columns sorted within each row, and entries whose
    merged magnitude falls below DROP_TOLERANCE are dropped.
    """
    entries = list(entries)
    if entries:
        rows = np.fromiter((e[0] for e in entries), dtype=np.int64, count=len(entries))
        cols = np.fromiter((e[1] for e in entries), dtype=np.int64, count=len(entries))
        vals = np.fromiter((e[2] for e in entries), dtype=np.float64, count=len(entries))
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
        raise ContractViolationError(f"row index outside [0, {n_rows})")
    if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
        raise ContractViolationError(f"col index outside [0, {n_cols})")

    # value participates in the sort so duplicate (row, col) groups are summed
    # in a fixed order whatever the input order was
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        group = np.cumsum(first) - 1
        merged = np.zeros(int(group[-1]) + 1)
        np.add.at(merged, group, vals)
        rows, cols = rows[first], cols[first]
        keep = np.abs(merged) >= DROP_TOLERANCE
        rows, cols, merged = rows[keep], cols[keep], merged[keep]
    else:
        merged = vals

    offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    offsets = np.cumsum(offsets)
    return CsrOperator(
        n_rows=n_rows,
        n_cols=n_cols,
        row_offsets=offsets,
        col_indices=cols,
        values=merged,
        scheme_tag=scheme_tag,
        built_for=built_for,
        source_region=source_region,
        target_region=target_region,
        max_condition=max_condition,
        condition_warnings=condition_warnings,
    )


@numba.njit(cache=True, fastmath=True)
def _apply_kernel(row_offsets, col_indices, values, src, out, u):  # pragma: no cover
    acc = np.empty(u)
    for r in range(row_offsets.size - 1):
        for c in range(u):
            acc[c] = 0.0
        for t in range(row_offsets[r], row_offsets[r + 1]):
            w = values[t]
            sb = col_indices[t] * u
            for c in range(u):
                acc[c] += w * src[sb + c]
        base = r * u
        for c in range(u):
            out[base + c] = acc[c]


def apply(op: CsrOperator, src: HaloBuffer, out: np.ndarray | None = None) -> HaloBuffer:
    """out[r*u + c] = sum_j values[j] * src[col[j]*u + c]; channels are independent."""
    if src.region.cell_count != op.n_cols:
        raise ContractViolationError(
            f"operator expects {op.n_cols} source cells, buffer has {src.region.cell_count}"
        )
    if not np.isfinite(src.values).all():
        raise ContractViolationError("source buffer contains non-finite values")
    if out is None:
        out = np.empty(op.n_rows * src.u)
    _apply_kernel(op.row_offsets, op.col_indices, op.values, src.values, out, src.u)
    region = op.target_region
    if region is None or region.cell_count != op.n_rows:
        region = RegionShape((op.n_rows, 1, 1), 1.0, (0.0, 0.0, 0.0))
    return HaloBuffer(region, src.u, out)


def take_rows(
    op: CsrOperator,
    row_ids: np.ndarray,
    built_for: OperatorKey | None,
    target_region: RegionShape | None,
) -> CsrOperator:
    """Row-subset operator, rows ordered as given."""
    counts = (op.row_offsets[row_ids + 1] - op.row_offsets[row_ids]).astype(np.int64)
    offsets = np.zeros(row_ids.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    take = np.concatenate(
        [np.arange(op.row_offsets[r], op.row_offsets[r + 1]) for r in row_ids]
    ) if row_ids.size else np.zeros(0, dtype=np.int64)
    return CsrOperator(
        n_rows=int(row_ids.size),
        n_cols=op.n_cols,
        row_offsets=offsets,
        col_indices=op.col_indices[take],
        values=op.values[take],
        scheme_tag=op.scheme_tag,
        built_for=built_for,
        source_region=op.source_region,
        target_region=target_region,
        max_condition=op.max_condition,
        condition_warnings=op.condition_warnings,
    )


def _subregion_rows(full: RegionShape, sub: RegionShape) -> np.ndarray:
    """Linear ids in ``full`` of the cells of ``sub``, in ``sub``'s linear order."""
    rows = np.empty(sub.cell_count, dtype=np.int64)
    shift = [
        round((sub.origin[d] - full.origin[d]) / full.spacing) for d in range(3)
    ]
    r = 0
    for k2 in range(sub.extents[2]):
        for j in range(sub.extents[1]):
            for i in range(sub.extents[0]):
                rows[r] = full.linearize((i + shift[0], j + shift[1], k2 + shift[2]))
                r += 1
    return rows


def extract_segment(op: CsrOperator, segment: int) -> CsrOperator:
    """Rows of one fine patch's p x p x k target block, from a full-face operator."""
    from . import geometry

    if not 0 <= segment <= 8:
        raise ConfigurationError(f"segment must be in [0, 8], got {segment}")
    key = op.built_for
    if key is None or key.role != "interpolate" or key.segment is not None:
        raise ContractViolationError("extract_segment needs a full-face interpolation operator")
    full = geometry.ref_interp_target_full(key.p, key.k)
    sub = geometry.ref_interp_target_segment(key.p, key.k, segment)
    rows = _subregion_rows(full, sub)
    new_key = OperatorKey(key.role, key.scheme, key.p, key.k, segment=segment)
    return take_rows(op, rows, new_key, sub)


def extract_half(op: CsrOperator, half: str) -> CsrOperator:
    """Rows of the inner or outer normal-depth block of a full restriction target."""
    from . import geometry

    if half not in ("inner", "outer"):
        raise ConfigurationError(f"half must be 'inner' or 'outer', got {half!r}")
    key = op.built_for
    if key is None or key.role != "restrict" or key.half is not None:
        raise ContractViolationError("extract_half needs a full-target restriction operator")
    full = geometry.ref_restrict_target(key.p, key.k, None)
    sub = geometry.ref_restrict_target(key.p, key.k, half)
    rows = _subregion_rows(full, sub)
    new_key = OperatorKey(key.role, key.scheme, key.p, key.k, half=half)
    return take_rows(op, rows, new_key, sub)


# ---------------------------------------------------------------------------
# Textual dump: header "n_rows n_cols nnz scheme_tag p k", then "row col value"
# ---------------------------------------------------------------------------

def dump_operator(op: CsrOperator, stream) -> None:
    if op.built_for is None:
        raise ContractViolationError("operator has no fingerprint; cannot dump header")
    stream.write(
        f"{op.n_rows} {op.n_cols} {op.nnz} {op.scheme_tag} {op.built_for.p} {op.built_for.k}\n"
    )
    for r in range(op.n_rows):
        for t in range(op.row_offsets[r], op.row_offsets[r + 1]):
            stream.write(f"{r} {op.col_indices[t]} {op.values[t]:.17g}\n")


def dumps_operator(op: CsrOperator) -> str:
    buf = io.StringIO()
    dump_operator(op, buf)
    return buf.getvalue()


def load_operator(stream) -> tuple[CsrOperator, int, int]:
    """Parse a dump; returns (operator, p, k). The fingerprint role is not recorded."""
    header = stream.readline().split()
    if len(header) != 6:
        raise ContractViolationError("dump header must be 'n_rows n_cols nnz scheme_tag p k'")
    n_rows, n_cols, nnz = int(header[0]), int(header[1]), int(header[2])
    scheme_tag, p, k = header[3], int(header[4]), int(header[5])
    entries = []
    for line in stream:
        if not line.strip():
            continue
        r, c, v = line.split()
        entries.append((int(r), int(c), float(v)))
    if len(entries) != nnz:
        raise ContractViolationError(f"dump announced {nnz} entries, found {len(entries)}")
    return from_triplets(n_rows, n_cols, entries, scheme_tag=scheme_tag), p, k
