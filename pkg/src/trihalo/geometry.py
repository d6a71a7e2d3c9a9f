"""Face-local exchange geometry for 3:1 refined patch boundaries.

A coarse patch and nine fine patches meet at a face. Data travels through
face-attached halo regions: fine halo cells are interpolated from coarse
data, coarse halo cells are restricted from fine data. Everything here is
expressed in units of the fine cell width h; the coarse width is always 3h.

Reference configuration (all six world faces are mapped onto it):

              face plane x = 0
                    |
      coarse side   |   halo side
                    |
        x = -(j+1/2)*3h   x = +(j+1/2)*3h     coarse source layers,
            j = k-1..0    j = 0..k-1          2k total
                    |
                    | x = (i+1/2)*h, i = 0..k-1   fine interpolation target
                    | x = (j+1/2)*3h, j = 0..k-1  coarse restriction target

Tangentially (y, z) the face spans 3p fine cells = p coarse cells; fine
centre (m+1/2)*h coincides with coarse centre (j+1/2)*3h exactly when
m = 3j+1. The nine fine patches tile the face in a 3x3 tangential grid of
p x p blocks ("segments"), numbered row-major over (first tangential axis,
second tangential axis).

Cells are stored lexicographically with x fastest:

    linear = (k2 * ny + j) * nx + i        for cell (i, j, k2)

and all u unknowns of one cell are contiguous (AoS).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolationError

AXES = ("x", "y", "z")
SIDES = ("negative", "positive")
HALVES = ("inner", "outer")

DEFAULT_UNKNOWNS = 58


def validate_pk(p: int, k: int) -> None:
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if not 1 <= k <= p:
        raise ConfigurationError(f"k must satisfy 1 <= k <= p, got k={k}, p={p}")


@dataclass(frozen=True)
class FaceConfig:
    """One face exchange: where the coarse patch sits and which fine patch talks."""

    normal_axis: str = "x"
    coarse_side: str = "negative"
    segment: int = 4
    p: int = 4
    k: int = 3
    u: int = DEFAULT_UNKNOWNS

    def __post_init__(self):
        if self.normal_axis not in AXES:
            raise ConfigurationError(f"normal_axis must be one of {AXES}, got {self.normal_axis!r}")
        if self.coarse_side not in SIDES:
            raise ConfigurationError(f"coarse_side must be one of {SIDES}, got {self.coarse_side!r}")
        if not 0 <= self.segment <= 8:
            raise ConfigurationError(f"segment must be in [0, 8], got {self.segment}")
        validate_pk(self.p, self.k)
        if self.u < 1:
            raise ConfigurationError(f"u must be >= 1, got {self.u}")


@dataclass(frozen=True)
class RegionShape:
    """Axis-aligned box of cells, described in units of the fine spacing h.

    ``origin`` is the low corner of the box; cell (i, j, k2) has its centre at
    ``origin + (idx + 1/2) * spacing`` per axis.
    """

    extents: tuple[int, int, int]
    spacing: float
    origin: tuple[float, float, float]

    @property
    def cell_count(self) -> int:
        nx, ny, nz = self.extents
        return nx * ny * nz

    def linearize(self, idx: tuple[int, int, int]) -> int:
        i, j, k2 = idx
        nx, ny, nz = self.extents
        if not (0 <= i < nx and 0 <= j < ny and 0 <= k2 < nz):
            raise ContractViolationError(f"cell {idx} outside region extents {self.extents}")
        return (k2 * ny + j) * nx + i

    def delinearize(self, linear: int) -> tuple[int, int, int]:
        nx, ny, nz = self.extents
        if not 0 <= linear < self.cell_count:
            raise ContractViolationError(f"linear index {linear} outside region of {self.cell_count} cells")
        i = linear % nx
        j = (linear // nx) % ny
        k2 = linear // (nx * ny)
        return (i, j, k2)

    def centre_of(self, idx: tuple[int, int, int], h: float = 1.0) -> tuple[float, float, float]:
        return tuple(h * (self.origin[d] + (idx[d] + 0.5) * self.spacing) for d in range(3))

    def centres(self, h: float = 1.0) -> np.ndarray:
        """Physical cell centres, one row per cell in linear order."""
        nx, ny, nz = self.extents
        i, j, k2 = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        idx = np.stack([i, j, k2], axis=-1).astype(np.float64)
        coords = h * (np.asarray(self.origin) + (idx + 0.5) * self.spacing)
        # meshgrid 'ij' lays out (i, j, k2); linear order is x fastest.
        return coords.transpose(2, 1, 0, 3).reshape(-1, 3)


@dataclass(frozen=True)
class ReferenceFrame:
    """Axis permutation plus per-axis mirror about the face plane.

    ``permutation[d]`` is the reference axis that world axis ``d`` lands on;
    ``flips[d]`` mirrors world axis ``d`` (coordinate negation) first.
    """

    permutation: tuple[int, int, int]
    flips: tuple[bool, bool, bool]

    def inverse(self) -> "ReferenceFrame":
        inv_perm = [0, 0, 0]
        inv_flips = [False, False, False]
        for d in range(3):
            inv_perm[self.permutation[d]] = d
        for e in range(3):
            inv_flips[e] = self.flips[inv_perm[e]]
        return ReferenceFrame(tuple(inv_perm), tuple(inv_flips))

    def map_region(self, region: RegionShape) -> RegionShape:
        extents = [0, 0, 0]
        origin = [0.0, 0.0, 0.0]
        for d in range(3):
            e = self.permutation[d]
            extents[e] = region.extents[d]
            span = region.extents[d] * region.spacing
            if self.flips[d]:
                origin[e] = -(region.origin[d] + span)
            else:
                origin[e] = region.origin[d]
        return RegionShape(tuple(extents), region.spacing, tuple(origin))

    def map_cell(self, region: RegionShape, idx: tuple[int, int, int]) -> tuple[int, int, int]:
        out = [0, 0, 0]
        for d in range(3):
            e = self.permutation[d]
            out[e] = region.extents[d] - 1 - idx[d] if self.flips[d] else idx[d]
        return tuple(out)

    def map_grid(self, grid: np.ndarray) -> np.ndarray:
        """Permute a (nz, ny, nx, u) cell grid into the mapped layout."""
        for d in range(3):
            if self.flips[d]:
                grid = np.flip(grid, axis=2 - d)
        inv = [0, 0, 0]
        for d in range(3):
            inv[self.permutation[d]] = d
        grid = grid.transpose(2 - inv[2], 2 - inv[1], 2 - inv[0], 3)
        return np.ascontiguousarray(grid)


IDENTITY_FRAME = ReferenceFrame((0, 1, 2), (False, False, False))


def reference_frame(cfg: FaceConfig) -> ReferenceFrame:
    """Frame sending cfg's normal to x and the coarse patch to the negative side."""
    n = AXES.index(cfg.normal_axis)
    t1, t2 = sorted(set(range(3)) - {n})
    perm = [0, 0, 0]
    perm[n] = 0
    perm[t1] = 1
    perm[t2] = 2
    flips = [False, False, False]
    flips[n] = cfg.coarse_side == "positive"
    return ReferenceFrame(tuple(perm), tuple(flips))


# ---------------------------------------------------------------------------
# Reference regions. World regions are their preimages under the frame.
# ---------------------------------------------------------------------------

def inner_half_layers(k: int) -> int:
    """Layers of the restriction target nearest the face addressed by the inner half."""
    return math.ceil(k / 2)


def ref_interp_source(p: int, k: int) -> RegionShape:
    return RegionShape((2 * k, p, p), 3.0, (-3.0 * k, 0.0, 0.0))


def ref_interp_target_full(p: int, k: int) -> RegionShape:
    return RegionShape((k, 3 * p, 3 * p), 1.0, (0.0, 0.0, 0.0))


def ref_interp_target_segment(p: int, k: int, segment: int) -> RegionShape:
    sy = (segment % 3) * p
    sz = (segment // 3) * p
    return RegionShape((k, p, p), 1.0, (0.0, float(sy), float(sz)))


def ref_restrict_source(p: int, k: int) -> RegionShape:
    return RegionShape((2 * k, 3 * p, 3 * p), 1.0, (-float(k), 0.0, 0.0))


def ref_restrict_target(p: int, k: int, half: str | None = None) -> RegionShape:
    if half is None:
        return RegionShape((k, p, p), 3.0, (0.0, 0.0, 0.0))
    if half == "inner":
        return RegionShape((inner_half_layers(k), p, p), 3.0, (0.0, 0.0, 0.0))
    if half == "outer":
        lo = inner_half_layers(k)
        return RegionShape((k - lo, p, p), 3.0, (3.0 * lo, 0.0, 0.0))
    raise ConfigurationError(f"half must be 'inner', 'outer' or None, got {half!r}")


def _known_reference_regions(cfg: FaceConfig) -> list[RegionShape]:
    p, k = cfg.p, cfg.k
    return [
        ref_interp_source(p, k),
        ref_interp_target_full(p, k),
        ref_interp_target_segment(p, k, cfg.segment),
        ref_restrict_source(p, k),
        ref_restrict_target(p, k, None),
        ref_restrict_target(p, k, "inner"),
        ref_restrict_target(p, k, "outer"),
    ]


def interp_source_shape(cfg: FaceConfig) -> RegionShape:
    """Coarse source region for interpolation, in world axes: p x p x 2k cells."""
    return reference_frame(cfg).inverse().map_region(ref_interp_source(cfg.p, cfg.k))


def interp_target_shape(cfg: FaceConfig, full_face: bool = False) -> RegionShape:
    """Fine target region in world axes: cfg.segment's p x p x k block, or 3p x 3p x k."""
    if full_face:
        ref = ref_interp_target_full(cfg.p, cfg.k)
    else:
        ref = ref_interp_target_segment(cfg.p, cfg.k, cfg.segment)
    return reference_frame(cfg).inverse().map_region(ref)


def restrict_source_shape(cfg: FaceConfig) -> RegionShape:
    """Fine source region for restriction, in world axes: 3p x 3p x 2k cells."""
    return reference_frame(cfg).inverse().map_region(ref_restrict_source(cfg.p, cfg.k))


def restrict_target_shape(cfg: FaceConfig, half: str | None = None) -> RegionShape:
    """Coarse halo target in world axes; ``half`` selects the inner/outer normal layers."""
    return reference_frame(cfg).inverse().map_region(ref_restrict_target(cfg.p, cfg.k, half))


# ---------------------------------------------------------------------------
# Halo data
# ---------------------------------------------------------------------------

@dataclass
class HaloBuffer:
    """Cell values for one halo region: AoS, cells lexicographic, u unknowns each."""

    region: RegionShape
    u: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = self.region.cell_count * self.u
        if self.values.shape != (expected,):
            raise ContractViolationError(
                f"buffer needs {expected} values for {self.region.extents} cells x u={self.u}, "
                f"got shape {self.values.shape}"
            )

    @classmethod
    def zeros(cls, region: RegionShape, u: int) -> "HaloBuffer":
        return cls(region, u, np.zeros(region.cell_count * u))

    def grid(self) -> np.ndarray:
        """(nz, ny, nx, u) view of the values."""
        nx, ny, nz = self.region.extents
        return self.values.reshape(nz, ny, nx, self.u)

    def cell_matrix(self) -> np.ndarray:
        """(cells, u) view of the values."""
        return self.values.reshape(self.region.cell_count, self.u)

    def copy(self) -> "HaloBuffer":
        return HaloBuffer(self.region, self.u, self.values.copy())


def _permute(frame: ReferenceFrame, buf: HaloBuffer) -> HaloBuffer:
    mapped_region = frame.map_region(buf.region)
    mapped = frame.map_grid(buf.grid())
    return HaloBuffer(mapped_region, buf.u, mapped.reshape(-1))


def to_reference(cfg: FaceConfig, data: HaloBuffer) -> HaloBuffer:
    """Copy a world-layout buffer into the reference coordinate system."""
    frame = reference_frame(cfg)
    mapped_region = frame.map_region(data.region)
    if mapped_region not in _known_reference_regions(cfg):
        raise ContractViolationError(
            f"buffer region {data.region} is not a recognised halo region of {cfg}"
        )
    return _permute(frame, data)


def from_reference(cfg: FaceConfig, data: HaloBuffer) -> HaloBuffer:
    """Copy a reference-layout buffer back into world layout."""
    if data.region not in _known_reference_regions(cfg):
        raise ContractViolationError(
            f"buffer region {data.region} is not a recognised reference region of {cfg}"
        )
    return _permute(reference_frame(cfg).inverse(), data)


def gather_cell_indices(frame: ReferenceFrame, world_region: RegionShape) -> np.ndarray:
    """World linear cell id feeding each mapped linear cell, in mapped order.

    ``mapped_values[r] = world_values[indices[r]]`` reproduces ``map_grid``.
    """
    n = world_region.cell_count
    ids = np.arange(n, dtype=np.int64)
    nx, ny, nz = world_region.extents
    grid = ids.reshape(nz, ny, nx, 1)
    return frame.map_grid(grid).reshape(-1)
