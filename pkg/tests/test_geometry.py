import numpy as np
import pytest

from conftest import all_faces
from trihalo import geometry
from trihalo.errors import ConfigurationError, ContractViolationError
from trihalo.geometry import (
    FaceConfig,
    HaloBuffer,
    RegionShape,
    from_reference,
    interp_source_shape,
    interp_target_shape,
    reference_frame,
    restrict_source_shape,
    restrict_target_shape,
    to_reference,
)


def test_face_config_validation():
    FaceConfig("x", "negative", 0, 1, 1, 1)
    with pytest.raises(ConfigurationError):
        FaceConfig("w", "negative", 0, 4, 3)
    with pytest.raises(ConfigurationError):
        FaceConfig("x", "left", 0, 4, 3)
    with pytest.raises(ConfigurationError):
        FaceConfig("x", "negative", 9, 4, 3)
    with pytest.raises(ConfigurationError):
        FaceConfig("x", "negative", 0, 4, 5)  # k > p
    with pytest.raises(ConfigurationError):
        FaceConfig("x", "negative", 0, 0, 0)
    with pytest.raises(ConfigurationError):
        FaceConfig("x", "negative", 0, 4, 3, 0)


def test_interp_source_shape_dimensions():
    # p x p tangentially, 2k across the face, coarse spacing 3h
    cfg = FaceConfig("x", "negative", 0, 4, 3)
    region = interp_source_shape(cfg)
    assert region.extents == (6, 4, 4)
    assert region.spacing == 3.0
    assert region.origin == (-9.0, 0.0, 0.0)

    assert interp_source_shape(FaceConfig("x", "negative", 0, 1, 1)).extents == (2, 1, 1)
    assert interp_source_shape(FaceConfig("x", "negative", 0, 6, 1)).extents == (2, 6, 6)


def test_interp_source_straddles_face():
    region = interp_source_shape(FaceConfig("x", "negative", 0, 4, 3))
    xs = sorted({region.centre_of(region.delinearize(n))[0] for n in range(region.cell_count)})
    assert xs == [-7.5, -4.5, -1.5, 1.5, 4.5, 7.5]


def test_interp_target_shapes_and_segment_offsets():
    cfg0 = FaceConfig("x", "negative", 0, 4, 3)
    t0 = interp_target_shape(cfg0)
    assert t0.extents == (3, 4, 4)
    assert t0.origin == (0.0, 0.0, 0.0)

    t8 = interp_target_shape(FaceConfig("x", "negative", 8, 4, 3))
    assert t8.origin == (0.0, 8.0, 8.0)

    full = interp_target_shape(FaceConfig("x", "negative", 0, 1, 1), full_face=True)
    assert full.extents == (1, 3, 3)


def test_segments_tile_full_face_exactly_once():
    for p in (1, 2, 4, 6):
        k = min(p, 3)
        full = geometry.ref_interp_target_full(p, k)
        seen = np.zeros(full.cell_count, dtype=int)
        for seg in range(9):
            sub = geometry.ref_interp_target_segment(p, k, seg)
            for n in range(sub.cell_count):
                i, j, k2 = sub.delinearize(n)
                shift = [round(sub.origin[d] - full.origin[d]) for d in range(3)]
                seen[full.linearize((i + shift[0], j + shift[1], k2 + shift[2]))] += 1
        assert (seen == 1).all()


def test_restrict_shapes():
    cfg = FaceConfig("x", "negative", 0, 4, 3)
    src = restrict_source_shape(cfg)
    assert src.extents == (6, 12, 12)
    assert src.spacing == 1.0
    assert src.origin == (-3.0, 0.0, 0.0)

    tgt = restrict_target_shape(cfg)
    assert tgt.extents == (3, 4, 4)
    assert tgt.spacing == 3.0

    # odd k: the inner half holds ceil(k/2) layers nearest the face
    inner = restrict_target_shape(cfg, "inner")
    outer = restrict_target_shape(cfg, "outer")
    assert inner.extents == (2, 4, 4)
    assert inner.origin == (0.0, 0.0, 0.0)
    assert outer.extents == (1, 4, 4)
    assert outer.origin == (6.0, 0.0, 0.0)

    mini = FaceConfig("x", "negative", 0, 1, 1)
    assert restrict_source_shape(mini).extents == (2, 3, 3)
    assert restrict_target_shape(mini).extents == (1, 1, 1)
    assert restrict_target_shape(mini, "outer").extents == (0, 1, 1)


def test_restrict_halves_union_is_full_target():
    for k in (1, 2, 3):
        cfg = FaceConfig("x", "negative", 0, 4, k)
        inner = restrict_target_shape(cfg, "inner")
        outer = restrict_target_shape(cfg, "outer")
        assert inner.extents[0] + outer.extents[0] == k
        assert outer.origin[0] == inner.origin[0] + inner.extents[0] * 3.0


def test_linearization_round_trip():
    for p in (1, 4, 9):
        for k in (1, 3):
            if k > p:
                continue
            for region in (
                geometry.ref_interp_source(p, k),
                geometry.ref_interp_target_full(p, k),
                geometry.ref_restrict_source(p, k),
            ):
                for n in range(region.cell_count):
                    assert region.linearize(region.delinearize(n)) == n


def test_centres_order_matches_linearization():
    region = RegionShape((3, 2, 2), 2.0, (-1.0, 0.0, 5.0))
    centres = region.centres(h=0.5)
    for n in range(region.cell_count):
        assert np.allclose(centres[n], region.centre_of(region.delinearize(n), h=0.5))


def test_to_reference_identity_on_reference_config():
    cfg = FaceConfig("x", "negative", 4, 3, 2, 2)
    region = interp_source_shape(cfg)
    rng = np.random.default_rng(0)
    buf = HaloBuffer(region, 2, rng.standard_normal(region.cell_count * 2))
    out = to_reference(cfg, buf)
    assert out.region == region
    assert np.array_equal(out.values, buf.values)
    assert out.values is not buf.values  # explicit copy


def test_to_reference_one_hot_against_index_arithmetic():
    # normal = y, coarse side positive: world (i, j, k2) of the coarse source
    # lands on reference (2k-1-j, i, k2). Derived by hand from the axis map
    # x->y, y->x(flipped), z->z.
    p, k, u = 3, 2, 1
    cfg = FaceConfig("y", "positive", 0, p, k, u)
    region = interp_source_shape(cfg)
    assert region.extents == (p, 2 * k, p)
    ref_region = geometry.ref_interp_source(p, k)
    for world_idx in [(0, 0, 0), (2, 3, 1), (1, 2, 2), (0, 1, 2)]:
        buf = HaloBuffer.zeros(region, u)
        buf.values[region.linearize(world_idx)] = 1.0
        out = to_reference(cfg, buf)
        i, j, k2 = world_idx
        expected = ref_region.linearize((2 * k - 1 - j, i, k2))
        assert out.values[expected] == 1.0
        assert out.values.sum() == 1.0


def test_reference_round_trip_all_faces_segments():
    rng = np.random.default_rng(1)
    p, k, u = 3, 2, 2
    for normal, side in all_faces():
        for segment in range(9):
            cfg = FaceConfig(normal, side, segment, p, k, u)
            for region in (
                interp_source_shape(cfg),
                interp_target_shape(cfg),
                restrict_source_shape(cfg),
                restrict_target_shape(cfg),
                restrict_target_shape(cfg, "inner"),
            ):
                buf = HaloBuffer(region, u, rng.standard_normal(region.cell_count * u))
                ref = to_reference(cfg, buf)
                back = from_reference(cfg, ref)
                assert back.region == region
                assert np.array_equal(back.values, buf.values)


def test_frame_maps_preserve_values_as_permutation():
    cfg = FaceConfig("z", "positive", 7, 4, 3, 1)
    region = restrict_source_shape(cfg)
    frame = reference_frame(cfg)
    ids = geometry.gather_cell_indices(frame, region)
    assert sorted(ids.tolist()) == list(range(region.cell_count))


def test_world_regions_place_targets_opposite_coarse_side():
    # coarse on +y: the fine halo target must sit just below the face plane
    cfg = FaceConfig("y", "positive", 0, 4, 3)
    tgt = interp_target_shape(cfg)
    ys = [tgt.centre_of(tgt.delinearize(n))[1] for n in range(tgt.cell_count)]
    assert max(ys) < 0.0
    assert min(ys) >= -3.0


def test_to_reference_rejects_unknown_region():
    cfg = FaceConfig("x", "negative", 0, 4, 3, 1)
    bogus = RegionShape((5, 5, 5), 1.0, (0.0, 0.0, 0.0))
    with pytest.raises(ContractViolationError):
        to_reference(cfg, HaloBuffer.zeros(bogus, 1))


def test_buffer_length_validation():
    region = RegionShape((2, 2, 2), 1.0, (0.0, 0.0, 0.0))
    with pytest.raises(ContractViolationError):
        HaloBuffer(region, 2, np.zeros(7))
