import io

import numpy as np
import pytest

from trihalo import csr, geometry, linear
from trihalo.csr import (
    OperatorKey,
    apply,
    dumps_operator,
    extract_half,
    extract_segment,
    from_triplets,
    load_operator,
)
from trihalo.errors import ContractViolationError
from trihalo.geometry import FaceConfig, HaloBuffer, RegionShape


def line_region(n):
    return RegionShape((n, 1, 1), 1.0, (0.0, 0.0, 0.0))


def test_from_triplets_identity():
    op = from_triplets(1, 1, [(0, 0, 1.0)])
    assert op.nnz == 1
    assert op.to_dense().tolist() == [[1.0]]


def test_from_triplets_merges_duplicates():
    op = from_triplets(1, 2, [(0, 1, 0.25), (0, 1, 0.75)])
    assert op.nnz == 1
    assert op.col_indices.tolist() == [1]
    assert op.values.tolist() == [1.0]


def test_from_triplets_canonical_regardless_of_input_order():
    rng = np.random.default_rng(0)
    entries = [(int(r), int(c), float(v)) for r, c, v in
               zip(rng.integers(0, 6, 40), rng.integers(0, 8, 40), rng.standard_normal(40))]
    shuffled = list(entries)
    rng.shuffle(shuffled)
    a = from_triplets(6, 8, entries)
    b = from_triplets(6, 8, shuffled)
    assert a.arrays_equal(b)
    # strictly increasing columns within each row
    for r in range(6):
        cols = a.col_indices[a.row_offsets[r]:a.row_offsets[r + 1]]
        assert (np.diff(cols) > 0).all()


def test_from_triplets_drops_tiny_merged_entries():
    op = from_triplets(1, 2, [(0, 0, 1.0), (0, 1, 1e-20), (0, 0, -1.0 + 1e-30)])
    assert op.nnz == 0


def test_from_triplets_rejects_out_of_range():
    with pytest.raises(ContractViolationError):
        from_triplets(2, 2, [(2, 0, 1.0)])
    with pytest.raises(ContractViolationError):
        from_triplets(2, 2, [(0, -1, 1.0)])


def test_apply_identity():
    n = 5
    op = from_triplets(n, n, [(i, i, 1.0) for i in range(n)], target_region=line_region(n))
    src = HaloBuffer(line_region(n), 3, np.arange(15, dtype=float))
    out = apply(op, src)
    assert np.array_equal(out.values, src.values)


def test_apply_hand_example_two_channels():
    op = from_triplets(1, 2, [(0, 0, 0.5), (0, 1, 0.5)], target_region=line_region(1))
    src = HaloBuffer(line_region(2), 2, np.array([1.0, 3.0, 3.0, 5.0]))
    out = apply(op, src)
    assert out.values.tolist() == [2.0, 4.0]


def test_apply_matches_dense_oracle_u58():
    rng = np.random.default_rng(1)
    n_rows, n_cols, u = 40, 60, 58
    entries = [(int(r), int(c), float(v)) for r, c, v in
               zip(rng.integers(0, n_rows, 400), rng.integers(0, n_cols, 400),
                   rng.standard_normal(400))]
    op = from_triplets(n_rows, n_cols, entries, target_region=line_region(n_rows))
    src = HaloBuffer(line_region(n_cols), u, rng.standard_normal(n_cols * u))
    got = apply(op, src).values.reshape(n_rows, u)
    want = op.to_dense() @ src.values.reshape(n_cols, u)
    assert np.abs(got - want).max() < 1e-13


def test_apply_is_linear():
    rng = np.random.default_rng(2)
    op = from_triplets(6, 6, [(int(r), int(c), float(v)) for r, c, v in
                              zip(rng.integers(0, 6, 30), rng.integers(0, 6, 30),
                                  rng.standard_normal(30))],
                       target_region=line_region(6))
    a = HaloBuffer(line_region(6), 4, rng.standard_normal(24))
    b = HaloBuffer(line_region(6), 4, rng.standard_normal(24))
    alpha, beta = 1.7, -0.3
    combo = HaloBuffer(line_region(6), 4, alpha * a.values + beta * b.values)
    lhs = apply(op, combo).values
    rhs = alpha * apply(op, a).values + beta * apply(op, b).values
    assert np.abs(lhs - rhs).max() < 1e-12


def test_apply_validates_input():
    op = from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 1.0)], target_region=line_region(2))
    with pytest.raises(ContractViolationError):
        apply(op, HaloBuffer(line_region(3), 1, np.zeros(3)))
    bad = HaloBuffer(line_region(2), 1, np.array([1.0, np.nan]))
    with pytest.raises(ContractViolationError):
        apply(op, bad)


def test_constant_preservation_of_built_operators():
    # every built operator must reproduce a constant-one buffer exactly
    for p in (1, 2, 3, 4, 6):
        for k in (1, 3):
            if k > p:
                continue
            for role in ("interpolate", "restrict"):
                op = linear._collapse(p, k, role)
                src = HaloBuffer(op.source_region, 2, np.ones(op.n_cols * 2))
                out = apply(op, src)
                assert np.abs(out.values - 1.0).max() < 1e-12


def test_extract_segment_partitions_rows():
    op = linear._collapse(4, 3, "interpolate")
    full_rows = set(range(op.n_rows))
    seen = []
    for seg in range(9):
        sub = extract_segment(op, seg)
        assert sub.n_rows == 4 * 4 * 3
        full = geometry.ref_interp_target_full(4, 3)
        region = geometry.ref_interp_target_segment(4, 3, seg)
        rows = csr._subregion_rows(full, region)
        seen.extend(rows.tolist())
    assert sorted(seen) == sorted(full_rows)


def test_extract_segment_apply_matches_gather():
    rng = np.random.default_rng(3)
    op = linear._collapse(2, 2, "interpolate")
    u = 3
    src = HaloBuffer(op.source_region, u, rng.standard_normal(op.n_cols * u))
    full_out = apply(op, src).values.reshape(op.n_rows, u)
    for seg in (0, 4, 8):
        sub = extract_segment(op, seg)
        got = apply(sub, src).values.reshape(sub.n_rows, u)
        rows = csr._subregion_rows(
            geometry.ref_interp_target_full(2, 2),
            geometry.ref_interp_target_segment(2, 2, seg),
        )
        assert np.array_equal(got, full_out[rows])


def test_extract_half_apply_matches_gather():
    rng = np.random.default_rng(4)
    op = linear._collapse(3, 3, "restrict")
    src = HaloBuffer(op.source_region, 2, rng.standard_normal(op.n_cols * 2))
    full_out = apply(op, src).values.reshape(op.n_rows, 2)
    got_rows = []
    for half in ("inner", "outer"):
        sub = extract_half(op, half)
        got = apply(sub, src).values.reshape(sub.n_rows, 2)
        rows = csr._subregion_rows(
            geometry.ref_restrict_target(3, 3, None),
            geometry.ref_restrict_target(3, 3, half),
        )
        assert np.array_equal(got, full_out[rows])
        got_rows.extend(rows.tolist())
    assert sorted(got_rows) == list(range(op.n_rows))


def test_segment_of_minimal_face_is_one_third_two_thirds():
    op = linear._collapse(1, 1, "interpolate")
    centre = extract_segment(op, 4)
    assert centre.n_rows == 1
    assert centre.col_indices.tolist() == [0, 1]
    assert np.allclose(centre.values, [1.0 / 3.0, 2.0 / 3.0], atol=1e-15)


# the face-adjacent fine layer interpolates the straddling coarse pair at
# one third of the gap: weights (1 - 2/3, 2/3)
GOLDEN_P1K1 = "9 2 18 matrix_linear 1 1\n" + "".join(
    f"{r} 0 0.33333333333333337\n{r} 1 0.66666666666666663\n" for r in range(9)
)


def test_dump_golden_minimal_interpolation():
    op = linear._collapse(1, 1, "interpolate")
    assert dumps_operator(op) == GOLDEN_P1K1


def test_dump_round_trip():
    op = linear._collapse(2, 1, "restrict")
    text = dumps_operator(op)
    header = text.splitlines()[0].split()
    assert header == [str(op.n_rows), str(op.n_cols), str(op.nnz), "matrix_linear", "2", "1"]
    loaded, p, k = load_operator(io.StringIO(text))
    assert (p, k) == (2, 1)
    assert loaded.arrays_equal(op)


def test_dump_requires_fingerprint():
    op = from_triplets(1, 1, [(0, 0, 1.0)])
    with pytest.raises(ContractViolationError):
        dumps_operator(op)


def test_extract_requires_matching_fingerprint():
    op = linear._collapse(2, 2, "interpolate")
    with pytest.raises(ContractViolationError):
        extract_half(op, "inner")
    seg = extract_segment(op, 0)
    with pytest.raises(ContractViolationError):
        extract_segment(seg, 1)
