import numpy as np
import pytest

from conftest import all_faces, source_region
from trihalo import geometry, schemes, taylor
from trihalo.errors import ConfigurationError, ContractViolationError, StencilInfeasibleError
from trihalo.geometry import FaceConfig, HaloBuffer
from trihalo.schemes import HaloExchange, scheme_feasible


@pytest.mark.parametrize(
    "scheme,role,p,k,expect",
    [
        ("tensor_linear", "interpolate", 1, 1, True),
        ("matrix_linear", "restrict", 1, 1, True),
        ("order2", "interpolate", 3, 1, False),  # two normal levels only
        ("order2", "interpolate", 3, 2, True),
        ("order2", "interpolate", 2, 2, False),  # two tangential levels only
        ("order2", "restrict", 1, 1, False),
        ("order2", "restrict", 3, 2, True),
        ("order3", "interpolate", 3, 3, False),  # three tangential levels
        ("order3", "interpolate", 4, 2, True),
        ("order3", "interpolate", 4, 1, False),
        ("order3", "restrict", 2, 2, True),
        ("order3", "restrict", 3, 3, True),
    ],
)
def test_feasibility_table(scheme, role, p, k, expect):
    ok, reason = scheme_feasible(scheme, role, p, k)
    assert ok == expect
    if not ok:
        assert "infeasible" in reason


def test_require_feasible_names_constraint():
    with pytest.raises(StencilInfeasibleError) as err:
        schemes.require_feasible("order2", "interpolate", 4, 1)
    assert "k >= 2" in str(err.value)


def test_unknown_scheme_rejected():
    with pytest.raises(ConfigurationError):
        scheme_feasible("order4", "interpolate", 4, 3)
    with pytest.raises(ConfigurationError):
        schemes.apply_scheme(FaceConfig(), "order4", "interpolate",
                             HaloBuffer.zeros(geometry.interp_source_shape(FaceConfig()), 58))


def test_build_reference_operator_rejects_tensor():
    with pytest.raises(ConfigurationError):
        schemes.build_reference_operator("tensor_linear", "interpolate", 4, 3)


def test_pipeline_rejects_wrong_region():
    cfg = FaceConfig("x", "negative", 0, 4, 3, 2)
    wrong = HaloBuffer.zeros(geometry.restrict_source_shape(cfg), 2)
    with pytest.raises(ContractViolationError):
        schemes.interpolate_halo(cfg, "matrix_linear", wrong)


def test_halo_exchange_matches_functional_pipeline():
    rng = np.random.default_rng(0)
    cache = taylor.OperatorCache()
    for scheme in ("tensor_linear", "matrix_linear", "order2"):
        for normal, side in (("x", "negative"), ("y", "positive"), ("z", "negative")):
            cfg = FaceConfig(normal, side, 5, 4, 3, 4)
            for role, half in (("interpolate", None), ("restrict", "inner"), ("restrict", "outer")):
                region = source_region(cfg, role)
                src = HaloBuffer(region, 4, rng.standard_normal(region.cell_count * 4))
                want = schemes.apply_scheme(cfg, scheme, role, src, half=half, cache=cache)

                ex = HaloExchange(cfg, scheme, role, half=half, cache=cache)
                assert ex.source_region == region
                assert ex.target_region == want.region
                out = np.empty(want.values.size)
                ex.run(src.values, out)
                assert np.array_equal(out, want.values)
                ex.run(src.values, out)  # reuse is stable
                assert np.array_equal(out, want.values)


def test_halo_exchange_validates_finiteness():
    cfg = FaceConfig("x", "negative", 0, 3, 1, 1)
    ex = HaloExchange(cfg, "matrix_linear", "interpolate")
    src, out = ex.make_buffers()
    src[0] = np.inf
    with pytest.raises(ContractViolationError):
        ex.run(src, out)


def test_scheme_outputs_agree_on_affine_everywhere_feasible():
    # order2/order3 and the two linear forms coincide on degree-one data
    rng = np.random.default_rng(1)
    from conftest import random_affine

    f = random_affine(rng)
    for normal, side in all_faces():
        cfg = FaceConfig(normal, side, 1, 4, 3, 2)
        src_i = geometry.interp_source_shape(cfg)
        buf = HaloBuffer(src_i, 2, np.empty(src_i.cell_count * 2))
        from trihalo import harness

        buf = harness.sample_field(src_i, f, 2, h=0.7)
        base = schemes.interpolate_halo(cfg, "tensor_linear", buf)
        for scheme in ("matrix_linear", "order2", "order3"):
            got = schemes.interpolate_halo(cfg, scheme, buf)
            assert np.abs(got.values - base.values).max() < 1e-11
