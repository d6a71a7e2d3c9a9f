"""Shared helpers: deterministic fields, face enumeration, pipeline shortcuts."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from trihalo import geometry, harness, schemes, taylor
from trihalo.geometry import AXES, SIDES, FaceConfig


@pytest.fixture(scope="session")
def shared_cache():
    return taylor.OperatorCache()


def all_faces():
    return list(itertools.product(AXES, SIDES))


def valid_pk(ps, ks):
    return [(p, k) for p in ps for k in ks if k <= p]


def random_affine(rng):
    coeffs = rng.uniform(-1.0, 1.0, size=4)
    return harness.affine_field(*coeffs)


def random_polynomial(rng, degree: int):
    """Dense polynomial with every monomial of total degree <= degree."""
    exponents = [
        (a, b, c)
        for d in range(degree + 1)
        for a in range(d, -1, -1)
        for b in range(d - a, -1, -1)
        for c in (d - a - b,)
    ]
    coeffs = rng.uniform(-1.0, 1.0, size=len(exponents))

    def f(x, y, z):
        total = np.zeros_like(np.asarray(x, dtype=np.float64))
        for w, (a, b, c) in zip(coeffs, exponents):
            total = total + w * x**a * y**b * z**c
        return total

    return f


def source_region(cfg: FaceConfig, role: str):
    if role == "interpolate":
        return geometry.interp_source_shape(cfg)
    return geometry.restrict_source_shape(cfg)


def run_scheme_on_field(cfg, scheme, role, f, h=0.5, half=None, u=None, cache=None,
                        channel_phase=0.0):
    u = u if u is not None else cfg.u
    src = harness.sample_field(source_region(cfg, role), f, u, h=h, channel_phase=channel_phase)
    out = schemes.apply_scheme(cfg, scheme, role, src, half=half, cache=cache)
    expected = harness.sample_field(out.region, f, u, h=h, channel_phase=channel_phase)
    err = float(np.abs(out.values - expected.values).max()) if out.values.size else 0.0
    return out, expected, err
