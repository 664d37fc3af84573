# tests/test_domain_model.py

import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from src.core.errors import DomainError, PreconditionError
from src.models.experiment_models import BallConfig, DomainConfig
from src.modules.domain_model import (
    build_domain, error_norms, rasterize_source, sobolev_norm, source_norms, zero_source,
)
from tests.conftest import poly_bump


def test_ball_mesh_quadrature(unit_ball):
    domain, mesh = unit_ball
    assert mesh.area == pytest.approx(4.0 * math.pi)
    assert domain.area == pytest.approx(4.0 * math.pi)
    assert np.allclose(np.linalg.norm(mesh.normals, axis=1), 1.0)
    assert np.allclose(np.einsum("nad,nd->na", mesh.tangents, mesh.normals), 0.0, atol=1e-12)
    assert np.allclose(np.linalg.norm(mesh.nodes, axis=1), 1.0)


def test_box_mesh_area_and_geometry():
    domain, mesh = build_domain(DomainConfig(shape="box", half_extents=(0.5, 0.8, 1.0)), 0.1)
    assert mesh.area == pytest.approx(8.0 * (0.4 + 0.8 + 0.5))
    assert domain.diameter == pytest.approx(2.0 * math.sqrt(0.25 + 0.64 + 1.0))
    assert np.allclose(domain.sdf(mesh.nodes), 0.0, atol=1e-12)


def test_box_sdf_and_projection():
    domain, _ = build_domain(DomainConfig(shape="box", half_extents=(1.0, 1.0, 1.0)), 0.1)
    assert domain.sdf(np.zeros((1, 3)))[0] == pytest.approx(1.0)
    assert domain.sdf(np.array([[2.0, 0.0, 0.0]]))[0] == pytest.approx(-1.0)
    pts = np.random.default_rng(0).uniform(-1.5, 1.5, (200, 3))
    assert np.allclose(domain.sdf(domain.project(pts)), 0.0, atol=1e-12)


def test_union_uses_mesh_area():
    cfg = DomainConfig(shape="union", balls=[BallConfig(center=(-0.5, 0, 0), radius=1.0),
                                             BallConfig(center=(0.5, 0, 0), radius=1.0)])
    domain, mesh = build_domain(cfg, 0.1)
    assert domain.diameter == pytest.approx(3.0)
    assert domain.area == pytest.approx(mesh.area)
    assert 4.0 * math.pi < domain.area < 8.0 * math.pi
    assert np.all(domain.sdf(mesh.nodes) > -1e-9)


def test_degenerate_domains():
    with pytest.raises(DomainError):
        build_domain(DomainConfig(shape="ball", radius=0.0), 0.1)
    with pytest.raises(DomainError):
        build_domain(DomainConfig(shape="box", half_extents=(1.0, 0.0, 1.0)), 0.1)
    with pytest.raises(PreconditionError):
        build_domain(DomainConfig(), 0.0)


def test_voxel_diameter_close_to_exact(unit_ball):
    domain, _ = unit_ball
    assert abs(domain.voxel_diameter() - 2.0) <= 2.0 * domain.h


def test_standoff_violation_raises(unit_ball):
    domain, _ = unit_ball
    with pytest.raises(DomainError):
        rasterize_source([poly_bump(0.9)], domain)


def test_rasterized_support_respects_mask(small_ball):
    domain, _ = small_ball
    src = rasterize_source([poly_bump(0.3)], domain)
    assert np.all(src.f0[~src.mask] == 0.0)
    assert src.f0[domain.half_counts] == pytest.approx(1.0)


def test_sobolev_l2_matches_grid_sum(scalar_source):
    h = scalar_source.domain.h
    direct = math.sqrt(h ** 3 * float(np.sum(scalar_source.f0 ** 2)))
    assert sobolev_norm(scalar_source.f0, h, 0) == pytest.approx(direct, rel=1e-10)


@hsettings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 2.9), st.floats(0.01, 1.0))
def test_sobolev_monotone_in_order(s, ds):
    rng = np.random.default_rng(3)
    g = rng.standard_normal((9, 9, 9))
    assert sobolev_norm(g, 0.1, s) <= sobolev_norm(g, 0.1, min(s + ds, 3.0)) * (1.0 + 1e-12)


def test_sobolev_order_range():
    with pytest.raises(PreconditionError):
        sobolev_norm(np.zeros((3, 3, 3)), 0.1, 4.0)


def test_sobolev_vector_sums_components(vector_source):
    h = vector_source.domain.h
    total = sum(sobolev_norm(vector_source.f0[..., i], h, 1) ** 2 for i in range(3))
    assert sobolev_norm(vector_source.f0, h, 1) == pytest.approx(math.sqrt(total), rel=1e-10)


def test_scaled_source_scales_norms(scalar_source):
    a = source_norms(scalar_source)
    b = source_norms(scalar_source.scaled(3.0))
    for s in a.f0:
        assert b.f0[s] == pytest.approx(3.0 * a.f0[s], rel=1e-12)
    assert b.M1 == pytest.approx(3.0 * a.M1, rel=1e-12)


def test_error_norms_of_identical_sources(scalar_source):
    errs = error_norms(scalar_source, scalar_source)
    assert all(v == 0.0 for v in errs.values())


def test_zero_source(small_ball):
    src = zero_source(small_ball[0], vector=True)
    assert src.is_zero and src.vector
