# tests/test_lattice.py

import math

import numpy as np
import pytest

from src.core.errors import PreconditionError
from src.modules.lattice import (
    bounded_grid, cfl_dt, check_cfl, dirichlet_layer, free_space_grid, lsq_weights, trilinear_matrix,
)
from tests.conftest import sphere_mesh


def _linear(p):
    return 0.3 + p @ np.array([1.0, -2.0, 0.5])


def test_cfl():
    dt = cfl_dt(0.1, 2.0, 0.9)
    assert dt == pytest.approx(0.9 * 0.1 / (2.0 * math.sqrt(3.0)))
    check_cfl(dt, 0.1, 2.0)
    with pytest.raises(PreconditionError):
        check_cfl(0.1, 0.1, 1.0)


def test_free_space_grid_contains_reach(small_ball):
    domain, _ = small_ball
    grid = free_space_grid(domain, 1.0, 0.5)
    assert grid.half * grid.h >= domain.outer_radius + 0.5
    field = np.random.default_rng(0).standard_normal(domain.grid_shape)
    assert np.array_equal(grid.restrict(grid.embed(field)), field)


def test_trilinear_exact_on_linear_fields(small_ball):
    domain, mesh = small_ball
    grid = bounded_grid(domain)
    W = trilinear_matrix(grid.axes, mesh.nodes)
    values = _linear(grid.points().reshape(-1, 3))
    assert np.allclose(W @ values, _linear(mesh.nodes), atol=1e-12)
    assert np.allclose(np.asarray(W.sum(axis=1)).ravel(), 1.0)


def test_trilinear_outside_grid(small_ball):
    grid = bounded_grid(small_ball[0])
    with pytest.raises(PreconditionError):
        trilinear_matrix(grid.axes, np.array([[10.0, 0.0, 0.0]]))


@pytest.mark.parametrize("connectivity,count", [(1, 6), (3, 26)])
def test_dirichlet_layer_of_single_node(connectivity, count):
    interior = np.zeros((5, 5, 5), dtype=bool)
    interior[2, 2, 2] = True
    layer = dirichlet_layer(interior, connectivity)
    assert layer.sum() == count and not layer[2, 2, 2]


def test_lsq_weights_reproduce_linear_data():
    mesh = sphere_mesh(400)
    rng = np.random.default_rng(1)
    dirs = rng.standard_normal((50, 3))
    targets = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    W = lsq_weights(mesh, targets)
    assert W.shape == (50, 400)
    assert np.allclose(W @ _linear(mesh.nodes), _linear(targets), atol=1e-10)


def test_lsq_weights_empty():
    assert lsq_weights(sphere_mesh(20), np.zeros((0, 3))).shape == (0, 20)
