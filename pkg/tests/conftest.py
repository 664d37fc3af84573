# tests/conftest.py

import numpy as np
import pytest

from src.models.experiment_models import BumpConfig, DomainConfig, ExperimentConfig
from src.modules.domain_model import BoundaryMesh, _sphere_mesh, build_domain, rasterize_source, tangent_frame
from src.modules.elastic_forward import ElasticParams
from src.modules.helmholtz_forward import FrequencyGrid, FrequencySweep


def poly_bump(width=0.3, center=(0.0, 0.0, 0.0), field="f0", amplitude=(1.0,), pattern="direct"):
    return BumpConfig(field=field, kind="polynomial", center=center, width=width,
                      amplitude=list(amplitude), pattern=pattern)


def sphere_mesh(n: int, radius: float = 1.0) -> BoundaryMesh:
    nodes, normals, weights = _sphere_mesh(np.zeros(3), radius, n)
    return BoundaryMesh(nodes, normals, weights, tangent_frame(normals))


def random_sweep(n_nodes: int = 12, count: int = 20, d_omega: float = 0.3, vector: bool = False,
                 seed: int = 0) -> FrequencySweep:
    rng = np.random.default_rng(seed)
    shape = (n_nodes, count) + ((3,) if vector else ())
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    zero = rng.standard_normal((n_nodes,) + ((3,) if vector else ()))
    return FrequencySweep(values=values, zero_mode=zero, grid=FrequencyGrid(d_omega, count),
                          mesh=sphere_mesh(n_nodes))


@pytest.fixture(scope="session")
def small_ball():
    """Bola R=0.6 con h=0.1: (DomainSpec, BoundaryMesh)."""
    return build_domain(DomainConfig(shape="ball", radius=0.6), 0.1)


@pytest.fixture(scope="session")
def unit_ball():
    return build_domain(DomainConfig(shape="ball", radius=1.0), 0.1)


@pytest.fixture(scope="session")
def scalar_source(small_ball):
    domain, _ = small_ball
    return rasterize_source([poly_bump(0.3), poly_bump(0.3, field="f1", amplitude=(0.5,))], domain)


@pytest.fixture(scope="session")
def vector_source(small_ball):
    domain, _ = small_ball
    bumps = [poly_bump(0.3, amplitude=(1.0, 0.5, -0.25)),
             poly_bump(0.3, field="f1", amplitude=(0.0, 0.3, 0.2))]
    return rasterize_source(bumps, domain, vector=True)


@pytest.fixture(scope="session")
def lame():
    return ElasticParams(1.0, 1.0, 1.0)


@pytest.fixture
def scalar_config(tmp_path):
    return ExperimentConfig(
        name="caja_escalar", physics="scalar",
        domain=DomainConfig(shape="box", half_extents=(0.8, 0.8, 0.8)),
        sources=[poly_bump(0.5)], h=0.1, k_ladder=[2.0, 8.0], output_dir=str(tmp_path),
    )


@pytest.fixture
def tiny_config(tmp_path):
    return ExperimentConfig(
        name="bola_pequena", physics="scalar", domain=DomainConfig(shape="ball", radius=0.6),
        sources=[poly_bump(0.3)], h=0.1, k_ladder=[2.0, 4.0], output_dir=str(tmp_path),
        bound_points=4, mc_points=2, mc_walks=400, quadrature_nodes=16,
    )
