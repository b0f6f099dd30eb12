"""
Pytest configuration and fixtures
"""
import json

import pytest
from sympy import Rational

from dualbench.application.services.lattice_service import build_kernel, chain_kernel
from dualbench.application.services.simulation_service import SimulationService
from dualbench.infra.rng import stream


@pytest.fixture(scope="function")
def two_site_kernel():
    """Single bond 1 - 2 with unit rate"""
    return chain_kernel(2)


@pytest.fixture(scope="function")
def chain3():
    return chain_kernel(3)


@pytest.fixture(scope="function")
def chain5():
    return chain_kernel(5)


@pytest.fixture(scope="function")
def sep_boundary_chain():
    """5-chain with reservoir densities 1/4 and 3/4 at the end sites"""
    return chain_kernel(5, boundary={1: Rational(1, 4), 5: Rational(3, 4)})


@pytest.fixture(scope="function")
def equal_reservoir_chain():
    """3-chain with density 1/3 at both ends"""
    return chain_kernel(3, boundary={1: Rational(1, 3), 3: Rational(1, 3)})


@pytest.fixture(scope="function")
def kmp_boundary_chain():
    """4-chain with temperatures 1 and 2 at the end sites"""
    return chain_kernel(4, boundary={1: 1, 4: 2})


@pytest.fixture(scope="function")
def two_site_boundary():
    """Two sites, both on the boundary"""
    return build_kernel({"sites": ["1", "2"], "edges": [["1", "2"]],
                         "boundary": {"1": Rational(1, 5), "2": Rational(4, 5)}})


@pytest.fixture(scope="function")
def rng_factory():
    """rng_factory(stream_id) -> seeded generator"""
    def make(stream_id: int = 0, seed: int = 12345):
        return stream(seed, stream_id)
    return make


@pytest.fixture(scope="function")
def simulation():
    return SimulationService(seed=2024, threads=1)


@pytest.fixture(scope="function")
def tmp_out(tmp_path):
    """Artifact directory for CLI runs"""
    out = tmp_path / "out"
    out.mkdir()
    return out


@pytest.fixture(scope="function")
def write_config(tmp_path):
    """write_config(dict) -> path of a JSON experiment file"""
    def write(data, name: str = "experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)
    return write
