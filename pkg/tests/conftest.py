import math

import pytest
import yaml

from schemas.domain import CouplingSet, DriveProtocol
from tests.helpers import disordered


@pytest.fixture
def couplings4() -> CouplingSet:
    return disordered(4, seed=7)


@pytest.fixture
def couplings6() -> CouplingSet:
    return disordered(6, seed=11)


@pytest.fixture
def protocol() -> DriveProtocol:
    return DriveProtocol(theta=math.pi / 2, gamma=math.pi, tau=0.1, N=4, M=6, noise_seed=3)


@pytest.fixture
def minimal_config() -> dict:
    return {
        "schema_version": 1,
        "graph": {"L": 4, "seed": 5, "disorder": {"seed": 6}},
        "protocol": {"gamma": math.pi, "tau": 0.1, "N": 4, "M": 10, "noise_fraction": 0.05, "noise_seed": 7},
    }


@pytest.fixture
def write_config(tmp_path):
    def write(data: dict, name: str = "config.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path

    return write
