"""Shared fixtures for the bilqctrl test suite."""
from pathlib import Path

import numpy as np
import pytest

from bilqctrl.system import GalerkinSystem, build_molecule

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def molecule4() -> GalerkinSystem:
    return build_molecule(4)


@pytest.fixture
def molecule10() -> GalerkinSystem:
    return build_molecule(10)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def full_coupling():
    """Real antisymmetric coupling with every off-diagonal entry nonzero."""
    def build(spectrum):
        n = len(spectrum)
        b = np.triu(np.ones((n, n)), k=1)
        return GalerkinSystem(spectrum, b - b.T, label="full")
    return build
