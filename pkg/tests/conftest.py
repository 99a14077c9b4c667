import numpy as np
import pytest

from src.analysis.sweep_runner import build_system
from src.models.experiment import BathBlock
from src.models.experiment import SystemBlock
from src.models.gaussian import OhmicBathSpec
from src.models.operators import CompositeSystem
from src.models.thermal import ThermalContext
from src.thermo.gibbs_thermo import gibbs_state


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def ctx() -> ThermalContext:
    return ThermalContext(beta=1.0)


@pytest.fixture
def qubit_system() -> CompositeSystem:
    """h_S = h_B = sz / 2, V = sx (x) sx, g = 0.2."""
    return build_system(SystemBlock(omega=1.0, levels=2), BathBlock(omega=1.0, levels=2), 0.2)


@pytest.fixture
def hot_rho_s(qubit_system):
    return gibbs_state(qubit_system.h_s, ThermalContext(beta=0.5))


@pytest.fixture
def small_bath() -> OhmicBathSpec:
    return OhmicBathSpec(n_osc=6, omega_max=2.0)
