import numpy as np
import pytest

from procequil.sim.channels import random_rank1_instrument
from procequil.sim.experiments import random_pure_state
from procequil.sim.process import MultitimeInstrument, ProcessSpec
from procequil.sim.qmath import random_density_matrix, random_hermitian


def make_spec(seed: int, d_E: int = 2, steps: int = 2, dts=None, pure: bool = False, d_S: int = 2) -> ProcessSpec:
    """Random Hamiltonian and state; intervals drawn on [0, 5] unless given."""
    rng = np.random.default_rng(seed)
    d = d_S * d_E
    h = random_hermitian(d, rng)
    rho = random_pure_state(d, rng).data if pure else random_density_matrix(d, rng).data
    if dts is None:
        dts = tuple(rng.uniform(0.0, 5.0, size=steps))
    return ProcessSpec.from_hamiltonian(h, rho, d_S, steps, dts)


def make_instrument(seed: int, steps: int, d_S: int = 2) -> MultitimeInstrument:
    rng = np.random.default_rng(seed)
    return MultitimeInstrument(tuple(random_rank1_instrument(rng, d_S) for _ in range(steps)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spec():
    return make_spec(7)
