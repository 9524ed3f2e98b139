import numpy as np
import pytest

from varq import mechanics as mech
from varq.numerics import build_grid
from varq.potentials import harmonic


@pytest.fixture
def unit_mass_harmonic():
    pot = harmonic(1.0)
    return mech.NaturalSystemSpec(
        mass=lambda q: 1.0 if np.isscalar(q) else np.ones(np.shape(q)),
        potential=pot.v,
        mass_grad=lambda q: 0.0 if np.isscalar(q) else np.zeros(np.shape(q)),
        potential_grad=pot.dv,
    )


@pytest.fixture
def free_particle():
    return mech.NaturalSystemSpec(
        mass=lambda q: 1.0 if np.isscalar(q) else np.ones(np.shape(q)),
        potential=lambda q: 0.0 if np.isscalar(q) else np.zeros(np.shape(q)),
        mass_grad=lambda q: 0.0 if np.isscalar(q) else np.zeros(np.shape(q)),
        potential_grad=lambda q: 0.0 if np.isscalar(q) else np.zeros(np.shape(q)),
    )


@pytest.fixture
def wide_grid():
    return build_grid(-10.0, 10.0, 2000)
