"""Shared fixtures: small grids and channel sets sized for fast tests.

The compact grid reuses the production radial spacing (so the tuned model
potentials are represented identically) inside a shorter box that stays
dense-solvable.
"""

import numpy as np
import pytest

from pairprobe.grid import Grid, GridHamiltonian
from pairprobe.potentials import (DipoleFunction, default_excited_0g,
                                  default_excited_0u, default_singlet,
                                  default_triplet, evaluate)

PRODUCTION_DR = (4000.0 - 3.0) / (16384 - 1)


def compact_grid(n_points=2048):
    """Short box with the production spacing."""
    return Grid(r_min=3.0, r_max=3.0 + (n_points - 1) * PRODUCTION_DR,
                n_points=n_points)


@pytest.fixture(scope="session")
def channels():
    return {
        "triplet": default_triplet(),
        "singlet": default_singlet(),
        "triplet_excited": default_excited_0g(),
        "singlet_excited": default_excited_0u(),
    }


@pytest.fixture(scope="session")
def dipole():
    return DipoleFunction(value=4.0)


@pytest.fixture(scope="session")
def grid_small():
    return compact_grid(1024)


@pytest.fixture(scope="session")
def grid_mid():
    return compact_grid(2048)


@pytest.fixture(scope="session")
def triplet_h(grid_mid, channels):
    return GridHamiltonian(grid_mid, evaluate(channels["triplet"], grid_mid, 0))


def numerov_oracle_nodes(v_func, e, r_lo, r_hi, dr, mass=79212.8):
    """Test-local Numerov node counter, independent of the package kernel."""
    r = np.arange(r_lo, r_hi, dr)
    f = 2.0 * mass * (v_func(r) - e)
    u = np.zeros(len(r))
    u[1] = 1e-12
    h2 = dr * dr / 12.0
    nodes = 0
    for i in range(1, len(r) - 1):
        u[i + 1] = ((2.0 + 10.0 * h2 * f[i]) * u[i]
                    - (1.0 - h2 * f[i - 1]) * u[i - 1]) / (1.0 - h2 * f[i + 1])
        if u[i + 1] * u[i] < 0.0:
            nodes += 1
        if abs(u[i + 1]) > 1e100:
            u[i] *= 1e-100
            u[i + 1] *= 1e-100
    return nodes
