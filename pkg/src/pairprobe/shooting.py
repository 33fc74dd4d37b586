"""Numerov integration of the radial equation u'' = f(r) u.

Shared between the grid eigensolver (box-eigenvalue shooting on large grids)
and the scattering module (phase shifts). All quantities in atomic units.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .units import RB2_REDUCED_MASS


@njit(cache=True)
def _numerov_kernel(f, dr):
    """Outward Numerov sweep for u'' = f u, u[0] = 0, with overflow rescaling."""
    n = f.size
    u = np.empty(n)
    u[0] = 0.0
    u[1] = 1e-12
    h2 = dr * dr / 12.0
    for i in range(1, n - 1):
        u[i + 1] = (
            (2.0 + 10.0 * h2 * f[i]) * u[i] - (1.0 - h2 * f[i - 1]) * u[i - 1]
        ) / (1.0 - h2 * f[i + 1])
        if abs(u[i + 1]) > 1e100:
            for j in range(i + 2):
                u[j] *= 1e-100
    return u


def integrate_radial(potential, energy, r_start, r_end, dr, mass=RB2_REDUCED_MASS):
    """Numerov solution of the radial equation on a uniform mesh.

    ``potential`` is a callable V(r) (any centrifugal term already folded in).
    Returns (r, u) with u(r_start) = 0.
    """
    n = int(np.floor((r_end - r_start) / dr)) + 1
    r = r_start + dr * np.arange(n)
    f = 2.0 * mass * (potential(r) - energy)
    u = _numerov_kernel(np.ascontiguousarray(f, dtype=np.float64), dr)
    return r, u


def safe_start_radius(potential, energy, dr, mass=RB2_REDUCED_MASS,
                      r_lo=0.3, r_hi=30.0, kappa_dr=0.3):
    """Innermost radius at which Numerov can start inside a repulsive wall.

    Picks r_start where the local decay constant satisfies
    sqrt(2 m (V - E)) * dr <= kappa_dr, so the forbidden-region growth is
    resolved. Starting with u = 0 there is accurate because the true solution
    is exponentially small further in.
    """
    kap2_cap = (kappa_dr / dr) ** 2

    def g(r):
        return 2.0 * mass * (float(potential(np.array([r]))[0]) - energy) - kap2_cap

    if g(r_lo) < 0.0:
        return r_lo
    if g(r_hi) > 0.0:
        raise ValueError("no classically allowed region below r_hi")
    return brentq(g, r_lo, r_hi, xtol=1e-12)


def count_nodes(u, floor_rel=1e-200):
    """Sign changes of u, skipping exact zeros from overflow rescaling."""
    w = u[np.abs(u) > floor_rel]
    return int(np.sum(w[1:] * w[:-1] < 0.0))
