"""Analytic model potentials for the ground singlet/triplet and excited
0u+/0g- channels, centrifugal augmentation, probe difference potential,
and the transition dipole.

Ground channels: V(r) = A exp(-beta r) - C6/r^6.
Excited channels: V(r) = A exp(-beta r) - C3/r^3, measured relative to the
atomic asymptote (the absolute atomic frequency never enters under the
rotating-wave approximation; only detunings do).

All potentials are capped at V_CAP on the repulsive wall so the spectral
radius of the grid Hamiltonian stays propagation-friendly; the cap sits far
above every energy the dynamics reaches.

The shipped ground-channel walls were tuned so that (with C6 = 4707 a.u., the
literature Rb2 dispersion coefficient) the s-wave scattering lengths land
near 101 a0 (triplet) and 91 a0 (singlet) and each channel carries a J = 2
shape resonance in the experimentally relevant sub-mK decade. The wall
position is the documented knob for moving those resonances.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .grid import Grid
from .units import RB2_REDUCED_MASS

V_CAP = 2.0e-3  # hartree; repulsive-wall cap

C6_RB2 = 4707.0          # hartree bohr^6, both ground channels
C3_0U = 8.0              # hartree bohr^3; places Condon radii at 76/48 a0
C3_0G = 4.75             # hartree bohr^3; triplet probe sits at shorter r

GROUND_LABELS = ("X-singlet", "a-triplet")
EXCITED_LABELS = ("0u+", "0g-")


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelPotential:
    """One electronic channel: exponential wall + single dispersion tail."""

    label: str
    wall_amplitude: float        # A, hartree
    wall_range: float            # beta, 1/bohr
    dispersion_power: int        # 6 (ground) or 3 (excited)
    dispersion_coeff: float      # C6 or C3, hartree bohr^power
    asymptote: float = 0.0       # hartree
    well_depth: float | None = None  # provenance of the wall tuning, hartree
    cap: float = V_CAP

    @property
    def is_excited(self) -> bool:
        return self.dispersion_power == 3

    def radial(self, r: np.ndarray) -> np.ndarray:
        """V(r) with the wall cap applied (asymptote included)."""
        r = np.asarray(r, dtype=np.float64)
        v = (self.wall_amplitude * np.exp(-self.wall_range * r)
             - self.dispersion_coeff / r**self.dispersion_power)
        return np.minimum(v, self.cap) + self.asymptote

    def minimum(self, r_lo=3.0, r_hi=120.0, samples=20000):
        """(r_min_pos, V_min) of the well by dense sampling."""
        r = np.linspace(r_lo, r_hi, samples)
        v = self.radial(r)
        i = int(np.argmin(v))
        return float(r[i]), float(v[i])


def ground_channel(label: str, wall_range: float, r_minimum: float,
                   c6: float = C6_RB2) -> ChannelPotential:
    """Ground channel with the well minimum placed at ``r_minimum``.

    The wall amplitude follows from dV/dr = 0 at r_minimum; the implied well
    depth is recorded on the instance.
    """
    a = (6.0 * c6 / r_minimum**7) / wall_range * np.exp(wall_range * r_minimum)
    depth = (c6 / r_minimum**6) * (1.0 - 6.0 / (wall_range * r_minimum))
    return ChannelPotential(label=label, wall_amplitude=a, wall_range=wall_range,
                            dispersion_power=6, dispersion_coeff=c6,
                            well_depth=depth)


def default_triplet() -> ChannelPotential:
    # a ~ 101 a0, 24 bound levels, J=2 shape resonance near 290 uK
    return ground_channel("a-triplet", wall_range=1.6, r_minimum=14.112)


def default_singlet() -> ChannelPotential:
    # deeper well: a ~ 91 a0, 27 bound levels, J=2 shape resonance near 170 uK
    return ground_channel("X-singlet", wall_range=1.5, r_minimum=13.308)


def default_excited_0u() -> ChannelPotential:
    return ChannelPotential(label="0u+", wall_amplitude=50.0, wall_range=0.7,
                            dispersion_power=3, dispersion_coeff=C3_0U)


def default_excited_0g() -> ChannelPotential:
    return ChannelPotential(label="0g-", wall_amplitude=50.0, wall_range=0.7,
                            dispersion_power=3, dispersion_coeff=C3_0G)


def default_channels() -> dict[str, ChannelPotential]:
    """Ground channels keyed by manifold plus their probed excited partners.

    Dipole selection pairs the gerade ground singlet with the ungerade 0u+
    and the ungerade ground triplet with the gerade 0g-.
    """
    return {
        "singlet": default_singlet(),
        "triplet": default_triplet(),
        "singlet_excited": default_excited_0u(),
        "triplet_excited": default_excited_0g(),
    }


def centrifugal(r: np.ndarray, j: int, mass: float = RB2_REDUCED_MASS) -> np.ndarray:
    return j * (j + 1) / (2.0 * mass * np.asarray(r) ** 2)


def evaluate(p: ChannelPotential, grid: Grid, j: int = 0,
             mass: float = RB2_REDUCED_MASS) -> np.ndarray:
    """V_J(r_i) = V(r_i) + J(J+1)/(2 m r_i^2) on the grid."""
    if j < 0:
        raise PotentialError("partial wave J must be >= 0")
    v = p.radial(grid.r)
    if j:
        v = v + centrifugal(grid.r, j, mass)
    return v


def difference_potential(e: ChannelPotential, g: ChannelPotential,
                         detuning: float, r: np.ndarray) -> np.ndarray:
    """Delta(r) = V_e(r) - V_g(r) - detuning (all relative to the atomic
    asymptote, so Delta(inf) = -detuning)."""
    if not e.is_excited or g.is_excited:
        raise PotentialError("expected (excited, ground) channel pair")
    return e.radial(r) - g.radial(r) - detuning


def condon_radius(e: ChannelPotential, g: ChannelPotential, detuning: float,
                  r_lo=5.0, r_hi=3000.0) -> float | None:
    """Root of Delta(r) = 0, or None when no crossing exists in range."""
    def delta(r):
        return float(difference_potential(e, g, detuning, np.array([r]))[0])
    rr = np.geomspace(r_lo, r_hi, 2048)
    dd = difference_potential(e, g, detuning, rr)
    flips = np.nonzero(np.sign(dd[1:]) != np.sign(dd[:-1]))[0]
    if not len(flips):
        return None
    i = flips[-1]  # outermost crossing is the probed one
    return float(brentq(delta, rr[i], rr[i + 1], xtol=1e-10))


@dataclass(frozen=True)
class DipoleFunction:
    """Transition dipole mu(r): constant by default, tabulated on demand."""

    value: float = 4.0
    r_table: np.ndarray | None = None
    mu_table: np.ndarray | None = None

    def __post_init__(self):
        if (self.r_table is None) != (self.mu_table is None):
            raise PotentialError("tabulated dipole needs both r and mu tables")
        if self.mu_table is not None and np.any(np.asarray(self.mu_table) <= 0):
            raise PotentialError("dipole must be strictly positive")
        if self.r_table is None and self.value <= 0:
            raise PotentialError("dipole must be strictly positive")

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if self.r_table is None:
            return np.full_like(r, self.value)
        return np.interp(r, self.r_table, self.mu_table)


def export_csv(p: ChannelPotential, grid: Grid, path, j: int = 0) -> None:
    """Write (r, V) samples for plotting."""
    v = evaluate(p, grid, j)
    with open(path, "w") as fh:
        fh.write("r_bohr,v_hartree\n")
        for ri, vi in zip(grid.r, v):
            fh.write(f"{ri!r},{vi!r}\n")


def with_cap(p: ChannelPotential, cap: float) -> ChannelPotential:
    return replace(p, cap=cap)
