"""Initial-state preparation and partial-wave scattering analysis.

Pure (condensate) case: a single box-discretized scattering eigenstate of
the grid Hamiltonian at the collision energy. Thermal case: a Boltzmann
ensemble over box eigenstates for all populated partial waves (even J only
for identical bosons). Phase shifts come from Numerov integration matched to
the free spherical (Riccati-Bessel) pair; shape resonances are located as
time-delay maxima of dJ/dE.

Box eigenstates stand in for energy-normalized continuum states: weights and
signals then compose exactly with the propagator, and the overall signal
scale is arbitrary anyway.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from . import shooting
from .dynamics import PairState, pure_state
from .grid import (DENSE_LIMIT, ConvergenceError, Grid, GridHamiltonian,
                   _dense_prefix_eig, eigensolve)
from .potentials import ChannelPotential, centrifugal, evaluate
from .units import RB2_REDUCED_MASS, to_au

UK = 1e-6  # tag shorthand


class ScatteringError(ValueError):
    pass


def _radial_callable(potential, j: int, mass: float):
    """Adapt a ChannelPotential or bare callable to V_J(r)."""
    base = potential.radial if isinstance(potential, ChannelPotential) else potential

    def v_j(r):
        v = np.asarray(base(np.asarray(r, dtype=np.float64)), dtype=np.float64)
        if j:
            v = v + centrifugal(r, j, mass)
        return v

    return v_j


def scattering_state(h: GridHamiltonian, e_target_uk: float,
                     manifold: str = "triplet") -> tuple[float, PairState]:
    """Box eigenstate of h with eigenvalue nearest the target collision
    energy (in uK above the channel asymptote)."""
    if e_target_uk <= 0:
        raise ScatteringError(
            f"E_target = {e_target_uk} uK is not above the asymptote "
            "(bound states are served by eigensolve)")
    e_au = to_au(e_target_uk, "uK")
    (energy, psi), = eigensolve(h, 1, which=("nearest", e_au))
    state = pure_state(h.grid, {manifold: psi}, weights={manifold: 1.0})
    return energy, state


def initial_pure_state(hams_g: dict[str, GridHamiltonian], e_target_uk: float,
                       weights: dict[str, float] | None = None
                       ) -> tuple[dict[str, float], PairState]:
    """Per-manifold scattering states at the same collision energy, with the
    default 75/25 triplet/singlet split. Returns ({manifold: E}, state)."""
    comps, energies = {}, {}
    for m in sorted(hams_g):
        e, st = scattering_state(hams_g[m], e_target_uk, manifold=m)
        comps[m] = st.psi_g[m]
        energies[m] = e
    return energies, pure_state(next(iter(hams_g.values())).grid, comps,
                                weights=weights)


@dataclass(frozen=True)
class EnsembleMember:
    manifold: str
    j: int
    energy: float          # hartree
    weight: float          # Boltzmann weight, normalized per manifold
    state: PairState


@dataclass
class ThermalEnsemble:
    temperature_uk: float
    members: list[EnsembleMember]
    partition_sum: float                 # captured (2J+1) e^(-E/kT) mass
    channel_weights: dict[str, float]

    def __iter__(self):
        return iter(self.members)


def build_ensemble(channels: dict[str, ChannelPotential], grid: Grid,
                   temperature_uk: float, e_cutoff_uk: float | None = None,
                   j_max: int = 8, even_j_only: bool = True,
                   channel_weights: dict[str, float] | None = None,
                   mass: float = RB2_REDUCED_MASS, threads: int = 1,
                   coverage_min: float = 0.999) -> ThermalEnsemble:
    """Boltzmann ensemble of box scattering eigenstates.

    ``channels`` maps manifold name -> ground ChannelPotential. Weights are
    (2J+1) exp(-E/kT), normalized to one within each manifold; the
    spin-statistical channel weights stay separate so the probe signal is
    w_t S_t + w_s S_s.
    """
    if temperature_uk <= 0:
        raise ScatteringError("temperature must be positive")
    if grid.n_points > DENSE_LIMIT:
        raise ScatteringError(
            f"thermal ensembles need a dense-solvable grid "
            f"(n_points <= {DENSE_LIMIT}); use a shorter box")
    kt = to_au(temperature_uk, "uK")
    cutoff = (to_au(e_cutoff_uk, "uK") if e_cutoff_uk is not None
              else 10.0 * kt)
    if channel_weights is None:
        channel_weights = ({"triplet": 0.75, "singlet": 0.25}
                           if len(channels) == 2
                           else {m: 1.0 for m in channels})
    j_values = list(range(0, j_max + 1, 2 if even_j_only else 1))
    jobs = [(m, j) for m in sorted(channels) for j in j_values]

    def solve(job):
        m, j = job
        h = GridHamiltonian(grid, evaluate(channels[m], grid, j, mass),
                            mass=mass, j=j)
        w, u = _dense_prefix_eig(h, grid.n_points)
        return job, w, u

    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for job, w, u in pool.map(solve, jobs):
                results[job] = (w, u)
    else:
        for job in jobs:
            job_, w, u = solve(job)
            results[job_] = (w, u)

    members = []
    captured = {m: 0.0 for m in channels}
    missing = {m: 0.0 for m in channels}
    box_l = grid.box_length
    for m, j in jobs:
        w, u = results[(m, j)]
        deg = 2 * j + 1
        sel = np.nonzero((w > 0.0) & (w <= cutoff))[0]
        for i in sel:
            psi = u[:, i] / np.sqrt(grid.dr)
            st = pure_state(grid, {m: psi}, weights={m: 1.0})
            members.append(EnsembleMember(manifold=m, j=j, energy=float(w[i]),
                                          weight=deg * np.exp(-w[i] / kt),
                                          state=st))
            captured[m] += deg * np.exp(-float(w[i]) / kt)
        # free-box density-of-states estimate of the mass above the cutoff
        e_hi = np.linspace(cutoff, cutoff + 40.0 * kt, 2000)
        dos = box_l * np.sqrt(2.0 * mass / e_hi) / (2.0 * np.pi)
        missing[m] += deg * np.trapezoid(dos * np.exp(-e_hi / kt), e_hi)

    for m in channels:
        total = captured[m] + missing[m]
        if total <= 0 or captured[m] / total < coverage_min:
            frac = captured[m] / total if total > 0 else 0.0
            raise ScatteringError(
                f"E_cutoff captures only {frac:.4%} of the Boltzmann mass "
                f"for manifold {m!r}; raise e_cutoff_uk")

    # normalize weights within each manifold
    norm = {m: sum(mem.weight for mem in members if mem.manifold == m)
            for m in channels}
    members = [EnsembleMember(mem.manifold, mem.j, mem.energy,
                              mem.weight / norm[mem.manifold], mem.state)
               for mem in members]
    members.sort(key=lambda mem: (mem.manifold, mem.j, mem.energy))
    return ThermalEnsemble(temperature_uk=temperature_uk, members=members,
                           partition_sum=sum(captured.values()),
                           channel_weights=dict(channel_weights))


def phase_shift(potential, j: int, energy_uk: float,
                mass: float = RB2_REDUCED_MASS, r_core: float | None = None,
                r_match: float | None = None, dr_ode: float = 0.01) -> float:
    """Scattering phase shift delta_J(E) in radians, principal value.

    ``potential`` is a ChannelPotential or a callable V(r) (centrifugal term
    added internally). ``r_core`` places a hard core: integration starts
    there with u = 0 (used for hard-sphere oracles).
    """
    if energy_uk <= 0:
        raise ScatteringError("phase shifts need E > 0")
    e = to_au(energy_uk, "uK")
    k = np.sqrt(2.0 * mass * e)
    v_j = _radial_callable(potential, j, mass)
    v_bare = _radial_callable(potential, 0, mass)

    if r_match is None:
        r_match = _auto_match_radius(potential, e)
    else:
        if abs(float(v_bare(np.array([r_match]))[0])) > 0.05 * e:
            raise ScatteringError(
                f"r_match = {r_match} is inside the potential range")
    if r_core is not None:
        r_start = r_core
    else:
        r_start = shooting.safe_start_radius(v_bare, e, dr_ode, mass)
    r, u = shooting.integrate_radial(v_j, e, r_start, r_match, dr_ode, mass)

    i2 = len(r) - 2
    quarter = np.pi / (4.0 * k)
    i1 = max(i2 - max(2, int(round(min(quarter, 0.4 * (r[-1] - r[0])) / dr_ode))), 1)
    return _match_free(j, k, r[i1], u[i1], r[i2], u[i2])


def _auto_match_radius(potential, e: float) -> float:
    """Radius where |V| has fallen to 1e-3 of the collision energy."""
    if isinstance(potential, ChannelPotential):
        r_tail = (potential.dispersion_coeff / (1e-3 * e)) ** (
            1.0 / potential.dispersion_power)
        return float(min(max(120.0, 1.1 * r_tail), 5000.0))
    return 800.0


def _match_free(j, k, r1, u1, r2, u2):
    """Match to s_J = kr j_J(kr), c_J = -kr y_J(kr): u ~ s cos d + c sin d."""
    def s(r):
        return k * r * spherical_jn(j, k * r)

    def c(r):
        return -k * r * spherical_yn(j, k * r)

    num = u2 * s(r1) - u1 * s(r2)
    den = u1 * c(r2) - u2 * c(r1)
    return float(np.arctan2(num, den))


def phase_shift_scan(potential, j: int, energies_uk,
                     mass: float = RB2_REDUCED_MASS, **kw) -> np.ndarray:
    """delta_J over an energy scan with continuous branch tracking
    (unwrapped modulo pi)."""
    raw = np.array([phase_shift(potential, j, e, mass, **kw)
                    for e in energies_uk])
    return np.unwrap(2.0 * raw) / 2.0


@dataclass(frozen=True)
class Resonance:
    channel: str
    j: int
    e_res_uk: float
    width_uk: float


@dataclass
class ResonanceTable:
    entries: list[Resonance]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def find_resonances(potential, j_list, e_range_uk, points: int = 160,
                    mass: float = RB2_REDUCED_MASS,
                    label: str | None = None) -> ResonanceTable:
    """Time-delay maxima of d delta_J / dE with Breit-Wigner widths.

    A maximum counts as a resonance when the local phase rise reaches a
    sizeable fraction of pi across the fitted width.
    """
    lo, hi = e_range_uk
    if lo <= 0 or hi <= lo:
        raise ScatteringError("E_range must be positive and increasing")
    if label is None:
        label = potential.label if isinstance(potential, ChannelPotential) else "?"
    energies = np.linspace(lo, hi, points)
    entries = []
    for j in j_list:
        delta = phase_shift_scan(potential, j, energies, mass)
        dd = np.gradient(delta, energies)  # rad / uK
        for i in range(1, points - 1):
            if not (dd[i] > dd[i - 1] and dd[i] >= dd[i + 1]):
                continue
            width = 2.0 / dd[i]
            # interior peak, sharp enough that delta climbs ~pi over ~width
            if width <= 0 or width > 0.8 * (hi - lo):
                continue
            # parabolic refinement of the peak position
            denom = dd[i - 1] - 2.0 * dd[i] + dd[i + 1]
            shift = 0.0
            if denom < 0:
                shift = 0.5 * (dd[i - 1] - dd[i + 1]) / denom
            e_res = energies[i] + shift * (energies[1] - energies[0])
            entries.append(Resonance(channel=label, j=j,
                                     e_res_uk=float(e_res),
                                     width_uk=float(width)))
    entries.sort(key=lambda r: (r.j, r.e_res_uk))
    return ResonanceTable(entries=entries)


def short_range_weight(state: PairState, manifold: str, r_cut: float = 100.0
                       ) -> float:
    """integral_0^r_cut |psi|^2 dr: resonance-enhanced members stand out."""
    grid = state.grid
    sel = grid.r <= r_cut
    return float(np.sum(np.abs(state.psi_g[manifold][sel]) ** 2) * grid.dr)
