"""Window-operator probe: transient absorption versus pump-probe delay.

Within first-order perturbation theory (weak probe, saturated ionization
step) the probe absorption is the expectation value of the diagonal window
operator

    W(r) = pi (tau_p E_p0)^2 exp(-2 Delta(r)^2 tau_p^2) mu(r)^2

where Delta(r) = V_e(r) - V_g(r) - Delta_L is the difference potential at
the probe detuning. Singlet and triplet windows differ because the probed
excited channels differ.

Delays are measured pump-maximum to probe-maximum. The post-pump state is
rewound field-free to the pump maximum once, so the whole delay scan is a
single forward propagation with snapshots; delays shorter than the pump
half-window therefore carry the effective impulsive-pump state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (PairState, PropagatorConfig, propagate_channel, pump)
from .grid import Grid, GridHamiltonian
from .potentials import (ChannelPotential, DipoleFunction, condon_radius,
                         difference_potential)
from .pulses import PulseSpec
from .states import ThermalEnsemble
from .units import HARTREE_TO_CM1, PS_TO_AU


class WindowError(ValueError):
    pass


class DelayGridError(ValueError):
    pass


@dataclass(frozen=True)
class WindowOperator:
    """Diagonal probe window on the grid, with its defining parameters."""

    values: np.ndarray
    grid: Grid
    tau_ps: float
    peak_field: float
    detuning_cm1: float
    ground_label: str
    excited_label: str

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.sum(np.abs(psi) ** 2 * self.values) * self.grid.dr)


def build_window(probe: PulseSpec, g: ChannelPotential, e: ChannelPotential,
                 dipole: DipoleFunction, grid: Grid,
                 openness_tol: float = 1e-3) -> WindowOperator:
    """Window operator for one (ground, excited) channel pair.

    Requires a negative probe detuning and a window that is closed at the
    grid edge: W(r_max) < openness_tol * max(W).
    """
    if probe.detuning_cm1 >= 0:
        raise WindowError("probe detuning must be negative (red of the line)")
    tau = probe.fwhm_au
    e0 = probe.peak_field
    delta = difference_potential(e, g, probe.detuning, grid.r)
    w = (np.pi * (tau * e0) ** 2 * np.exp(-2.0 * delta**2 * tau**2)
         * dipole(grid.r) ** 2)
    if w[-1] >= openness_tol * w.max():
        raise WindowError(
            f"window open at r_max (W(r_max)/W_max = {w[-1] / w.max():.2e}); "
            "increase |detuning| or the probe duration")
    return WindowOperator(values=w, grid=grid, tau_ps=probe.fwhm_ps,
                          peak_field=e0, detuning_cm1=probe.detuning_cm1,
                          ground_label=g.label, excited_label=e.label)


@dataclass
class TransientSignal:
    """Probe-absorption samples versus pump-probe delay (arbitrary units)."""

    delays_ps: np.ndarray
    total: np.ndarray
    per_manifold: dict[str, np.ndarray]
    baseline_total: float
    baseline_per_manifold: dict[str, float]
    provenance: dict = field(default_factory=dict)

    @property
    def normalized(self) -> np.ndarray:
        return self.total / self.baseline_total

    def dt_ps(self) -> float:
        steps = np.diff(self.delays_ps)
        return float(steps[0]) if len(steps) else 0.0


def _check_delays(delays_ps) -> np.ndarray:
    delays = np.asarray(delays_ps, dtype=np.float64)
    if delays.ndim != 1 or len(delays) < 1:
        raise DelayGridError("need a 1-D list of delays")
    if np.any(delays < 0):
        raise DelayGridError("delays must be >= 0 (pump max to probe max)")
    if np.any(np.diff(delays) <= 0):
        raise DelayGridError("delay grid must be strictly increasing")
    return delays


def _member_signal(state: PairState, pump_pulse: PulseSpec,
                   windows: dict[str, WindowOperator],
                   hams: dict[str, tuple[GridHamiltonian, GridHamiltonian]],
                   dipole: DipoleFunction, delays: np.ndarray,
                   config: PropagatorConfig):
    """Pump once, rewind to the pump maximum, then sample the window along a
    single forward propagation. Returns {manifold: signal array}."""
    rewind_ps = pump_pulse.t_center_ps - pump_pulse.window()[1]
    if pump_pulse.peak_field != 0.0:
        state = pump(state, pump_pulse, hams, dipole, config)
    out = {}
    for m in state.manifolds():
        h_g = hams[m][0]
        psi = state.psi_g[m]
        if pump_pulse.peak_field != 0.0:
            psi = propagate_channel(h_g, psi, rewind_ps, config)
        sig = np.empty(len(delays))
        t_now = 0.0
        for i, d in enumerate(delays):
            if d > t_now:
                psi = propagate_channel(h_g, psi, d - t_now, config)
                t_now = d
            sig[i] = windows[m].expectation(psi)
        out[m] = sig
    return out


def transient_signal(initial, pump_pulse: PulseSpec,
                     windows: dict[str, WindowOperator],
                     hams: dict[str, tuple[GridHamiltonian, GridHamiltonian]],
                     dipole: DipoleFunction, delays_ps,
                     config: PropagatorConfig | None = None,
                     threads: int = 1,
                     provenance: dict | None = None) -> TransientSignal:
    """S(dt) = sum over manifolds w_m <psi_g|W_m|psi_g>(dt), Boltzmann
    weighted over ensemble members in the thermal case.

    ``initial`` is a PairState or a ThermalEnsemble. One pump per member;
    each member is propagated once with snapshots at the requested delays,
    and the reduction over members runs in a fixed order regardless of
    ``threads``.
    """
    config = config or PropagatorConfig()
    delays = _check_delays(delays_ps)

    if isinstance(initial, ThermalEnsemble):
        manifold_weights = dict(initial.channel_weights)
        jobs = [(mem.manifold, mem.weight, mem.state) for mem in initial.members]
    else:
        manifold_weights = dict(initial.weights)
        jobs = [(m, 1.0, _single_manifold(initial, m))
                for m in initial.manifolds()]

    manifolds = sorted({m for m, _, _ in jobs})
    baseline = {}
    for m in manifolds:
        base = 0.0
        for mm, wgt, st in jobs:
            if mm == m:
                base += wgt * windows[m].expectation(st.psi_g[m])
        baseline[m] = base

    def run(job):
        m, wgt, st = job
        return wgt * _member_signal(st, pump_pulse, windows, hams, dipole,
                                    delays, config)[m]

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]

    per_manifold = {m: np.zeros(len(delays)) for m in manifolds}
    for (m, _, _), part in zip(jobs, parts):
        per_manifold[m] = per_manifold[m] + part

    total = np.zeros(len(delays))
    baseline_total = 0.0
    for m in manifolds:
        total += manifold_weights[m] * per_manifold[m]
        baseline_total += manifold_weights[m] * baseline[m]

    return TransientSignal(delays_ps=delays, total=total,
                           per_manifold=per_manifold,
                           baseline_total=baseline_total,
                           baseline_per_manifold=baseline,
                           provenance=provenance or {})


def _single_manifold(state: PairState, manifold: str) -> PairState:
    from .dynamics import pure_state
    return pure_state(state.grid, {manifold: state.psi_g[manifold]},
                      weights={manifold: 1.0}, time_ps=state.time_ps)


@dataclass(frozen=True)
class MapEntry:
    detuning_cm1: float
    r_star: float | None
    density_estimate: float | None

    @property
    def ok(self) -> bool:
        return self.r_star is not None


def amplitude_map(state: PairState, manifold: str, g: ChannelPotential,
                  e: ChannelPotential, dipole: DipoleFunction,
                  probe_template: PulseSpec, detunings_cm1) -> list[MapEntry]:
    """|Phi(r*)|^2 estimates from a frequency-scanned probe window.

    For each scan detuning the Condon root r* fixes the measured position and
    the zeroth-order deconvolution <psi|W|psi> / integral W dr estimates the
    density there. Rootless frequencies yield flagged entries.
    """
    from dataclasses import replace as _replace
    grid = state.grid
    psi = state.psi_g[manifold]
    entries = []
    for det in detunings_cm1:
        p = _replace(probe_template, detuning_cm1=float(det))
        r_star = condon_radius(e, g, p.detuning, r_lo=grid.r_min,
                               r_hi=grid.r_max)
        if r_star is None:
            entries.append(MapEntry(float(det), None, None))
            continue
        window = build_window(p, g, e, dipole, grid)
        w_int = float(np.sum(window.values) * grid.dr)
        est = window.expectation(psi) / w_int
        entries.append(MapEntry(float(det), float(r_star), float(est)))
    return entries
