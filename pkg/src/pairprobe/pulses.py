"""Transform-limited Gaussian pulses.

Conventions: ``fwhm_ps`` is the FWHM of the *intensity* profile (standard lab
convention), so the field envelope is

    E(t) = E0 exp(-2 ln2 (t - t_center)^2 / fwhm^2)

and the intensity-spectrum FWHM obeys the Gaussian time-bandwidth product
0.441. A 10 ps pulse therefore spans 44.1 GHz = 1.47 cm^-1. The pulse has
effective support on |t - t_center| < 4 fwhm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .units import AU_FIELD_SI, C_SI, CM1_TO_HARTREE, EPS0_SI, PS_TO_AU

LN2 = np.log(2.0)
TIME_BANDWIDTH = 2.0 * LN2 / np.pi   # Gaussian transform limit, 0.4413

SUPPORT_FWHM = 4.0  # pulse window half-width in units of fwhm


class PulseConfigError(ValueError):
    pass


class ChirpNotImplementedError(NotImplementedError):
    """Chirped pulses are reserved for future work and rejected at runtime."""


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian pulse described either by peak field or by pulse energy+spot.

    detuning_cm1 is the laser detuning from the atomic line,
    Delta_L = omega_L - omega_at, in cm^-1 (negative detunings place the
    Condon radius at finite internuclear distance).
    """

    fwhm_ps: float
    detuning_cm1: float
    t_center_ps: float = 0.0
    peak_field_au: float | None = None
    energy_nj: float | None = None
    spot_um: float | None = None
    chirp: float = 0.0

    def __post_init__(self):
        if self.fwhm_ps <= 0:
            raise PulseConfigError("fwhm_ps must be positive")
        by_field = self.peak_field_au is not None
        by_energy = self.energy_nj is not None or self.spot_um is not None
        if by_field == by_energy:
            raise PulseConfigError(
                "set exactly one of peak_field_au or (energy_nj, spot_um)")
        if by_energy and (self.energy_nj is None or self.spot_um is None):
            raise PulseConfigError("energy_nj and spot_um must be given together")

    @property
    def detuning(self) -> float:
        """Detuning in hartree."""
        return self.detuning_cm1 * CM1_TO_HARTREE

    @property
    def fwhm_au(self) -> float:
        return self.fwhm_ps * PS_TO_AU

    @property
    def peak_field(self) -> float:
        """Peak field in atomic units, resolving the energy/spot form."""
        if self.peak_field_au is not None:
            return self.peak_field_au
        return peak_field_from_energy(self.energy_nj, self.spot_um, self.fwhm_ps)

    def window(self) -> tuple[float, float]:
        """(start, end) of the pulse support, in ps."""
        return (self.t_center_ps - SUPPORT_FWHM * self.fwhm_ps,
                self.t_center_ps + SUPPORT_FWHM * self.fwhm_ps)


def envelope(p: PulseSpec, t_ps) -> np.ndarray:
    """Field envelope E(t) in atomic units; t in ps."""
    if p.chirp != 0.0:
        raise ChirpNotImplementedError("chirped pulses are not implemented")
    t = np.asarray(t_ps, dtype=np.float64)
    return p.peak_field * np.exp(-2.0 * LN2 * (t - p.t_center_ps) ** 2
                                 / p.fwhm_ps**2)


def bandwidth(p: PulseSpec) -> float:
    """Intensity-spectrum FWHM in cm^-1."""
    dnu_hz = TIME_BANDWIDTH / (p.fwhm_ps * 1e-12)
    return dnu_hz / (C_SI * 100.0)


def peak_field_from_energy(energy_nj: float, spot_um: float,
                           fwhm_ps: float) -> float:
    """Peak field (a.u.) from pulse energy (nJ), spot diameter (um) and
    intensity FWHM (ps), via the fluence relation
    energy = (eps0 c / 2) E0^2 (pi spot^2/4) integral g(t)^2 dt."""
    if energy_nj <= 0 or spot_um <= 0 or fwhm_ps <= 0:
        raise PulseConfigError("energy, spot and fwhm must all be positive")
    area_m2 = np.pi * (spot_um * 1e-6) ** 2 / 4.0
    g2_integral = fwhm_ps * 1e-12 * np.sqrt(np.pi / (4.0 * LN2))
    e0_si = np.sqrt(2.0 * energy_nj * 1e-9
                    / (EPS0_SI * C_SI * area_m2 * g2_integral))
    return e0_si / AU_FIELD_SI


def pulse_energy(p: PulseSpec, spot_um: float) -> float:
    """Pulse energy in nJ implied by the peak field and a spot diameter."""
    area_m2 = np.pi * (spot_um * 1e-6) ** 2 / 4.0
    g2_integral = p.fwhm_ps * 1e-12 * np.sqrt(np.pi / (4.0 * LN2))
    e0_si = p.peak_field * AU_FIELD_SI
    return 0.5 * EPS0_SI * C_SI * e0_si**2 * area_m2 * g2_integral / 1e-9


def field_for_area(area_rad: float, dipole_value: float, fwhm_ps: float) -> float:
    """Peak field giving a resonant pulse area of ``area_rad``:
    area = mu E0 * integral of the unit envelope."""
    g_integral = fwhm_ps * PS_TO_AU * np.sqrt(np.pi / (2.0 * LN2))
    return area_rad / (dipole_value * g_integral)


def pulse_area(p: PulseSpec, dipole_value: float) -> float:
    """Resonant Rabi area mu * integral E(t) dt, in radians."""
    g_integral = p.fwhm_ps * PS_TO_AU * np.sqrt(np.pi / (2.0 * LN2))
    return dipole_value * p.peak_field * g_integral
