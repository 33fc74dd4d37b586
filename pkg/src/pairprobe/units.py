"""Physical constants and unit conversions.

Everything internal to the library is in Hartree atomic units (hbar = 1,
m_e = 1, lengths in bohr, energies in hartree). I/O quantities carry one of
the spectroscopic unit tags below. Conversion factors come from
scipy.constants (CODATA 2018).
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _sc

# CODATA 2018 building blocks (SI)
BOHR_SI = _sc.physical_constants["Bohr radius"][0]            # m
HARTREE_SI = _sc.physical_constants["Hartree energy"][0]      # J
AU_TIME_SI = _sc.physical_constants["atomic unit of time"][0]  # s
AU_FIELD_SI = _sc.physical_constants["atomic unit of electric field"][0]  # V/m
KB_SI = _sc.k
H_SI = _sc.h
C_SI = _sc.c
EPS0_SI = _sc.epsilon_0

# frequently used composite factors
HARTREE_TO_CM1 = HARTREE_SI / (H_SI * C_SI * 100.0)   # hartree -> cm^-1
CM1_TO_HARTREE = 1.0 / HARTREE_TO_CM1
KELVIN_TO_HARTREE = KB_SI / HARTREE_SI
PS_TO_AU = 1e-12 / AU_TIME_SI
AU_TO_PS = 1.0 / PS_TO_AU

# Reduced mass of a pair of 87Rb atoms, in electron masses
# (86.909180527 u / 2, fixed library constant).
RB2_REDUCED_MASS = 79212.8


class UnitError(ValueError):
    """Conversion between incompatible dimensions."""


#: tag -> (dimension, factor to the dimension's atomic-unit base)
_UNITS: dict[str, tuple[str, float]] = {
    "bohr": ("length", 1.0),
    "hartree": ("energy", 1.0),
    "cm^-1": ("energy", CM1_TO_HARTREE),
    "GHz": ("energy", H_SI * 1e9 / HARTREE_SI),
    "uK": ("energy", KELVIN_TO_HARTREE * 1e-6),
    "nJ": ("energy", 1e-9 / HARTREE_SI),
    "au_time": ("time", 1.0),
    "ps": ("time", PS_TO_AU),
    "au_field": ("field", 1.0),
}

UNIT_TAGS = tuple(_UNITS)


@dataclass(frozen=True)
class Quantity:
    """A value with a unit tag."""

    value: float
    unit: str

    def __post_init__(self):
        if self.unit not in _UNITS:
            raise UnitError(f"unknown unit tag {self.unit!r}; known: {UNIT_TAGS}")

    @property
    def dimension(self) -> str:
        return _UNITS[self.unit][0]

    def to(self, target: str) -> "Quantity":
        return convert(self, target)


def convert(q: Quantity, target: str) -> Quantity:
    """Convert ``q`` to the unit ``target`` (exact linear rescaling).

    Raises UnitError when the dimensions are incompatible.
    """
    if target not in _UNITS:
        raise UnitError(f"unknown unit tag {target!r}; known: {UNIT_TAGS}")
    dim_src, fac_src = _UNITS[q.unit]
    dim_dst, fac_dst = _UNITS[target]
    if dim_src != dim_dst:
        raise UnitError(
            f"cannot convert {q.unit!r} ({dim_src}) to {target!r} ({dim_dst})"
        )
    return Quantity(q.value * fac_src / fac_dst, target)


def to_au(value: float, unit: str) -> float:
    """Shortcut: value in ``unit`` -> plain float in the atomic-unit base."""
    dim, fac = _UNITS[unit]
    return value * fac


def from_au(value: float, unit: str) -> float:
    """Shortcut: atomic-unit base value -> plain float in ``unit``."""
    dim, fac = _UNITS[unit]
    return value / fac
