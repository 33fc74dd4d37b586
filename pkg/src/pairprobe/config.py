"""Run configuration: TOML parsing, validation, canonical hashing, defaults.

A run is one TOML file. Unknown keys are rejected (typos surface as config
errors naming the offending path). The sha256 hash of the canonical JSON
serialization is stamped into every output file, so identical configs yield
byte-identical artifacts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .grid import Grid, GridError, GridHamiltonian
from .potentials import (ChannelPotential, DipoleFunction, V_CAP, evaluate,
                         ground_channel)
from .pulses import PulseConfigError, PulseSpec, field_for_area
from .units import RB2_REDUCED_MASS


class ConfigError(ValueError):
    """Invalid run configuration; message names the config path."""


def default_config() -> dict:
    """Paper-analog defaults: 10 ps pulses at -4 cm^-1, pure 20 uK initial
    state with the 75/25 triplet/singlet split, probe identical to pump."""
    return {
        "grid": {"r_min": 3.0, "r_max": 4000.0, "n_points": 16384},
        "potentials": {
            "cap_hartree": V_CAP,
            "triplet": {"wall_range": 1.6, "r_minimum": 14.112, "c6": 4707.0},
            "singlet": {"wall_range": 1.5, "r_minimum": 13.308, "c6": 4707.0},
            "excited_0u": {"wall_amplitude": 50.0, "wall_range": 0.7,
                           "c3": 8.0},
            "excited_0g": {"wall_amplitude": 50.0, "wall_range": 0.7,
                           "c3": 4.75},
        },
        "dipole": {"value": 4.0},
        "pulse": {
            "fwhm_ps": 10.0,
            "detuning_cm1": -4.0,
            # pi pulse area at the default dipole; energy_nj+spot_um may
            # replace peak_field_au
            "peak_field_au": field_for_area(np.pi, 4.0, 10.0),
            "spot_um": 100.0,
            "t_center_ps": 0.0,
        },
        "probe": {},
        "initial": {
            "kind": "pure",
            "energy_uk": 20.0,
            "weight_triplet": 0.75,
            "channels": ["singlet", "triplet"],
            "temperature_uk": 100.0,
            "e_cutoff_kt": 10.0,
            "j_max": 8,
            "even_j_only": True,
        },
        "delays": {"start_ps": 0.0, "stop_ps": 2000.0, "step_ps": 2.0},
        "spectral": {"band_cm1": [0.004, 4.0], "max_lines": 12},
        "map": {"enabled": False, "manifold": "triplet",
                "detunings_cm1": []},
        "scan": {"field_factors": []},
        "propagation": {"dt_pulse_ps": 0.0025},
        "run": {"deterministic": True, "output_dir": "out",
                "checkpoint_every_ps": 0.0},
    }


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{here}: expected a table")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


_PULSE_EXCLUSIVE = ("peak_field_au", "energy_nj")


def load_config(path=None, overrides: dict | None = None) -> "RunConfig":
    data = default_config()
    if path is not None:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
        # a user pulse table providing energy_nj replaces the default field
        if "energy_nj" in user.get("pulse", {}) and \
                "peak_field_au" not in user.get("pulse", {}):
            data["pulse"].pop("peak_field_au")
            data["pulse"]["energy_nj"] = 0.0
        data = _merge(data, user)
    if overrides:
        data = _merge(data, overrides)
    cfg = RunConfig(data)
    cfg.validate()
    return cfg


@dataclass
class RunConfig:
    """Validated run configuration with typed builders for every module."""

    data: dict

    # -- provenance ----------------------------------------------------
    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- validation ----------------------------------------------------
    def validate(self) -> None:
        d = self.data
        try:
            Grid(**d["grid"])
        except (GridError, TypeError) as err:
            raise ConfigError(f"grid: {err}") from err
        for name in ("triplet", "singlet"):
            p = d["potentials"][name]
            if p["wall_range"] <= 0 or p["r_minimum"] <= 0 or p["c6"] <= 0:
                raise ConfigError(f"potentials.{name}: parameters must be positive")
        for name in ("excited_0u", "excited_0g"):
            p = d["potentials"][name]
            if p["c3"] <= 0:
                raise ConfigError(f"potentials.{name}.c3 must be positive")
        if d["dipole"]["value"] <= 0:
            raise ConfigError("dipole.value must be positive")
        try:
            self.pump_pulse()
            self.probe_pulse()
        except (PulseConfigError, KeyError) as err:
            raise ConfigError(f"pulse: {err}") from err
        init = d["initial"]
        if init["kind"] not in ("pure", "thermal"):
            raise ConfigError("initial.kind must be 'pure' or 'thermal'")
        for ch in init["channels"]:
            if ch not in ("singlet", "triplet"):
                raise ConfigError(f"initial.channels: unknown channel {ch!r}")
        if not init["channels"]:
            raise ConfigError("initial.channels must not be empty")
        if not 0.0 <= init["weight_triplet"] <= 1.0:
            raise ConfigError("initial.weight_triplet must lie in [0, 1]")
        dl = d["delays"]
        if dl["step_ps"] <= 0 or dl["stop_ps"] <= dl["start_ps"]:
            raise ConfigError("delays: need stop_ps > start_ps and step_ps > 0")
        if dl["start_ps"] < 0:
            raise ConfigError("delays.start_ps must be >= 0")
        band = d["spectral"]["band_cm1"]
        if len(band) != 2 or band[0] < 0 or band[1] <= band[0]:
            raise ConfigError("spectral.band_cm1 must be [lo, hi] with hi > lo >= 0")
        if d["propagation"]["dt_pulse_ps"] <= 0:
            raise ConfigError("propagation.dt_pulse_ps must be positive")

    # -- builders --------------------------------------------------------
    def grid(self) -> Grid:
        return Grid(**self.data["grid"])

    def channels(self) -> dict[str, ChannelPotential]:
        pots = self.data["potentials"]
        cap = pots["cap_hartree"]
        out = {}
        for name in ("triplet", "singlet"):
            p = pots[name]
            chan = ground_channel(
                "a-triplet" if name == "triplet" else "X-singlet",
                wall_range=p["wall_range"], r_minimum=p["r_minimum"],
                c6=p["c6"])
            out[name] = ChannelPotential(
                label=chan.label, wall_amplitude=chan.wall_amplitude,
                wall_range=chan.wall_range, dispersion_power=6,
                dispersion_coeff=p["c6"], well_depth=chan.well_depth, cap=cap)
        # dipole selection: gerade ground singlet <-> ungerade 0u+,
        # ungerade ground triplet <-> gerade 0g-
        for name, key, label in (("singlet_excited", "excited_0u", "0u+"),
                                 ("triplet_excited", "excited_0g", "0g-")):
            p = pots[key]
            out[name] = ChannelPotential(
                label=label, wall_amplitude=p["wall_amplitude"],
                wall_range=p["wall_range"], dispersion_power=3,
                dispersion_coeff=p["c3"], cap=cap)
        return out

    def dipole(self) -> DipoleFunction:
        return DipoleFunction(value=self.data["dipole"]["value"])

    def _pulse_from(self, table: dict) -> PulseSpec:
        kwargs = dict(
            fwhm_ps=table["fwhm_ps"],
            detuning_cm1=table["detuning_cm1"],
            t_center_ps=table.get("t_center_ps", 0.0),
        )
        if "peak_field_au" in table:
            kwargs["peak_field_au"] = table["peak_field_au"]
        else:
            kwargs["energy_nj"] = table["energy_nj"]
            kwargs["spot_um"] = table["spot_um"]
        return PulseSpec(**kwargs)

    def pump_pulse(self) -> PulseSpec:
        return self._pulse_from(self.data["pulse"])

    def probe_pulse(self) -> PulseSpec:
        """Probe defaults identical to the pump; [probe] keys override."""
        merged = dict(self.data["pulse"])
        probe = self.data["probe"]
        if "energy_nj" in probe or "peak_field_au" in probe:
            merged.pop("peak_field_au", None)
            merged.pop("energy_nj", None)
        merged.update(probe)
        merged["t_center_ps"] = 0.0
        return self._pulse_from(merged)

    def manifolds(self) -> list[str]:
        return sorted(self.data["initial"]["channels"])

    def manifold_weights(self) -> dict[str, float]:
        w_t = self.data["initial"]["weight_triplet"]
        names = self.manifolds()
        if names == ["singlet", "triplet"]:
            return {"triplet": w_t, "singlet": 1.0 - w_t}
        return {names[0]: 1.0}

    def hamiltonians(self, j: int = 0, mass: float = RB2_REDUCED_MASS
                     ) -> dict[str, tuple[GridHamiltonian, GridHamiltonian]]:
        """(ground, excited) Hamiltonian pair per requested manifold."""
        grid = self.grid()
        chans = self.channels()
        out = {}
        for m in self.manifolds():
            h_g = GridHamiltonian(grid, evaluate(chans[m], grid, j), j=j)
            h_e = GridHamiltonian(grid, evaluate(chans[f"{m}_excited"], grid, j),
                                  j=j)
            out[m] = (h_g, h_e)
        return out

    def delays_ps(self) -> np.ndarray:
        d = self.data["delays"]
        n = int(round((d["stop_ps"] - d["start_ps"]) / d["step_ps"]))
        return d["start_ps"] + d["step_ps"] * np.arange(n + 1)
