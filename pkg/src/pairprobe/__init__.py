"""Pump-probe simulator for two-body pair-correlation dynamics in ultracold
gases: pump-pulse hole creation, field-free hole dynamics, window-operator
probe absorption versus delay, thermal averaging over partial waves, and
harmonic inversion of the transient signal."""

from .config import ConfigError, RunConfig, default_config, load_config
from .dynamics import (PairState, PropagatorConfig, propagate_channel,
                       propagate_free, pump, pure_state, step_pulsed)
from .grid import (Grid, GridHamiltonian, apply_kinetic, default_grid,
                   eigensolve)
from .potentials import (ChannelPotential, DipoleFunction, condon_radius,
                         default_channels, difference_potential, evaluate)
from .probe import (TransientSignal, WindowOperator, amplitude_map,
                    build_window, transient_signal)
from .pulses import PulseSpec, bandwidth, envelope, peak_field_from_energy
from .spectral import (SpectralLine, harmonic_inversion,
                       match_lines_to_levels, periodogram)
from .states import (ThermalEnsemble, build_ensemble, find_resonances,
                     initial_pure_state, phase_shift, phase_shift_scan,
                     scattering_state)
from .units import Quantity, UnitError, convert

__version__ = "0.1.0"
