"""MAS-DNP box model with Landau-Zener rotor events and optical pumping of one electron."""

from .system import (SpinSystemSpec, RelaxationSet, DriveConfig, Preset, PRESETS,
                     TRITYL_TEMPO, TRITYL_TEMPO_RELAX, AMUPOL, AMUPOL_RELAX, COMMON_DRIVE)
from .events import (RotorEvent, AdiabaticLimitWarning, instantaneous_offsets,
                     detect_rotor_events, landau_zener_probability, passage_probability)
from .box import BoxEnsemble, PackingError, build_box
from .propagate import (PolarizationState, SimDiagnostics, apply_event, relax_step,
                        simulate_to_steady_state, epsilon_B, nuclear_equilibrium)
from .sweeps import (BoxTemplate, EffectiveFieldFit, FitDegenerateError, MODES,
                     field_profile, hyperpolarization_sweep, fit_effective_field)
