"""Spin-system, relaxation and drive descriptions plus the two shipped presets."""

from dataclasses import dataclass, field, replace
import math
from typing import Optional

import numpy as np

from ..spincore import EulerAngles

ZERO_EULER = EulerAngles(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SpinSystemSpec:
    """One two-electron / one-proton unit.

    Both g-tensors are given by principal values and a ZYZ orientation in a common
    molecular frame (``euler_a`` defaults to the identity, so the molecular frame is the
    g_a frame).  Vector directions (``dipolar_angles``, ``hyperfine_angles``) are polar
    angles (rad) in that frame.  Couplings in Hz.
    """

    g_a: tuple
    g_b: tuple
    euler_ab: EulerAngles
    D_ab: float
    dipolar_angles: tuple
    J_ab: float = 0.0
    A_hf: float = 0.0
    hyperfine_angles: tuple = (0.0, 0.0)
    euler_a: EulerAngles = ZERO_EULER
    hf_electron: str = "a"
    name: str = ""

    def __post_init__(self):
        for lab in ("g_a", "g_b"):
            g = tuple(float(x) for x in getattr(self, lab))
            if len(g) != 3:
                raise ValueError(f"{lab} needs three principal values")
            if not all(1.9 < x < 2.1 for x in g):
                raise ValueError(f"{lab} principal values must lie in (1.9, 2.1), got {g}")
            object.__setattr__(self, lab, g)
        for lab in ("dipolar_angles", "hyperfine_angles"):
            object.__setattr__(self, lab, tuple(float(x) for x in getattr(self, lab)))
        for lab in ("D_ab", "J_ab", "A_hf"):
            if not math.isfinite(getattr(self, lab)):
                raise ValueError(f"{lab} must be finite")
        if self.hf_electron not in ("a", "b"):
            raise ValueError("hf_electron must be 'a' or 'b'")

    def g_tensor(self, which):
        """Molecular-frame g matrix of electron ``which``."""
        g, eul = (self.g_a, self.euler_a) if which == "a" else (self.g_b, self.euler_ab)
        R = eul.matrix()
        return R @ np.diag(g) @ R.T

    def replace(self, **kw):
        return replace(self, **kw)

    def swapped(self):
        """Same physical unit with the electron labels exchanged."""
        return replace(self, g_a=self.g_b, g_b=self.g_a, euler_a=self.euler_ab,
                       euler_ab=self.euler_a,
                       hf_electron="b" if self.hf_electron == "a" else "a")

    def intra_distance(self, dipolar_constant):
        """Point-dipole electron distance (nm) implied by D_ab."""
        if self.D_ab == 0:
            return math.inf
        return (dipolar_constant / abs(self.D_ab)) ** (1 / 3)


@dataclass(frozen=True)
class RelaxationSet:
    """Longitudinal relaxation times, s.

    The pumpable electron (``pumped``, default a) relaxes with ``T1e_a_eff`` whether or
    not the laser is on; pumping only replaces its thermal target by the optical one.
    The other electron relaxes to thermal with ``T1e_b``.
    """

    T1e_a_eff: float
    T1e_b: float
    T2e: float
    T1n: float
    pumped: str = "a"

    def __post_init__(self):
        for lab in ("T1e_a_eff", "T1e_b", "T2e", "T1n"):
            if not getattr(self, lab) > 0:
                raise ValueError(f"{lab} must be positive")
        if self.pumped not in ("a", "b"):
            raise ValueError("pumped must be 'a' or 'b'")

    def replace(self, **kw):
        return replace(self, **kw)

    def swapped(self):
        return replace(self, pumped="b" if self.pumped == "a" else "a")


@dataclass(frozen=True)
class DriveConfig:
    uw_frequency: float
    uw_nutation: float
    B0: float
    temperature: float
    mas_rate: float
    optical_target: Optional[float] = None

    def __post_init__(self):
        if not self.mas_rate > 0:
            raise ValueError("mas_rate must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.uw_nutation < 0:
            raise ValueError("uw_nutation must be >= 0")
        if self.optical_target is not None and abs(self.optical_target) > 1:
            raise ValueError("optical_target must lie in [-1, 1]")

    @property
    def rotor_period(self):
        return 1.0 / self.mas_rate

    def replace(self, **kw):
        return replace(self, **kw)


def _deg(*x):
    return tuple(math.radians(v) for v in x)


COMMON_DRIVE = DriveConfig(uw_frequency=526.9e9, uw_nutation=0.2e6, B0=18.8,
                           temperature=100.0, mas_rate=8e3)

TRITYL_TEMPO = SpinSystemSpec(
    g_a=(2.0095, 2.0061, 2.0021),
    g_b=(2.0032, 2.0030, 2.0027),
    euler_ab=EulerAngles.from_degrees(90, 90, 90),
    D_ab=30e6,
    dipolar_angles=_deg(90, 180),
    J_ab=0.0,
    A_hf=3e6,
    hyperfine_angles=_deg(90, 0),
    name="trityl-tempo",
)
TRITYL_TEMPO_RELAX = RelaxationSet(T1e_a_eff=10e-6, T1e_b=1e-3, T2e=2.5e-6, T1n=0.1)

AMUPOL = SpinSystemSpec(
    g_a=(2.00923, 2.00619, 2.00212),
    g_b=(2.00923, 2.00619, 2.00212),
    euler_ab=EulerAngles.from_degrees(58, 57, 126),
    D_ab=35e6,
    dipolar_angles=_deg(78, 167),
    J_ab=-16e6,
    A_hf=3e6,
    hyperfine_angles=_deg(0, 90),
    name="amupol",
)
AMUPOL_RELAX = RelaxationSet(T1e_a_eff=10e-6, T1e_b=0.3e-3, T2e=2.5e-6, T1n=0.1)


@dataclass(frozen=True)
class Preset:
    spec: SpinSystemSpec
    relax: RelaxationSet
    drive: DriveConfig
    min_distance: float = 4.2  # nm
    concentration: float = 10.0  # mM


PRESETS = {
    "trityl-tempo": Preset(TRITYL_TEMPO, TRITYL_TEMPO_RELAX, COMMON_DRIVE),
    "amupol": Preset(AMUPOL, AMUPOL_RELAX, COMMON_DRIVE),
}
