"""Physical constants and unit conversions (CODATA values via scipy)."""

import math

import scipy.constants as cnst

H = cnst.h
HBAR = cnst.hbar
KB = cnst.k
R_GAS = cnst.R
C_CM = cnst.c * 100.0  # speed of light in cm/s
MU_B = cnst.physical_constants["Bohr magneton"][0]
# free-proton gyromagnetic ratio over 2 pi, Hz/T
GAMMA_H_HZ = cnst.physical_constants["proton gyromag. ratio in MHz/T"][0] * 1e6
# point-dipole electron-electron coupling constant, Hz * nm^3 (g = 2.0023)
DIPOLAR_EE_HZ_NM3 = (cnst.mu_0 / (4 * math.pi)) * (2.00231930436 * MU_B) ** 2 / H * 1e27
AVOGADRO = cnst.N_A


def hz_to_wavenumber(freq_hz):
    """Frequency in Hz to energy in cm^-1."""
    return freq_hz / C_CM


def wavenumber_to_hz(wn):
    return wn * C_CM


def wavenumber_to_rad(wn):
    return 2 * math.pi * wn * C_CM


def electron_larmor_hz(g, b0_tesla):
    return g * MU_B * b0_tesla / H


def proton_larmor_hz(b0_tesla):
    return GAMMA_H_HZ * b0_tesla


# Quantity parsing for the config layer. Each unit maps to (dimension, factor to SI-ish
# internal unit). Internal units: Hz for frequencies/couplings, s, K, T, cm^-1 for
# photophysics energies, kJ/mol for activation energy, nm, mM, rad for angles.
UNITS = {
    "Hz": ("frequency", 1.0),
    "kHz": ("frequency", 1e3),
    "MHz": ("frequency", 1e6),
    "GHz": ("frequency", 1e9),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "μs": ("time", 1e-6),
    "ns": ("time", 1e-9),
    "s-1": ("rate", 1.0),
    "1/s": ("rate", 1.0),
    "K": ("temperature", 1.0),
    "T": ("field", 1.0),
    "mT": ("field", 1e-3),
    "cm-1": ("wavenumber", 1.0),
    "kJ/mol": ("molar_energy", 1.0),
    "J/mol": ("molar_energy", 1e-3),
    "nm": ("length", 1.0),
    "A": ("length", 0.1),
    "mM": ("concentration", 1.0),
    "M": ("concentration", 1e3),
    "cm/s": ("speed", 1.0),
    "deg": ("angle", math.pi / 180.0),
    "rad": ("angle", 1.0),
}


def parse_quantity(text, dimension=None):
    """Parse ``"30 MHz"`` into a float in internal units.

    Raises ValueError when the unit is missing, unknown, or of the wrong dimension.
    """
    if not isinstance(text, str):
        raise ValueError(f"expected a quantity with unit, got {text!r}")
    parts = text.strip().split()
    if len(parts) != 2:
        raise ValueError(f"expected '<number> <unit>', got {text!r}")
    value, unit = parts
    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r} in {text!r}")
    dim, factor = UNITS[unit]
    if dimension is not None and dim != dimension:
        raise ValueError(f"{text!r} has dimension {dim}, expected {dimension}")
    return float(value) * factor
