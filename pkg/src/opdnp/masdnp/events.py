"""Rotor-synchronized offsets, level anti-crossings and Landau-Zener passages.

Frames: a crystallite ``EulerAngles`` rotates the molecular frame into the rotor frame;
in the rotor frame the field direction is
b(phi) = (sin(theta_m) cos(phi), -sin(theta_m) sin(phi), cos(theta_m)) with theta_m the
magic angle and phi = 2 pi nu_r t.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from ..units import MU_B, H, proton_larmor_hz

MAGIC_ANGLE = math.acos(1 / math.sqrt(3))
BOHR_HZ_PER_T = MU_B / H

UW, DJ, CE = 0, 1, 2
KIND_NAMES = {UW: "uw", DJ: "dj", CE: "ce"}


class AdiabaticLimitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RotorEvent:
    """One anti-crossing inside a rotor period.

    ``spins`` are indices into the unit (0 = a, 1 = b, 2 = proton) or into a box.  For
    CE events the order is (higher-frequency electron, lower-frequency electron,
    proton).  ``rate`` is d(condition)/dt in Hz/s.
    """

    time: float
    kind: int
    spins: tuple
    rate: float
    coupling: float
    probability: float

    @property
    def kind_name(self):
        return KIND_NAMES[self.kind]


def field_direction(phase):
    phase = np.asarray(phase, dtype=float)
    s, c = math.sin(MAGIC_ANGLE), math.cos(MAGIC_ANGLE)
    return np.stack([s * np.cos(phase), -s * np.sin(phase), np.full_like(phase, c)], axis=-1)


def polar_vector(theta, phi):
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def effective_g(G_rotor, b):
    """|G b| for field directions ``b`` (..., 3)."""
    return np.linalg.norm(b @ G_rotor.T, axis=-1)


class UnitGeometry:
    """Precomputed rotor-frame tensors and vectors of one unit in one crystallite."""

    def __init__(self, spec, crystallite):
        R = crystallite.matrix()
        self.spec = spec
        self.R = R
        self.G = {k: R @ spec.g_tensor(k) @ R.T for k in ("a", "b")}
        self.dip = R @ polar_vector(*spec.dipolar_angles)
        self.hf = R @ polar_vector(*spec.hyperfine_angles)

    def g_values(self, phase):
        b = field_direction(phase)
        return effective_g(self.G["a"], b), effective_g(self.G["b"], b)

    def offsets(self, phase, drive):
        ga, gb = self.g_values(phase)
        scale = BOHR_HZ_PER_T * drive.B0
        return ga * scale - drive.uw_frequency, gb * scale - drive.uw_frequency

    def cos_dipolar(self, phase):
        return field_direction(phase) @ self.dip

    def cos_hyperfine(self, phase):
        return field_direction(phase) @ self.hf

    def dj_coupling(self, phase):
        """|D_sec + 2J| with D_sec = D_ab (1 - 3 cos^2) / 2."""
        c = self.cos_dipolar(phase)
        return np.abs(self.spec.D_ab * (1 - 3 * c * c) / 2 + 2 * self.spec.J_ab)

    def ce_coupling(self, phase, nu_n):
        """|A_pm| |D_ab| / nu_n with A_pm = (3/4) A |sin 2 theta_n|."""
        c = self.cos_hyperfine(phase)
        s2 = 2 * c * np.sqrt(np.clip(1 - c * c, 0.0, None))
        a_pm = 0.75 * abs(self.spec.A_hf) * np.abs(s2)
        return a_pm * abs(self.spec.D_ab) / nu_n


def instantaneous_offsets(spec, crystallite, rotor_phase, drive):
    """(offset_a, offset_b, nuclear Larmor), Hz, at ``rotor_phase`` (rad)."""
    geo = UnitGeometry(spec, crystallite)
    oa, ob = geo.offsets(np.array([rotor_phase]), drive)
    return float(oa[0]), float(ob[0]), proton_larmor_hz(drive.B0)


def landau_zener_probability(coupling, sweep_rate):
    """p = 1 - exp(-2 pi c^2 / |rate|); c in Hz, rate in Hz/s.

    A zero sweep rate is the adiabatic limit: p = 1 with a warning.
    """
    if sweep_rate == 0:
        warnings.warn("zero sweep rate: adiabatic limit p = 1", AdiabaticLimitWarning,
                      stacklevel=2)
        return 1.0
    return -math.expm1(-2 * math.pi * coupling * coupling / abs(sweep_rate))


GAP_KINDS = (UW, DJ)


def passage_probability(coupling_hz, rate_hz_per_s, kind=CE):
    """Engine-side LZ probability: coupling and sweep rate enter as angular quantities.

    With c and the rate in rad/s and rad/s^2 the exponent 2 pi c^2 / |rate| equals the
    textbook 4 pi^2 c_Hz^2 / |rate_Hz| for an off-diagonal element c_Hz.  For kinds in
    ``GAP_KINDS`` the coupling is the full splitting at the anti-crossing, so half of it
    is the element.
    """
    if kind in GAP_KINDS:
        coupling_hz = 0.5 * coupling_hz
    return landau_zener_probability(2 * math.pi * coupling_hz, 2 * math.pi * rate_hz_per_s)


def find_crossings(f, period):
    """Zero crossings of a periodic sampled signal ``f`` (length N over one period).

    Returns (times, rates) with times by linear interpolation and rates from the
    difference of the two bracketing samples.
    """
    f = np.asarray(f, dtype=float)
    n = len(f)
    dt = period / n
    f1 = np.roll(f, -1)
    hit = ((f <= 0) & (f1 > 0)) | ((f > 0) & (f1 <= 0))
    k = np.flatnonzero(hit)
    df = f1[k] - f[k]
    frac = -f[k] / df
    return (k + frac) * dt, df / dt


def sample_phases(samples_per_period):
    return 2 * np.pi * np.arange(samples_per_period) / samples_per_period


def detect_rotor_events(spec, crystallite, drive, samples_per_period=2048,
                        geometry=None):
    """All microwave, D/J and CE anti-crossings of one unit over one rotor period."""
    if samples_per_period < 512:
        raise ValueError("samples_per_period must be >= 512")
    geo = geometry or UnitGeometry(spec, crystallite)
    T = drive.rotor_period
    w = 2 * np.pi / T
    phases = sample_phases(samples_per_period)
    oa, ob = geo.offsets(phases, drive)
    nu_n = proton_larmor_hz(drive.B0)
    events = []

    def add(kind, spins, f, coupling_fn):
        for t, rate in zip(*find_crossings(f, T)):
            c = float(coupling_fn(np.array([w * t]))[0])
            events.append(RotorEvent(float(t), kind, spins, float(rate), c,
                                     passage_probability(c, rate, kind)))

    if drive.uw_nutation > 0:
        nut = lambda ph: np.full(len(ph), drive.uw_nutation)
        add(UW, (0,), oa, nut)
        add(UW, (1,), ob, nut)
    delta = oa - ob
    add(DJ, (0, 1), delta, geo.dj_coupling)
    if spec.A_hf != 0:
        ce = lambda ph: geo.ce_coupling(ph, nu_n)
        add(CE, (0, 1, 2), delta - nu_n, ce)  # nu_a - nu_b = +nu_n: a is higher
        add(CE, (1, 0, 2), delta + nu_n, ce)
    events.sort(key=lambda e: (e.time, e.kind, e.spins))
    return events


def apply_event_values(P, kind, i, j, k, p):
    """In-place update of the polarization array ``P`` for one passage."""
    if kind == UW:
        P[i] *= 1 - p
    elif kind == DJ:
        pi, pj = P[i], P[j]
        P[i] = (1 - p) * pi + p * pj
        P[j] = (1 - p) * pj + p * pi
    else:
        # linearized exchange of |L_h U_l U_n> and |U_h L_l L_n> populations;
        # conserves P_h + P_l and P_h + P_n
        d = 0.5 * p * (P[i] - P[j] - P[k])
        lo = max(P[i] - 1.0, -1.0 - P[j], -1.0 - P[k])
        hi = min(P[i] + 1.0, 1.0 - P[j], 1.0 - P[k])
        d = min(max(d, lo), hi)
        P[i] -= d
        P[j] += d
        P[k] += d
    return P


def ce_invariants(P_h, P_l, P_n):
    return P_h + P_l, P_h + P_n
