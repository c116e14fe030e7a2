"""Polarization propagation through rotor periods until a periodic steady state.

The state is one longitudinal polarization per spin (electrons and protons).  Coherences
are not carried: each anti-crossing is a Landau-Zener passage that mixes polarizations,
and T2e only bounds the relaxation sub-step.  Polarizations are thermal-positive
(P_eq = tanh(h nu / 2kT) > 0 for every spin).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from numba import njit

from ..spincore import thermal_polarization
from ..units import proton_larmor_hz
from .events import (DJ, UnitGeometry, detect_rotor_events, find_crossings,
                     field_direction, passage_probability, sample_phases,
                     apply_event_values, RotorEvent)


@dataclass(frozen=True)
class PolarizationState:
    t: float
    P_e: np.ndarray
    P_n: np.ndarray

    def __post_init__(self):
        for lab in ("P_e", "P_n"):
            v = np.array(getattr(self, lab), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{lab} must be finite")
            if np.any(np.abs(v) > 1 + 1e-12):
                raise ValueError(f"{lab} must lie in [-1, 1]")
            v.setflags(write=False)
            object.__setattr__(self, lab, v)

    def vector(self):
        return np.concatenate([self.P_e, self.P_n])

    @classmethod
    def from_vector(cls, t, P, n_electrons):
        return cls(t, P[:n_electrons].copy(), P[n_electrons:].copy())


@dataclass
class SimDiagnostics:
    converged: bool
    periods: int
    history: np.ndarray
    max_dP: np.ndarray  # per unit, max |P_a - P_b| over the final period
    event_counts: dict
    n_events: int
    notes: list = field(default_factory=list)

    def bound_satisfied(self, P_n, floor=0.0):
        """Steady-state |P_n| <= max(max-over-period |P_a - P_b|, floor), unit by unit.

        With finite T1n the protons also relax toward P_n^eq, so pass
        ``floor=|P_n^eq|`` to bound runs where the electron difference is tiny.
        """
        return np.abs(P_n) <= np.maximum(self.max_dP, abs(floor)) + 1e-12


def nuclear_equilibrium(drive):
    return thermal_polarization(proton_larmor_hz(drive.B0), drive.temperature)


def epsilon_B(P_n, drive):
    """Polarization gain P_n / P_n^eq."""
    eq = nuclear_equilibrium(drive)
    if eq == 0:
        raise ValueError("thermal proton polarization is zero")
    return np.asarray(P_n) / eq if np.ndim(P_n) else float(P_n) / eq


def _pump_settings(relax, drive, pumping):
    if pumping is not None:
        return pumping.l_Tz0, pumping.T1_eff
    if drive.optical_target is not None:
        return drive.optical_target, relax.T1e_a_eff
    return None, None


def _spin_rates(n_units, relax, drive, pumping):
    """Per-spin 1/T1 and the optical target of pumped electrons (NaN = thermal)."""
    target, T1p = _pump_settings(relax, drive, pumping)
    rates = np.empty(3 * n_units)
    pump = np.full(3 * n_units, np.nan)
    for u in range(n_units):
        for k, lab in enumerate("ab"):
            i = 2 * u + k
            if relax.pumped == lab:
                rates[i] = 1.0 / (T1p if target is not None else relax.T1e_a_eff)
                if target is not None:
                    pump[i] = target
            else:
                rates[i] = 1.0 / relax.T1e_b
    rates[2 * n_units:] = 1.0 / relax.T1n
    return rates, pump


def relax_step(state, dt, relax, drive, pumping=None, electron_frequencies=None):
    """Exact exponential relaxation over ``dt`` toward piecewise-constant targets.

    Electrons ``2u`` / ``2u + 1`` are a / b of unit u.  Thermal electron targets use
    ``electron_frequencies`` (Hz, one per electron), defaulting to the microwave
    frequency.  The pumped electron relaxes to the optical target.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_e = len(state.P_e)
    if n_e % 2 or len(state.P_n) != n_e // 2:
        raise ValueError("state must hold two electrons and one proton per unit")
    n_u = n_e // 2
    rates, pump = _spin_rates(n_u, relax, drive, pumping)
    freqs = (np.full(n_e, drive.uw_frequency) if electron_frequencies is None
             else np.asarray(electron_frequencies, dtype=float))
    target = np.empty(3 * n_u)
    target[:n_e] = thermal_polarization(freqs, drive.temperature)
    target[n_e:] = nuclear_equilibrium(drive)
    target = np.where(np.isnan(pump), target, pump)
    P = state.vector()
    decay = np.exp(-dt * rates)
    P = target + (P - target) * decay
    return PolarizationState.from_vector(state.t + dt, P, n_e)


def apply_event(state, event):
    """Apply one passage; ``event.spins`` index the combined (electrons, protons) vector."""
    P = state.vector()
    s = event.spins
    apply_event_values(P, event.kind, s[0], s[1] if len(s) > 1 else -1,
                       s[2] if len(s) > 2 else -1, event.probability)
    return PolarizationState.from_vector(state.t, P, len(state.P_e))


# ----------------------------------------------------------------------------- box

@dataclass
class PeriodSchedule:
    """Everything the period loop needs, precomputed for one box and drive."""

    events: list
    n_sub: int
    sub_dt: float
    targets: np.ndarray  # (n_sub, n_spins)
    rates: np.ndarray
    electron_freq: np.ndarray  # (n_sub, n_electrons), Hz at sub-step midpoints


def box_events(box, drive, samples_per_period=2048):
    """Intra-unit events (global indices) plus inter-unit D/J crossings."""
    n = box.n_units
    T = drive.rotor_period
    w = 2 * np.pi / T
    phases = sample_phases(samples_per_period)
    geos = [UnitGeometry(u.spec, u.crystallite) for u in box.units]
    offs = np.empty((2 * n, samples_per_period))
    events = []
    for u, (unit, geo) in enumerate(zip(box.units, geos)):
        oa, ob = geo.offsets(phases, drive)
        offs[2 * u], offs[2 * u + 1] = oa, ob
        gmap = (2 * u, 2 * u + 1, 2 * n + u)
        for ev in detect_rotor_events(unit.spec, unit.crystallite, drive,
                                      samples_per_period, geometry=geo):
            events.append(RotorEvent(ev.time, ev.kind, tuple(gmap[s] for s in ev.spins),
                                     ev.rate, ev.coupling, ev.probability))
    for (i, j), D in box.inter_couplings.items():
        v = box.inter_vectors[(i, j)]
        for t, rate in zip(*find_crossings(offs[i] - offs[j], T)):
            c = float(field_direction(w * t) @ v)
            coupling = abs(D * (1 - 3 * c * c) / 2)
            p = passage_probability(coupling, rate, DJ)
            events.append(RotorEvent(float(t), DJ, (i, j), float(rate), coupling, p))
    events.sort(key=lambda e: (e.time, e.kind, e.spins))
    return events, offs, geos


def build_schedule(box, relax, drive, pumping=None, samples_per_period=2048, n_sub=None):
    T = drive.rotor_period
    if n_sub is None:
        n_sub = max(128, math.ceil(T / relax.T2e))
    sub_dt = T / n_sub
    if sub_dt > relax.T2e * (1 + 1e-12):
        raise ValueError("relaxation sub-step exceeds T2e; increase n_sub")
    events, _, geos = box_events(box, drive, samples_per_period)
    n = box.n_units
    mid = 2 * np.pi * (np.arange(n_sub) + 0.5) / n_sub
    freq = np.empty((n_sub, 2 * n))
    for u, geo in enumerate(geos):
        oa, ob = geo.offsets(mid, drive)
        freq[:, 2 * u] = oa + drive.uw_frequency
        freq[:, 2 * u + 1] = ob + drive.uw_frequency
    rates, pump = _spin_rates(n, relax, drive, pumping)
    targets = np.empty((n_sub, 3 * n))
    targets[:, :2 * n] = thermal_polarization(freq, drive.temperature)
    targets[:, 2 * n:] = nuclear_equilibrium(drive)
    mask = ~np.isnan(pump)
    targets[:, mask] = pump[mask]
    return PeriodSchedule(events, n_sub, sub_dt, targets, rates, freq)


@njit(cache=True)
def _relax(P, tgt, rates, tau):
    for s in range(P.shape[0]):
        P[s] = tgt[s] + (P[s] - tgt[s]) * math.exp(-tau * rates[s])


@njit(cache=True)
def _track(P, n_units, maxd):
    for u in range(n_units):
        d = abs(P[2 * u] - P[2 * u + 1])
        if d > maxd[u]:
            maxd[u] = d


@njit(cache=True)
def _event(P, kind, i, j, k, p):
    if kind == 0:
        P[i] *= 1.0 - p
    elif kind == 1:
        pi = P[i]
        pj = P[j]
        P[i] = (1.0 - p) * pi + p * pj
        P[j] = (1.0 - p) * pj + p * pi
    else:
        d = 0.5 * p * (P[i] - P[j] - P[k])
        lo = max(P[i] - 1.0, max(-1.0 - P[j], -1.0 - P[k]))
        hi = min(P[i] + 1.0, min(1.0 - P[j], 1.0 - P[k]))
        d = min(max(d, lo), hi)
        P[i] -= d
        P[j] += d
        P[k] += d


@njit(cache=True)
def _run_periods(P, n_units, sub_dt, targets, rates, ev_t, ev_kind, ev_i, ev_j, ev_k,
                 ev_p, ev_sub, max_periods, tol, n_consec, floor, history, maxd, debug):
    n_sub = targets.shape[0]
    n_spin = P.shape[0]
    n_ev = ev_t.shape[0]
    decay = np.empty((n_sub, n_spin))
    for s in range(n_sub):
        for q in range(n_spin):
            decay[s, q] = math.exp(-sub_dt * rates[q])
    prev = P[2 * n_units:].copy()
    streak = 0
    for period in range(max_periods):
        for u in range(n_units):
            maxd[u] = 0.0
        _track(P, n_units, maxd)
        e = 0
        for s in range(n_sub):
            t0 = s * sub_dt
            tgt = targets[s]
            if e < n_ev and ev_sub[e] == s:
                tcur = t0
                while e < n_ev and ev_sub[e] == s:
                    _relax(P, tgt, rates, ev_t[e] - tcur)
                    _track(P, n_units, maxd)
                    _event(P, ev_kind[e], ev_i[e], ev_j[e], ev_k[e], ev_p[e])
                    _track(P, n_units, maxd)
                    tcur = ev_t[e]
                    e += 1
                _relax(P, tgt, rates, t0 + sub_dt - tcur)
            else:
                for q in range(n_spin):
                    P[q] = tgt[q] + (P[q] - tgt[q]) * decay[s, q]
            _track(P, n_units, maxd)
            if debug:
                for q in range(n_spin):
                    if abs(P[q]) > 1.0 + 1e-12 or not math.isfinite(P[q]):
                        return period + 1, -1
        change = 0.0
        for u in range(n_units):
            x = P[2 * n_units + u]
            c = abs(x - prev[u]) / max(abs(x), floor)
            if c > change:
                change = c
            prev[u] = x
        history[period] = change
        if change < tol:
            streak += 1
            if streak >= n_consec:
                return period + 1, 1
        else:
            streak = 0
    return max_periods, 0


def thermal_state(box, drive):
    """Electrons at their rotor-phase-zero Boltzmann values, protons at equilibrium."""
    P_e = []
    for unit in box.units:
        geo = UnitGeometry(unit.spec, unit.crystallite)
        oa, ob = geo.offsets(np.array([0.0]), drive)
        P_e += [thermal_polarization(oa[0] + drive.uw_frequency, drive.temperature),
                thermal_polarization(ob[0] + drive.uw_frequency, drive.temperature)]
    P_n = np.full(box.n_units, nuclear_equilibrium(drive))
    return PolarizationState(0.0, np.array(P_e), P_n)


def simulate_to_steady_state(box, relax, drive, pumping=None, max_rotor_periods=200000,
                             convergence_tol=1e-6, samples_per_period=2048, n_sub=None,
                             n_consecutive=10, initial=None, debug=False, schedule=None):
    """Propagate whole rotor periods until every proton polarization is periodic.

    Converged when the largest relative period-to-period change of any P_n (relative
    to max(|P_n|, P_n^eq)) stays below ``convergence_tol`` for ``n_consecutive``
    periods.  The returned state is at the start of a rotor period.
    """
    if max_rotor_periods < 1 or convergence_tol <= 0:
        raise ValueError("max_rotor_periods and convergence_tol must be positive")
    sched = schedule or build_schedule(box, relax, drive, pumping, samples_per_period, n_sub)
    n = box.n_units
    state = initial or thermal_state(box, drive)
    P = state.vector().copy()
    ev = sched.events
    ev_t = np.array([e.time for e in ev], dtype=float)
    ev_kind = np.array([e.kind for e in ev], dtype=np.int64)
    ev_i = np.array([e.spins[0] for e in ev], dtype=np.int64)
    ev_j = np.array([e.spins[1] if len(e.spins) > 1 else -1 for e in ev], dtype=np.int64)
    ev_k = np.array([e.spins[2] if len(e.spins) > 2 else -1 for e in ev], dtype=np.int64)
    ev_p = np.array([e.probability for e in ev], dtype=float)
    ev_sub = np.minimum((ev_t / sched.sub_dt).astype(np.int64), sched.n_sub - 1)
    history = np.zeros(max_rotor_periods)
    maxd = np.zeros(n)
    floor = nuclear_equilibrium(drive)
    periods, flag = _run_periods(P, n, sched.sub_dt, sched.targets, sched.rates, ev_t,
                                 ev_kind, ev_i, ev_j, ev_k, ev_p, ev_sub,
                                 int(max_rotor_periods), float(convergence_tol),
                                 int(n_consecutive), floor, history, maxd, bool(debug))
    if flag < 0:
        raise FloatingPointError(f"polarization left [-1, 1] in period {periods}")
    counts = {"uw": 0, "dj": 0, "ce": 0}
    for e in ev:
        counts[e.kind_name] += 1
    out = PolarizationState.from_vector(periods * drive.rotor_period, P, 2 * n)
    diag = SimDiagnostics(bool(flag == 1), int(periods), history[:periods], maxd.copy(),
                          counts, len(ev),
                          ["CE passages conserve P_h + P_l and P_h + P_n"])
    return out, diag
