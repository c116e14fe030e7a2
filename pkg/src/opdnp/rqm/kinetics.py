"""Eight-level population kinetics after photoexcitation."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm

from ..units import H, KB
from .params import STATE_LABELS, M_VALUE, RQM_PAIRS

IDX = {lab: i for i, lab in enumerate(STATE_LABELS)}

# intra-quartet relaxation pairs (upper, lower); no direct +3/2 <-> -3/2 link
Q_RELAX_PAIRS = (
    ("Q+3/2", "Q+1/2"), ("Q+3/2", "Q-1/2"), ("Q+1/2", "Q-1/2"),
    ("Q+1/2", "Q-3/2"), ("Q-1/2", "Q-3/2"),
)


class SolverInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class KineticState:
    t: float
    populations: np.ndarray

    def __post_init__(self):
        pops = np.array(self.populations, dtype=float)
        if pops.shape != (8,):
            raise ValueError("a kinetic state has 8 populations")
        pops.setflags(write=False)
        object.__setattr__(self, "populations", pops)

    @property
    def total(self):
        return float(self.populations.sum())


def _boltzmann(delta_m, params):
    """exp(-dE/kT) for a Zeeman gap of ``delta_m`` quanta at the EPR frequency."""
    dE = abs(delta_m) * params.field_frequency  # Hz
    return math.exp(-H * dE / (KB * params.temperature))


def _link(M, src, dst, rate):
    """Add an irreversible first-order flow src -> dst."""
    if rate == 0:
        return
    i, j = IDX[src], IDX[dst]
    M[j, i] += rate
    M[i, i] -= rate


def build_kinetic_generator(params, table):
    """Generator M of dp/dt = M p; every column sums to zero.

    Relaxation within Q1, D1 and D0 uses the quoted rate for the downhill (lower m)
    direction and the Boltzmann-weighted rate uphill.  Quenching carries D1^n to D0^n and
    the intrinsic Q1 decay feeds both D0 sublevels equally.
    """
    M = np.zeros((8, 8))
    for q, d in RQM_PAIRS:
        _link(M, d, q, table.k_dq[(q, d)])
        _link(M, q, d, table.k_qd[(q, d)])
    for hi, lo in Q_RELAX_PAIRS:
        up = _boltzmann(M_VALUE[hi] - M_VALUE[lo], params)
        _link(M, hi, lo, params.W_Q1)
        _link(M, lo, hi, params.W_Q1 * up)
    up = _boltzmann(1, params)
    _link(M, "D1+1/2", "D1-1/2", params.W_D1)
    _link(M, "D1-1/2", "D1+1/2", params.W_D1 * up)
    _link(M, "D0+1/2", "D0-1/2", params.W_D0)
    _link(M, "D0-1/2", "D0+1/2", params.W_D0 * up)
    for n in ("+1/2", "-1/2"):
        _link(M, "D1" + n, "D0" + n, params.k_qt)
    for q in ("Q+3/2", "Q+1/2", "Q-1/2", "Q-3/2"):
        _link(M, q, "D0+1/2", params.k_Q0 / 2)
        _link(M, q, "D0-1/2", params.k_Q0 / 2)
    if not np.all(np.isfinite(M)):
        raise ValueError("generator has non-finite entries (diverging RQM rate?)")
    return M


def rk4_step_matrix(M, h):
    """One classical RK4 step for the linear system, as a matrix acting on p."""
    I = np.eye(M.shape[0])
    k1 = M @ I
    k2 = M @ (I + h / 2 * k1)
    k3 = M @ (I + h / 2 * k2)
    k4 = M @ (I + h * k3)
    return I + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step_size(M, safety=0.05):
    scale = np.max(np.abs(np.diag(M))) if M.size else 0.0
    return math.inf if scale == 0 else safety / scale


def _conserving(P):
    """Restore unit column sums lost to roundoff.

    Both propagators conserve total population exactly (every column of M sums to
    zero); repeated squaring over ~1e8 stiff steps can lose that at the 1e-9 level.
    """
    P = P.copy()
    P[np.diag_indices_from(P)] += 1.0 - P.sum(axis=0)
    return P


def evolve_kinetics(M, initial, times, method="matrix-exponential", neg_tol=1e-9):
    """Populations at each entry of ``times`` (ascending, >= initial.t).

    ``rk4-fixed-step`` uses h <= 0.05 / max|M_ii|, shortened so each output time is hit
    exactly.  Because the system is linear and autonomous the RK4 update is a fixed
    matrix, which is applied by repeated squaring between outputs.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < initial.t):
        raise ValueError("times must be ascending and not precede the initial state")
    M = np.asarray(M, dtype=float)
    p = initial.populations.copy()
    total = max(abs(initial.total), 1e-300)
    out, t = [], initial.t
    hmax = rk4_step_size(M)
    for tk in times:
        dt = tk - t
        if dt > 0:
            if method == "matrix-exponential":
                p = _conserving(expm(M * dt)) @ p
            elif method == "rk4-fixed-step":
                n = max(1, math.ceil(dt / hmax)) if math.isfinite(hmax) else 1
                step = rk4_step_matrix(M, dt / n)
                p = _conserving(np.linalg.matrix_power(step, n)) @ p
            else:
                raise ValueError(f"unknown method {method!r}")
        if p.min() < -neg_tol * total:
            raise SolverInstabilityError(
                f"population {p.min():.3e} < 0 at t={tk:.3e} s; reduce the step size")
        out.append(KineticState(float(tk), p))
        t = tk
    return out


def d0_polarization_trace(states, irf_time, P_eq):
    """Normalized D0 spin polarization, referenced to zero before the pulse.

    The D0 difference is divided by the equilibrium difference -P_eq * N_total, where
    N_total is the total population (all of it ends in D0).  One is subtracted and the
    result passed through a causal exponential response of time constant ``irf_time``.
    """
    if P_eq == 0:
        raise ValueError("P_eq must be nonzero")
    t = np.array([s.t for s in states])
    if np.any(np.diff(t) < 0):
        raise ValueError("states must be time-ordered")
    diff = np.array([s.populations[IDX["D0+1/2"]] - s.populations[IDX["D0-1/2"]]
                     for s in states])
    total = np.array([s.total for s in states])
    x = diff / (-P_eq * total) - 1.0
    if irf_time <= 0:
        return t, x
    y = np.empty_like(x)
    acc = 0.0
    prev = t[0] if len(t) else 0.0
    for k in range(len(x)):
        a = math.exp(-(t[k] - prev) / irf_time)
        acc = a * acc + (1 - a) * x[k]
        y[k] = acc
        prev = t[k]
    return t, y


def equilibrium_initial_state(params, total=1.0):
    """All population in D0 at its Boltzmann distribution."""
    up = _boltzmann(1, params)
    pops = np.zeros(8)
    pops[IDX["D0+1/2"]] = total * up / (1 + up)
    pops[IDX["D0-1/2"]] = total / (1 + up)
    return KineticState(0.0, pops)


def d0_equilibrium_polarization(params):
    return math.tanh(H * params.field_frequency / (2 * KB * params.temperature))
