"""D1 <-> Q1 mixing rates, selectivity factor and derived polarizations."""

from dataclasses import dataclass
import math
import warnings

from ..units import R_GAS, KB, H, C_CM, hz_to_wavenumber
from .levels import level_scheme, zfs_matrix_elements
from .params import RQM_PAIRS, M_VALUE


class ResonanceWarning(UserWarning):
    """A D1-Q1 gap is exactly zero; the rate constant diverges."""


@dataclass(frozen=True)
class RateTable:
    """Rate constants keyed by (Q level, D1 level), s^-1.

    ``k_dq[(q, d)]`` is the D1 -> Q rate, ``k_qd[(q, d)]`` the Q -> D1 rate.  Only the
    six transitions of the kinetic model are present.
    """

    k_dq: dict
    k_qd: dict
    diagnostics: tuple = ()

    def scaled(self, factor):
        return RateTable({k: v * factor for k, v in self.k_dq.items()},
                         {k: v * factor for k, v in self.k_qd.items()}, self.diagnostics)


def arrhenius_factor(E_a, temperature):
    """exp(-E_a / R T) with E_a in kJ/mol."""
    return math.exp(-E_a * 1e3 / (R_GAS * temperature))


def dq_rate_constants(params, grid, average="mean-square", gap_floor=0.0,
                      microreversibility=False):
    """Powder-averaged RQM rate constants at ``params.temperature``.

    k = k0 exp(-E_a/RT) <|<Q|H_ZFS|D1>|^2> / Delta E^2, energies in cm^-1.
    ``gap_floor`` (cm^-1) replaces |Delta E| below it.  With ``microreversibility`` the
    uphill direction of each pair is multiplied by exp(-|Delta E| / kT).
    """
    if not grid:
        raise ValueError("orientation grid is empty")
    c = params.light_speed
    scheme = level_scheme(params.J_CR, params.field_frequency, light_speed=c)
    elems = zfs_matrix_elements(params.D_zfs, params.E_zfs, params.J_CR,
                                params.field_frequency, list(grid), average=average,
                                light_speed=c)
    pref = params.k0_DQ * arrhenius_factor(params.E_a, params.temperature)
    kT = KB * params.temperature / (H * C_CM)
    k_dq, k_qd, diag = {}, {}, []
    for pair in RQM_PAIRS:
        gap = abs(scheme.deltaE[pair])
        gap = max(gap, gap_floor)
        num = pref * elems[pair]
        if gap == 0.0:
            if num == 0.0:
                k = 0.0
            else:
                k = math.inf
                msg = f"Delta E = 0 for {pair[0]} <-> {pair[1]}: rate diverges"
                diag.append(msg)
                warnings.warn(msg, ResonanceWarning, stacklevel=2)
        else:
            k = num / gap ** 2
        kd = kq = k
        if microreversibility and math.isfinite(k):
            boltz = math.exp(-abs(scheme.deltaE[pair]) / kT)
            if scheme.deltaE[pair] > 0:  # quartet level above the doublet level
                kd = k * boltz
            else:
                kq = k * boltz
        k_dq[pair], k_qd[pair] = kd, kq
    return RateTable(k_dq, k_qd, tuple(diag))


def selectivity_factor(table):
    """R_D1: total feeding rate into D1+1/2 over that into D1-1/2."""
    up = [p for p in RQM_PAIRS if p[1] == "D1+1/2"]
    down = [p for p in RQM_PAIRS if p[1] == "D1-1/2"]
    den = sum(table.k_dq[p] for p in down)
    num = sum(table.k_dq[p] for p in up)
    if den == 0:
        names = ", ".join(f"k({q}->{d})" for q, d in down)
        raise ZeroDivisionError(f"selectivity factor undefined: {names} all vanish")
    if math.isinf(num) and math.isinf(den):
        return math.nan
    return num / den


def rqm_polarization(R_D1):
    if R_D1 < 0:
        raise ValueError("R_D1 must be non-negative")
    if math.isinf(R_D1):
        return -1.0
    return (1 - R_D1) / (1 + R_D1)


def soisc_populations(kx, ky, kz, D_T, B0_frequency):
    """Relative T0, T+1, T-1 populations after spin-orbit ISC.

    ``D_T`` in cm^-1; the Zeeman term is ``B0_frequency`` (Hz) expressed in cm^-1.
    """
    rates = (kx, ky, kz)
    if min(rates) < 0 or sum(rates) == 0:
        raise ValueError("ISC rates must be non-negative and not all zero")
    if B0_frequency == 0:
        raise ValueError("zero field: SO-ISC populations are singular")
    total = kx + ky + kz
    zeeman = hz_to_wavenumber(B0_frequency)
    P0 = total / 3
    shift = 0.4 * D_T / zeeman * total
    return P0, P0 + shift, P0 - shift


def slr_direct_scaling(W_ref, D_ref, T_ref, D_target, T_target):
    """Direct-process spin-lattice rate scaled as D^2 T."""
    if min(W_ref, D_ref, T_ref) <= 0:
        raise ValueError("reference values must be positive")
    if D_target <= 0 or T_target <= 0:
        raise ValueError("target values must be positive")
    return W_ref * (D_target / D_ref) ** 2 * (T_target / T_ref)


def transition_delta_m(pair):
    q, d = pair
    return M_VALUE[q] - M_VALUE[d]
