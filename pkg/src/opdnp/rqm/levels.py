"""Excited-state D1/Q1 level structure and ZFS coupling elements."""

from dataclasses import dataclass
import warnings

import numpy as np

from ..spincore import spin_operators, embed, zfs_lab_coefficients
from ..units import C_CM
from .params import Q_LEVELS, D1_LEVELS, M_VALUE


class LabelingWarning(UserWarning):
    """Eigenstates could not be separated by energy; labels taken from <S^2>."""


@dataclass(frozen=True)
class DqLevelScheme:
    E_B: float
    J_CR: float
    energies: dict
    deltaE: dict

    def gap(self, q, d):
        return self.deltaE[(q, d)]


def level_scheme(J_CR, field_frequency, light_speed=C_CM):
    """Zeeman + exchange energies (cm^-1) of the quartet and trip-doublet sublevels.

    With H = E_B (Sz_C + Sz_R) - 2 J S_C.S_R the quartet sits at -J + m E_B and the
    doublet at 2J + n E_B, so Delta E(Q^m, D1^n) = -3J + (m - n) E_B.  For J < 0 this is
    the 3|J| +/- {0,1,2} E_B ladder, vanishing for (Q-3/2, D1+1/2) at J = -2 E_B / 3.
    ``light_speed`` (cm/s) converts the field frequency to cm^-1.
    """
    if field_frequency <= 0:
        raise ValueError("field_frequency must be positive")
    E_B = field_frequency / light_speed
    energies = {q: -J_CR + M_VALUE[q] * E_B for q in Q_LEVELS}
    energies.update({d: 2 * J_CR + M_VALUE[d] * E_B for d in D1_LEVELS})
    deltaE = {(q, d): energies[q] - energies[d] for q in Q_LEVELS for d in D1_LEVELS}
    return DqLevelScheme(E_B, J_CR, energies, deltaE)


def _excited_state_operators():
    trip, doub = spin_operators(3), spin_operators(2)
    dims = [3, 2]
    ops = {}
    for name in ("Sx", "Sy", "Sz", "Splus", "Sminus"):
        ops[name + "_C"] = embed(getattr(trip, name), 0, dims)
        ops[name + "_R"] = embed(getattr(doub, name), 1, dims)
    Stot = [ops[f"S{a}_C"] + ops[f"S{a}_R"] for a in "xyz"]
    ops["S2"] = sum(S @ S for S in Stot)
    ops["Sz"] = Stot[2]
    Sz, Sp, Sm = trip.Sz, trip.Splus, trip.Sminus
    ops["zfs0"] = embed(3 * Sz @ Sz - 2 * np.eye(3), 0, dims)
    ops["zfs+1"] = embed(Sp @ Sz + Sz @ Sp, 0, dims)
    ops["zfs-1"] = embed(Sm @ Sz + Sz @ Sm, 0, dims)
    ops["zfs+2"] = embed(Sm @ Sm, 0, dims)
    ops["zfs-2"] = embed(Sp @ Sp, 0, dims)
    return ops


_OPS = _excited_state_operators()


def zeeman_exchange_hamiltonian(J_CR, E_B):
    o = _OPS
    SdotS = (o["Sz_C"] @ o["Sz_R"]
             + 0.5 * (o["Splus_C"] @ o["Sminus_R"] + o["Sminus_C"] @ o["Splus_R"]))
    return E_B * (o["Sz_C"] + o["Sz_R"]) - 2 * J_CR * SdotS


@dataclass(frozen=True)
class ExcitedEigenbasis:
    vectors: np.ndarray  # columns are eigenstates
    energies: np.ndarray
    labels: tuple
    s2: np.ndarray
    diagnostics: tuple


def excited_eigenbasis(J_CR, field_frequency, degeneracy_tol=1e-9, light_speed=C_CM):
    """Diagonalize Zeeman + exchange block-by-block in total M and label Q/D states."""
    E_B = field_frequency / light_speed
    H0 = zeeman_exchange_hamiltonian(J_CR, E_B)
    S2, Sz = _OPS["S2"], _OPS["Sz"]
    mtot = np.real(np.diag(Sz))
    vecs = np.zeros((6, 6), dtype=complex)
    energies = np.zeros(6)
    diagnostics = []
    col = 0
    for M in (1.5, 0.5, -0.5, -1.5):
        idx = np.flatnonzero(np.isclose(mtot, M))
        block = H0[np.ix_(idx, idx)]
        w, v = np.linalg.eigh(block)
        if len(w) > 1 and np.min(np.diff(w)) < degeneracy_tol * max(1.0, np.max(np.abs(w))):
            diagnostics.append(f"degenerate Zeeman-exchange levels in M={M:+.1f} block; "
                               "labels from total-spin eigenstates")
            _, v = np.linalg.eigh(S2[np.ix_(idx, idx)])
            w = np.real(np.einsum("ij,jk,ki->i", v.conj().T, block, v))
        for k in range(len(w)):
            vecs[idx, col] = v[:, k]
            energies[col] = w[k]
            col += 1
    s2 = np.real(np.einsum("ji,jk,ki->i", vecs.conj(), S2, vecs))
    mz = np.real(np.einsum("ji,jk,ki->i", vecs.conj(), Sz, vecs))
    labels = []
    for s, m in zip(s2, mz):
        kind = "Q" if abs(s - 3.75) < abs(s - 0.75) else "D1"
        sign = "+" if m > 0 else "-"
        num = round(abs(m) * 2)
        labels.append(f"{kind}{sign}{num}/2")
    if sorted(labels) != sorted(Q_LEVELS + D1_LEVELS):
        raise RuntimeError(f"could not label excited states unambiguously: {labels}")
    for d in diagnostics:
        warnings.warn(d, LabelingWarning, stacklevel=3)
    return ExcitedEigenbasis(vecs, energies, tuple(labels), s2, tuple(diagnostics))


def _zfs_elements_complex(basis, D_zfs, E_zfs, orientations):
    """Complex <Q|H_ZFS|D1> for every orientation; array (n_orient, 4, 2)."""
    V = basis.vectors
    pos = {lab: i for i, lab in enumerate(basis.labels)}
    qi = [pos[q] for q in Q_LEVELS]
    di = [pos[d] for d in D1_LEVELS]
    proj = {}
    for key in ("zfs0", "zfs+1", "zfs-1", "zfs+2", "zfs-2"):
        B = V.conj().T @ _OPS[key] @ V
        proj[key] = B[np.ix_(qi, di)]
    out = np.zeros((len(orientations), 4, 2), dtype=complex)
    for k, o in enumerate(orientations):
        c = zfs_lab_coefficients(D_zfs, E_zfs, o.theta, o.phi)
        out[k] = (c.D0 * proj["zfs0"] + c.Dp1 * proj["zfs+1"] + c.Dm1 * proj["zfs-1"]
                  + c.Dp2 * proj["zfs+2"] + c.Dm2 * proj["zfs-2"])
    return out


def zfs_matrix_elements(D_zfs, E_zfs, J_CR, field_frequency, orientation,
                        average="mean-square", light_speed=C_CM):
    """Squared ZFS coupling |<Q^m|H_ZFS|D1^n>|^2 (cm^-2) between labelled eigenstates.

    ``orientation`` is one Orientation or a weighted list of them.  For a list the
    result is averaged: ``"mean-square"`` averages the squared magnitude,
    ``"square-of-mean"`` squares the averaged element.  Hyperfine terms are omitted.
    """
    grid = [orientation] if not isinstance(orientation, (list, tuple)) else list(orientation)
    basis = excited_eigenbasis(J_CR, field_frequency, light_speed=light_speed)
    elems = _zfs_elements_complex(basis, D_zfs, E_zfs, grid)
    w = np.array([o.weight for o in grid], dtype=float)
    w = w / w.sum()
    if average == "mean-square":
        sq = np.einsum("k,kij->ij", w, np.abs(elems) ** 2)
    elif average == "square-of-mean":
        sq = np.abs(np.einsum("k,kij->ij", w, elems)) ** 2
    else:
        raise ValueError(f"unknown averaging convention {average!r}")
    return {(q, d): float(sq[i, j]) for i, q in enumerate(Q_LEVELS)
            for j, d in enumerate(D1_LEVELS)}


def all_pair_zfs_norm(D_zfs, E_zfs, J_CR, field_frequency, orientation):
    """Sum over all eigenstate pairs of |<i|H_ZFS|j>|^2 (equals trace(H_ZFS^2))."""
    basis = excited_eigenbasis(J_CR, field_frequency)
    c = zfs_lab_coefficients(D_zfs, E_zfs, orientation.theta, orientation.phi)
    H = (c.D0 * _OPS["zfs0"] + c.Dp1 * _OPS["zfs+1"] + c.Dm1 * _OPS["zfs-1"]
         + c.Dp2 * _OPS["zfs+2"] + c.Dm2 * _OPS["zfs-2"])
    Hb = basis.vectors.conj().T @ H @ basis.vectors
    return float(np.sum(np.abs(Hb) ** 2)), float(np.real(np.trace(H @ H)))
