"""Reduction of the triplet-nitroxide optical pumping model to one target and one rate."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PumpingReduction:
    l_Tz0: float
    T1_eff: float
    steady_state: tuple = ()  # (triplet, nitroxide) polarizations of the 2-spin model

    def __post_init__(self):
        if abs(self.l_Tz0) > 1:
            raise ValueError("|l*Tz0| must not exceed 1")
        if not self.T1_eff > 0:
            raise ValueError("T1_eff must be positive")


def pumping_generator(Tz0, T1_T, r, T1e_NO, p_eq=0.0):
    """Affine generator on (1, <Tz>, <S_z,a>).

    The triplet is pumped toward Tz0 at 1/T1_T, the nitroxide relaxes toward ``p_eq`` at
    1/T1e_NO, and the two exchange polarization at rate r.  The nitroxide diagonal is
    -(1/T1e_NO + r) so that the nitroxide relaxes rather than grows.
    """
    a, b = 1.0 / T1_T, 1.0 / T1e_NO
    return np.array([
        [0.0, 0.0, 0.0],
        [Tz0 * a, -a - r, r],
        [p_eq * b, r, -b - r],
    ])


def pumping_reduction(Tz0, T1_T, r, T1e_NO, p_eq=0.0):
    """Steady nitroxide polarization l*Tz0 and the slowest relaxation time T1_eff."""
    if not (T1_T > 0 and T1e_NO > 0):
        raise ValueError("T1_T and T1e_NO must be positive")
    if r < 0:
        raise ValueError("r must be >= 0")
    G = pumping_generator(Tz0, T1_T, r, T1e_NO, p_eq)
    A, c = G[1:, 1:], G[1:, 0]
    ss = np.linalg.solve(A, -c)
    rates = np.linalg.eigvals(A).real
    T1_eff = -1.0 / rates.max()
    target = float(np.clip(ss[1], -1.0, 1.0))
    return PumpingReduction(target, float(T1_eff), (float(ss[0]), float(ss[1])))
