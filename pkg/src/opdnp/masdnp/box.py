"""Ensembles of interacting units in a periodic box."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial.transform import Rotation

from ..spincore import EulerAngles
from ..units import AVOGADRO, DIPOLAR_EE_HZ_NM3
from .events import polar_vector

COUPLING_CUTOFF = 1e3  # Hz


class PackingError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoxUnit:
    spec: object
    crystallite: EulerAngles
    position: np.ndarray  # nm, rotor frame


@dataclass
class BoxEnsemble:
    """Units, inter-unit electron couplings and geometry.

    Electron ``2u`` is electron a of unit ``u`` and ``2u + 1`` its electron b; proton
    ``u`` sits at index ``2 n_units + u`` of the combined polarization vector.
    ``inter_couplings[(i, j)]`` is the point-dipole constant (Hz) of the closest electron
    pair (i, j) of two units and
    ``inter_vectors[(i, j)]`` the minimum-image unit vector from i to j (rotor frame).
    """

    units: list
    inter_couplings: dict
    inter_vectors: dict
    box_side: float
    seed: int
    electron_positions: np.ndarray = field(default=None, repr=False)

    @property
    def n_units(self):
        return len(self.units)

    @property
    def n_spins(self):
        return 3 * len(self.units)


def box_side_for(n_units, concentration_mM):
    """Cube side (nm) holding ``n_units`` at the given concentration."""
    if concentration_mM <= 0:
        raise ValueError("concentration must be positive")
    per_nm3 = concentration_mM * 1e-3 * AVOGADRO * 1e-24  # mol/L -> 1/nm^3
    return (n_units / per_nm3) ** (1 / 3)


def minimum_image(d, side):
    return d - side * np.round(d / side)


def random_crystallites(n, rng):
    rot = Rotation.random(n, random_state=rng)
    ang = rot.as_euler("ZYZ")
    return [EulerAngles(*map(float, a)) for a in ang]


def build_box(spec, n_units, concentration=10.0, min_distance=4.2, seed=0,
              max_attempts=20000, crystallites=None):
    """Rejection-sample ``n_units`` copies of ``spec`` in a periodic cube.

    Electrons of each unit sit at +/- r/2 along the rotated dipolar axis, r being the
    distance implied by D_ab.  Electrons of different units are kept at least
    ``min_distance`` (nm) apart under minimum image.
    """
    if n_units < 1:
        raise ValueError("n_units must be >= 1")
    side = box_side_for(n_units, concentration)
    rng = np.random.default_rng(seed)
    crys = list(crystallites) if crystallites is not None else random_crystallites(n_units, rng)
    if len(crys) != n_units:
        raise ValueError("need one crystallite per unit")
    half = 0.5 * spec.intra_distance(DIPOLAR_EE_HZ_NM3) if spec.D_ab else 0.0
    half = min(half, side / 2)
    dip = polar_vector(*spec.dipolar_angles)
    units, epos = [], []
    for u in range(n_units):
        axis = crys[u].matrix() @ dip
        for _ in range(max_attempts):
            c = rng.uniform(0, side, 3)
            e = np.array([c + half * axis, c - half * axis])
            if epos:
                prev = np.array(epos).reshape(-1, 3)
                d = minimum_image(e[:, None, :] - prev[None, :, :], side)
                if np.min(np.linalg.norm(d, axis=-1)) < min_distance:
                    continue
            break
        else:
            raise PackingError(
                f"could not place unit {u + 1} of {n_units} with min_distance "
                f"{min_distance} nm in a {side:.2f} nm box after {max_attempts} tries")
        units.append(BoxUnit(spec, crys[u], c))
        epos.append(e)
    epos = np.array(epos).reshape(-1, 3)
    # one point-dipole coupling per pair of units, between their closest electrons
    couplings, vectors = {}, {}
    for u in range(n_units):
        for v in range(u + 1, n_units):
            best = None
            for i in (2 * u, 2 * u + 1):
                for j in (2 * v, 2 * v + 1):
                    d = minimum_image(epos[j] - epos[i], side)
                    r = float(np.linalg.norm(d))
                    if best is None or r < best[0]:
                        best = (r, i, j, d)
            r, i, j, d = best
            D = DIPOLAR_EE_HZ_NM3 / r ** 3
            if D < COUPLING_CUTOFF:
                continue
            couplings[(i, j)] = D
            vectors[(i, j)] = d / r
    return BoxEnsemble(units, couplings, vectors, side, seed, epos)
