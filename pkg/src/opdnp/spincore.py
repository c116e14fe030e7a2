"""Spin algebra and geometry kernel.

Spin operators in the |S, m> basis ordered m = S, S-1, ..., -S; tensor-product
embedding; lab-frame zero-field-splitting coefficients; powder grids; Boltzmann
polarization.  All rotations are active ZYZ.
"""

from dataclasses import dataclass
from functools import reduce
import math

import numpy as np
from scipy.spatial.transform import Rotation

from .units import H, KB


@dataclass(frozen=True)
class SpinOperatorSet:
    multiplicity: int
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray
    Splus: np.ndarray
    Sminus: np.ndarray

    @property
    def S(self):
        return (self.multiplicity - 1) / 2

    @property
    def identity(self):
        return np.eye(self.multiplicity, dtype=complex)


@dataclass(frozen=True)
class EulerAngles:
    alpha: float
    beta: float
    gamma: float

    @classmethod
    def from_degrees(cls, alpha, beta, gamma):
        return cls(*np.radians([alpha, beta, gamma]))

    def matrix(self):
        """Active rotation matrix Rz(alpha) Ry(beta) Rz(gamma)."""
        return euler_matrix(self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class Orientation:
    theta: float
    phi: float
    weight: float


@dataclass(frozen=True)
class ZfsLabCoefficients:
    D0: float
    Dp1: complex
    Dm1: complex
    Dp2: complex
    Dm2: complex


def spin_operators(multiplicity):
    if int(multiplicity) != multiplicity or multiplicity < 2:
        raise ValueError(f"multiplicity must be an integer >= 2, got {multiplicity}")
    n = int(multiplicity)
    S = (n - 1) / 2
    m = S - np.arange(n)
    # <m+1|S+|m> = sqrt(S(S+1) - m(m+1))
    up = np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1))
    Sp = np.diag(up, k=1).astype(complex)
    Sm = Sp.conj().T
    Sx = (Sp + Sm) / 2
    Sy = (Sp - Sm) / 2j
    Sz = np.diag(m).astype(complex)
    return SpinOperatorSet(n, Sx, Sy, Sz, Sp, Sm)


def embed(op, slot, dims):
    """Return I x ... x op x ... x I with ``op`` acting on ``dims[slot]``."""
    dims = list(dims)
    op = np.asarray(op)
    if not 0 <= slot < len(dims):
        raise ValueError(f"slot {slot} out of range for {len(dims)} spins")
    if op.shape != (dims[slot], dims[slot]):
        raise ValueError(f"operator shape {op.shape} does not match dimension {dims[slot]}")
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[slot] = op.astype(complex)
    return reduce(np.kron, factors)


def zfs_lab_coefficients(D, E, theta, phi):
    """Lab-frame ZFS coefficients for a tensor frame at polar angle ``theta``.

    ``phi`` rotates the tensor about its own z axis; the result is S.D.S for the tensor
    rotated by Rz(pi) Ry(theta) Rz(phi).  The imaginary part of D+-1 carries the sign
    that keeps the spectrum orientation independent when E != 0.  Linear in (D, E), so
    any consistent energy unit works.
    """
    s, c = math.sin(theta), math.cos(theta)
    c2p, s2p = math.cos(2 * phi), math.sin(2 * phi)
    D0 = D / 6 * (3 * c * c - 1) + E / 2 * s * s * c2p
    re1 = 0.25 * math.sin(2 * theta) * (-D + E * c2p)
    im1 = -E / 2 * s * s2p
    re2 = 0.25 * (D * s * s + E * c2p * (1 + c * c))
    im2 = E / 2 * c * s2p
    return ZfsLabCoefficients(D0, complex(re1, im1), complex(re1, -im1),
                              complex(re2, im2), complex(re2, -im2))


def build_zfs_hamiltonian(coeffs, ops):
    if ops.multiplicity != 3:
        raise ValueError("ZFS Hamiltonian requires the triplet (multiplicity 3) operator set")
    Sz, Sp, Sm = ops.Sz, ops.Splus, ops.Sminus
    S = ops.S
    Hm = coeffs.D0 * (3 * Sz @ Sz - S * (S + 1) * ops.identity)
    Hm = Hm + coeffs.Dp1 * (Sp @ Sz + Sz @ Sp) + coeffs.Dm1 * (Sm @ Sz + Sz @ Sm)
    Hm = Hm + coeffs.Dp2 * (Sm @ Sm) + coeffs.Dm2 * (Sp @ Sp)
    return Hm


def euler_matrix(alpha, beta, gamma):
    return Rotation.from_euler("ZYZ", [alpha, beta, gamma]).as_matrix()


def rotate_tensor(tensor, rot):
    return rot @ tensor @ rot.T


GOLDEN_ANGLE = math.pi * (3 - math.sqrt(5))


def powder_grid(scheme="golden-spiral", n=1000, seed=0, path=None):
    """Orientation grid on the unit sphere with weights summing to one.

    ``golden-spiral`` is deterministic and ignores ``seed``; ``uniform-random`` draws
    isotropic directions from ``numpy.random.default_rng(seed)``; ``repulsion-file``
    reads ``theta phi [weight]`` rows (radians) from ``path``.
    """
    if n < 1:
        raise ValueError("powder grid needs n >= 1")
    if scheme == "golden-spiral":
        k = np.arange(n) + 0.5
        cos_t = 1 - 2 * k / n
        theta = np.arccos(cos_t)
        phi = np.mod(k * GOLDEN_ANGLE, 2 * np.pi)
        weight = np.full(n, 1.0 / n)
    elif scheme == "uniform-random":
        rng = np.random.default_rng(seed)
        theta = np.arccos(rng.uniform(-1, 1, n))
        phi = rng.uniform(0, 2 * np.pi, n)
        weight = np.full(n, 1.0 / n)
    elif scheme == "repulsion-file":
        if path is None:
            raise ValueError("repulsion-file scheme needs a path")
        data = np.atleast_2d(np.loadtxt(path))
        theta, phi = data[:, 0], data[:, 1]
        weight = data[:, 2] if data.shape[1] > 2 else np.ones(len(theta))
        weight = weight / weight.sum()
    else:
        raise ValueError(f"unknown powder scheme {scheme!r}")
    if n == 1 and scheme != "repulsion-file":
        theta, phi = np.array([0.0]), np.array([0.0])
    return [Orientation(float(t), float(p), float(w)) for t, p, w in zip(theta, phi, weight)]


def thermal_polarization(frequency, temperature):
    """Boltzmann polarization tanh(h nu / 2 k T) of a spin-1/2 at frequency ``nu`` (Hz)."""
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature <= 0):
        raise ValueError("temperature must be positive")
    out = np.tanh(H * np.asarray(frequency, dtype=float) / (2 * KB * temperature))
    return float(out) if out.ndim == 0 else out
