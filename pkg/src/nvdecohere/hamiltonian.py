"""NV ground-state spin Hamiltonian and its transition frequencies.

Everything is in linear-frequency units: energies in MHz, fields in gauss,
gyromagnetic ratio in MHz/gauss.  The basis is ordered (m_s = +1, 0, -1),
z is the NV symmetry axis and x is the strain axis (so E >= 0).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AmbiguousZeroState

ZERO_INDEX = 1  # position of m_s = 0 in the basis


@dataclass(frozen=True)
class PhysicalConstants:
    gamma_over_2pi: float = 2.8025  # MHz / gauss

    def __post_init__(self):
        if not self.gamma_over_2pi > 0:
            raise ValueError("gamma_over_2pi must be positive")


@dataclass(frozen=True)
class ZfsParams:
    """Zero-field splitting parameters, MHz."""

    d: float = 2870.0
    e: float = 4.85

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be positive")
        if self.e < 0:
            raise ValueError("e must be non-negative (x is the strain axis)")


@dataclass(frozen=True)
class FieldVector:
    """Magnetic field in the NV frame, gauss."""

    bx: float = 0.0
    by: float = 0.0
    bz: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.bx, self.by, self.bz])):
            raise ValueError("field components must be finite")

    @classmethod
    def from_polar(cls, magnitude: float, theta_deg: float, phi_deg: float = 0.0) -> "FieldVector":
        th = np.deg2rad(theta_deg)
        ph = np.deg2rad(phi_deg)
        # exact zeros at the special angles keep limiting-case models usable
        st = 1.0 if theta_deg == 90 else (0.0 if theta_deg == 0 else np.sin(th))
        ct = 0.0 if theta_deg == 90 else (1.0 if theta_deg == 0 else np.cos(th))
        cp = 1.0 if phi_deg == 0 else np.cos(ph)
        sp = 0.0 if phi_deg == 0 else np.sin(ph)
        return cls(magnitude * st * cp, magnitude * st * sp, magnitude * ct)

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz], dtype=float)

    @property
    def magnitude(self) -> float:
        return float(np.sqrt(self.bx**2 + self.by**2 + self.bz**2))

    @property
    def theta(self) -> float:
        """Polar angle from the NV axis, radians."""
        return float(np.arctan2(np.hypot(self.bx, self.by), self.bz))

    def __add__(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.bx + other.bx, self.by + other.by, self.bz + other.bz)


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


@dataclass(frozen=True)
class Eigensystem:
    energies: np.ndarray  # ascending, MHz
    states: np.ndarray  # columns are eigenvectors
    zero_like_index: int


@dataclass(frozen=True)
class PerturbativeTransitions:
    delta_e: float
    e_tilde_plus: complex
    e_tilde_minus: complex
    f_plus: float
    f_minus: float


@lru_cache(maxsize=None)
def _spin1() -> SpinOperators:
    r = 1 / np.sqrt(2)
    sx = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    for m in (sx, sy, sz):
        m.setflags(write=False)
    return SpinOperators(sx, sy, sz)


def spin1_operators() -> SpinOperators:
    """Spin-1 matrices in the (+1, 0, -1) basis."""
    return _spin1()


def build_hamiltonian(
    zfs: ZfsParams, field: FieldVector, consts: PhysicalConstants = PhysicalConstants()
) -> np.ndarray:
    """Ground-state Hamiltonian in MHz for the total field ``field``.

    H = D (Sz^2 - 2/3) + gamma B.S + E (Sx^2 - Sy^2)
    """
    s = spin1_operators()
    g = consts.gamma_over_2pi
    h = zfs.d * (s.sz @ s.sz - (2.0 / 3.0) * np.eye(3))
    h = h + g * (field.bx * s.sx + field.by * s.sy + field.bz * s.sz)
    h = h + zfs.e * (s.sx @ s.sx - s.sy @ s.sy)
    # symmetrize away rounding so the result is Hermitian to machine precision
    return 0.5 * (h + h.conj().T)


def noise_operator(b_mhz) -> np.ndarray:
    """gamma b.S for a noise sample already expressed in MHz."""
    s = spin1_operators()
    bx, by, bz = b_mhz
    return bx * s.sx + by * s.sy + bz * s.sz


def diagonalize(h: np.ndarray) -> Eigensystem:
    energies, states = np.linalg.eigh(h)
    weights = np.abs(states[ZERO_INDEX, :]) ** 2
    idx = int(np.argmax(weights))
    if weights[idx] < 0.5:
        raise AmbiguousZeroState(
            f"largest m_s=0 overlap is {weights[idx]:.3f} < 0.5; |0>-like state undefined"
        )
    return Eigensystem(energies=energies, states=states, zero_like_index=idx)


def exact_transitions(h: np.ndarray) -> tuple[float, float, Eigensystem]:
    """Transition frequencies |0> <-> |-> and |0> <-> |+> by exact diagonalization.

    Returns ``(f_minus, f_plus, eigensystem)`` with ``f_minus <= f_plus``.
    """
    es = diagonalize(h)
    e0 = es.energies[es.zero_like_index]
    others = [abs(es.energies[j] - e0) for j in range(3) if j != es.zero_like_index]
    f_minus, f_plus = sorted(others)
    return float(f_minus), float(f_plus), es


def tracked_index(es: Eigensystem, branch: str) -> int:
    """Eigenvector index of the |+>- or |->-like state for ``branch``."""
    e0 = es.energies[es.zero_like_index]
    cand = [j for j in range(3) if j != es.zero_like_index]
    cand.sort(key=lambda j: abs(es.energies[j] - e0))
    return cand[1] if branch == "plus" else cand[0]


def transition_frequency(d, e, wx, wy, wz, branch: str):
    """Second-order |0> <-> |+/-> frequency from Zeeman frequencies in MHz.

    ``wx, wy, wz`` are gamma*(B + b) per axis in MHz and may be arrays.
    The sign inside the transverse Zeeman square follows ``branch``.
    """
    wx = np.asarray(wx, dtype=float)
    wy = np.asarray(wy, dtype=float)
    wz = np.asarray(wz, dtype=float)
    sign = 1.0 if branch == "plus" else -1.0
    delta_e = (wx * wx + wy * wy) / d
    # |E + (wx +/- i wy)^2 / 2D|, expanded to avoid complex arrays
    re = e + (wx * wx - wy * wy) / (2 * d)
    im = sign * wx * wy / d
    e_tilde_sq = re * re + im * im
    return d + 1.5 * delta_e + sign * np.sqrt(wz * wz + e_tilde_sq)


def perturbative_transitions(
    zfs: ZfsParams,
    b_static: FieldVector,
    b_noise: FieldVector = FieldVector(),
    consts: PhysicalConstants = PhysicalConstants(),
) -> PerturbativeTransitions:
    g = consts.gamma_over_2pi
    total = b_static + b_noise
    wx, wy, wz = g * total.bx, g * total.by, g * total.bz
    delta_e = (wx**2 + wy**2) / zfs.d
    e_plus = zfs.e + complex(wx, wy) ** 2 / (2 * zfs.d)
    e_minus = zfs.e + complex(wx, -wy) ** 2 / (2 * zfs.d)
    f_plus = zfs.d + 1.5 * delta_e + np.sqrt(wz**2 + abs(e_plus) ** 2)
    f_minus = zfs.d + 1.5 * delta_e - np.sqrt(wz**2 + abs(e_minus) ** 2)
    return PerturbativeTransitions(
        delta_e=float(delta_e),
        e_tilde_plus=e_plus,
        e_tilde_minus=e_minus,
        f_plus=float(f_plus),
        f_minus=float(f_minus),
    )


def perturbation_error(
    zfs: ZfsParams, field: FieldVector, consts: PhysicalConstants = PhysicalConstants()
) -> tuple[float, float]:
    """|perturbative - exact| for (f_minus, f_plus) at zero noise, MHz."""
    f_minus, f_plus, _ = exact_transitions(build_hamiltonian(zfs, field, consts))
    pt = perturbative_transitions(zfs, field, FieldVector(), consts)
    return abs(pt.f_minus - f_minus), abs(pt.f_plus - f_plus)
