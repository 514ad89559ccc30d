"""Bath field model and renormalized frequency noise.

The bath is a stationary Gaussian Ornstein-Uhlenbeck field, independent per
axis.  Noise amplitudes are stored directly as gamma*b/2pi in MHz.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import (
    DivisionByNegligible,
    ModelPreconditionViolated,
    StepTooCoarse,
)
from .hamiltonian import FieldVector, PhysicalConstants, ZfsParams

_GEOMETRY_TOL = 1e-9  # gauss


@dataclass(frozen=True)
class NoiseParams:
    b_rms: tuple[float, float, float] = (0.7, 0.7, 0.7)  # MHz per axis
    tau0: float = 0.05  # us

    def __post_init__(self):
        object.__setattr__(self, "b_rms", tuple(float(v) for v in self.b_rms))
        if len(self.b_rms) != 3:
            raise ValueError("b_rms needs one value per axis")
        if any(v < 0 for v in self.b_rms):
            raise ValueError("b_rms must be non-negative")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")

    def scaled(self, factor: float) -> "NoiseParams":
        return NoiseParams(tuple(factor * v for v in self.b_rms), self.tau0)


@dataclass(frozen=True)
class NoiseTrajectory:
    dt: float
    samples: np.ndarray  # (n_steps, 3), MHz

    def __len__(self):
        return len(self.samples)


class ShiftModel(str, enum.Enum):
    """How the instantaneous noise shift of a transition is evaluated.

    EXACT        full second-order radical, f(B + b) - f(B)
    SERIES       radical expanded to second order in b_z
    LONGITUDINAL linear b_z term only; field must lie along the NV axis
    TRANSVERSE   linear b_x term plus quadratic b_z term; field along x
    """

    EXACT = "exact"
    SERIES = "series"
    LONGITUDINAL = "longitudinal"
    TRANSVERSE = "transverse"


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator uniquely keyed by ``(seed, stream_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


def check_step(dt: float, tau0: float) -> None:
    if dt > tau0 / 10 * (1 + 1e-12):
        raise StepTooCoarse(f"dt={dt:g} us exceeds tau0/10={tau0 / 10:g} us")


def ou_batch(params: NoiseParams, dt: float, n_steps: int, seed: int, stream_ids) -> np.ndarray:
    """Stack of OU trajectories, shape ``(len(stream_ids), n_steps, 3)``.

    Row ``i`` depends only on ``(seed, stream_ids[i])``.
    """
    check_step(dt, params.tau0)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    stream_ids = list(stream_ids)
    xi = np.empty((len(stream_ids), n_steps, 3))
    for i, sid in enumerate(stream_ids):
        xi[i] = make_rng(seed, sid).standard_normal((n_steps, 3))
    a = np.exp(-dt / params.tau0)
    sigma = np.asarray(params.b_rms)
    out = np.empty_like(xi)
    out[:, 0, :] = xi[:, 0, :]
    if n_steps > 1:
        # exact AR(1) discretization; unit variance, scaled per axis below
        zi = (a * xi[:, 0, :])[:, None, :]
        out[:, 1:, :], _ = lfilter([np.sqrt(1 - a * a)], [1.0, -a], xi[:, 1:, :], axis=1, zi=zi)
    return out * sigma


def ou_trajectory(
    params: NoiseParams, dt: float, n_steps: int, seed: int, stream_id: int = 0
) -> NoiseTrajectory:
    """Stationary OU bath field sampled on a uniform grid."""
    return NoiseTrajectory(dt=dt, samples=ou_batch(params, dt, n_steps, seed, [stream_id])[0])


def _check_geometry(b_static: FieldVector, model: ShiftModel) -> None:
    if model is ShiftModel.LONGITUDINAL:
        if abs(b_static.bx) > _GEOMETRY_TOL or abs(b_static.by) > _GEOMETRY_TOL:
            raise ModelPreconditionViolated("longitudinal model needs Bx = By = 0")
    elif model is ShiftModel.TRANSVERSE:
        if abs(b_static.by) > _GEOMETRY_TOL or abs(b_static.bz) > _GEOMETRY_TOL:
            raise ModelPreconditionViolated("transverse model needs By = Bz = 0")


def _e_tilde_abs(d, e, wx, wy, sign):
    re = e + (wx * wx - wy * wy) / (2 * d)
    im = sign * wx * wy / d
    return np.sqrt(re * re + im * im)


def renormalized_shift(
    zfs: ZfsParams,
    b_static: FieldVector,
    b_sample,
    model: ShiftModel = ShiftModel.EXACT,
    branch: str = "minus",
    consts: PhysicalConstants = PhysicalConstants(),
):
    """Instantaneous noise shift of the |0> <-> |branch> transition, MHz.

    ``b_sample`` is gamma*b/2pi in MHz with trailing axis of length 3; any
    leading shape is broadcast.  The shift vanishes identically at b = 0.
    """
    model = ShiftModel(model)
    _check_geometry(b_static, model)
    b = np.asarray(b_sample, dtype=float)
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    g = consts.gamma_over_2pi
    wx, wy, wz = g * b_static.bx, g * b_static.by, g * b_static.bz
    d, e = zfs.d, zfs.e
    sign = 1.0 if branch == "plus" else -1.0

    if model is ShiftModel.EXACT:
        # f(B + b) - f(B) of the second-order frequency, rearranged so the large
        # D offset and the radicals cancel analytically instead of numerically
        delta_e_noise = (2 * wx * bx + bx * bx + 2 * wy * by + by * by) / d
        re0 = e + (wx * wx - wy * wy) / (2 * d)
        im0 = sign * wx * wy / d
        d_re = (2 * wx * bx + bx * bx - 2 * wy * by - by * by) / (2 * d)
        d_im = sign * (wx * by + bx * wy + bx * by) / d
        d_sq = (2 * wz * bz + bz * bz) + d_re * (2 * re0 + d_re) + d_im * (2 * im0 + d_im)
        r0 = np.sqrt(wz * wz + re0 * re0 + im0 * im0)
        rb = np.sqrt(np.maximum(r0 * r0 + d_sq, 0.0))
        denom = rb + r0
        radical = np.divide(d_sq, denom, out=np.zeros_like(d_sq * denom), where=denom > 0)
        return 1.5 * delta_e_noise + sign * radical

    if model is ShiftModel.SERIES:
        delta_e_noise = ((wx + bx) ** 2 + (wy + by) ** 2 - wx * wx - wy * wy) / d
        et0 = _e_tilde_abs(d, e, wx, wy, sign)
        etb = _e_tilde_abs(d, e, wx + bx, wy + by, sign)
        r0 = np.sqrt(wz * wz + et0 * et0)
        rb = np.sqrt(wz * wz + etb * etb)
        # (rb - r0): noise renormalization of E~ inside the zeroth-order radical
        radical = (rb - r0) + wz * bz / rb + etb * etb * bz * bz / (2 * rb**3)
        return 1.5 * delta_e_noise + sign * radical

    if model is ShiftModel.LONGITUDINAL:
        return sign * wz * bz / np.sqrt(wz * wz + e * e) + 0.0 * (bx + by)

    et = _e_tilde_abs(d, e, wx, 0.0, sign)
    return 2 * wx * bx / d + sign * bz * bz / (2 * et) + 0.0 * by


def gaussian_samples(noise: NoiseParams, n_samples: int, seed: int) -> np.ndarray:
    """Independent stationary draws of the bath field, shape (n_samples, 3)."""
    return make_rng(seed, 0).standard_normal((n_samples, 3)) * np.asarray(noise.b_rms)


def renormalized_rms(
    zfs: ZfsParams,
    b_static: FieldVector,
    noise: NoiseParams,
    model: ShiftModel = ShiftModel.EXACT,
    branch: str = "minus",
    n_samples: int = 100_000,
    seed: int = 0,
    consts: PhysicalConstants = PhysicalConstants(),
) -> float:
    """Monte Carlo root-mean-square of the renormalized shift, MHz."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    shifts = renormalized_shift(
        zfs, b_static, gaussian_samples(noise, n_samples, seed), model, branch, consts
    )
    return float(np.sqrt(np.mean(shifts * shifts)))


def longitudinal_rms(
    zfs: ZfsParams,
    b_static: FieldVector,
    noise: NoiseParams,
    consts: PhysicalConstants = PhysicalConstants(),
) -> float:
    """Closed-form RMS of the linear b_z shift for a field along the NV axis."""
    _check_geometry(b_static, ShiftModel.LONGITUDINAL)
    wz = consts.gamma_over_2pi * b_static.bz
    return float(abs(wz) * noise.b_rms[2] / np.hypot(wz, zfs.e))


def suppression_factor(
    zfs: ZfsParams,
    field_magnitude: float,
    noise: NoiseParams,
    consts: PhysicalConstants = PhysicalConstants(),
    n_samples: int = 100_000,
    seed: int = 0,
    branch: str = "minus",
) -> float:
    """RMS shift with the field along the NV axis over RMS with it along x."""
    if not field_magnitude > 0:
        raise ValueError("field_magnitude must be positive")
    par = renormalized_rms(
        zfs, FieldVector(0, 0, field_magnitude), noise, ShiftModel.EXACT, branch, n_samples, seed, consts
    )
    perp = renormalized_rms(
        zfs, FieldVector(field_magnitude, 0, 0), noise, ShiftModel.EXACT, branch, n_samples, seed, consts
    )
    if perp < 1e-12:
        raise DivisionByNegligible(f"perpendicular RMS {perp:g} MHz is negligible")
    return par / perp
