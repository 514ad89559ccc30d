"""Coherence decay under FID, Hahn-echo and CPMG sequences.

The production engine accumulates the semiclassical phase of one
|0> <-> |+/-> coherence over OU noise trajectories.  ``oracle_propagate``
solves the full three-level problem for the same trajectories and exists to
check that engine.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import GridMismatch, OutOfRange
from .hamiltonian import (
    FieldVector,
    PhysicalConstants,
    ZfsParams,
    build_hamiltonian,
    diagonalize,
    noise_operator,
    tracked_index,
)
from .noise import NoiseParams, NoiseTrajectory, ShiftModel, check_step, ou_batch, renormalized_shift

TWO_PI = 2 * np.pi
KINDS = ("fid", "hahn", "cpmg")
# trajectory samples held in memory per chunk (steps x trajectories)
_CHUNK_SAMPLES = 1_500_000


@dataclass(frozen=True)
class SequenceSpec:
    kind: str = "hahn"
    n_pi: int = 1
    total_time: float = 1.0  # us, total free evolution
    branch: str = "minus"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.branch not in ("plus", "minus"):
            raise ValueError("branch must be 'plus' or 'minus'")
        if self.kind == "fid" and self.n_pi != 0:
            object.__setattr__(self, "n_pi", 0)
        if self.kind == "hahn" and self.n_pi != 1:
            object.__setattr__(self, "n_pi", 1)
        if self.kind == "cpmg" and self.n_pi < 1:
            raise ValueError("CPMG needs at least one pi pulse")
        if not self.total_time > 0:
            raise ValueError("total_time must be positive")

    @property
    def pulse_times(self) -> np.ndarray:
        n = self.n_pi
        return np.array([(2 * k - 1) * self.total_time / (2 * n) for k in range(1, n + 1)])

    def at(self, total_time: float) -> "SequenceSpec":
        return replace(self, total_time=float(total_time))


@dataclass(frozen=True)
class DecayCurve:
    times: np.ndarray  # total free-evolution time, us
    coherence: np.ndarray
    std_err: np.ndarray
    n_traj: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.coherence) or len(t) != len(self.std_err):
            raise ValueError("times, coherence and std_err must be 1-D and equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coherence", np.asarray(self.coherence, dtype=float))
        object.__setattr__(self, "std_err", np.asarray(self.std_err, dtype=float))


def toggling_function(spec: SequenceSpec, t: float) -> int:
    """Sign of the accumulated phase at time ``t``; flips at every pi pulse."""
    if not 0 <= t < spec.total_time:
        raise OutOfRange(f"t={t} outside [0, {spec.total_time})")
    flips = int(np.count_nonzero(spec.pulse_times <= t))
    return -1 if flips % 2 else 1


@dataclass(frozen=True)
class StepGrid:
    dt: float
    n_steps: int
    pulse_steps: tuple[int, ...]  # step index at which each pulse fires
    signs: np.ndarray  # toggling sign of each step


def default_max_step(spec: SequenceSpec, tau0: float) -> float:
    shortest = spec.total_time / (2 * spec.n_pi) if spec.n_pi else spec.total_time
    return min(tau0 / 20, shortest / 10)


def step_grid(spec: SequenceSpec, dt_max: float) -> StepGrid:
    """Uniform grid no coarser than ``dt_max`` with every pulse on a node."""
    if spec.n_pi == 0:
        n = max(1, math.ceil(spec.total_time / dt_max - 1e-9))
        pulse_steps: tuple[int, ...] = ()
    else:
        per_half = max(1, math.ceil(spec.total_time / (2 * spec.n_pi * dt_max) - 1e-9))
        n = 2 * spec.n_pi * per_half
        pulse_steps = tuple((2 * k - 1) * per_half for k in range(1, spec.n_pi + 1))
    counts = np.searchsorted(np.array(pulse_steps, dtype=int), np.arange(n), side="right")
    signs = np.where(counts % 2, -1.0, 1.0)
    return StepGrid(spec.total_time / n, n, pulse_steps, signs)


def _chunks(n_traj: int, n_steps: int):
    size = max(1, _CHUNK_SAMPLES // max(1, n_steps))
    return [(lo, min(n_traj, lo + size)) for lo in range(0, n_traj, size)]


def accumulate_phases(
    zfs: ZfsParams,
    b_static: FieldVector,
    noise: NoiseParams,
    spec: SequenceSpec,
    n_traj: int,
    model: ShiftModel = ShiftModel.EXACT,
    dt: float | None = None,
    seed: int = 0,
    consts: PhysicalConstants = PhysicalConstants(),
    stream_offset: int = 0,
    workers: int = 1,
) -> tuple[np.ndarray, StepGrid]:
    """Toggled phase 2 pi sum_k s_k df_k dt for each trajectory, radians.

    Trajectory ``j`` uses noise stream ``stream_offset + j``.
    """
    dt_max = default_max_step(spec, noise.tau0) if dt is None else dt
    check_step(dt_max, noise.tau0)
    grid = step_grid(spec, dt_max)

    def work(bounds):
        lo, hi = bounds
        samples = ou_batch(noise, grid.dt, grid.n_steps, seed, range(stream_offset + lo, stream_offset + hi))
        shifts = renormalized_shift(zfs, b_static, samples, model, spec.branch, consts)
        return TWO_PI * grid.dt * (shifts @ grid.signs)

    chunks = _chunks(n_traj, grid.n_steps)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts), grid


def ensemble_coherence(phases: np.ndarray) -> tuple[float, float]:
    """|<exp(i phi)>| and its standard error."""
    z = np.exp(1j * phases)
    m = z.mean()
    mag = abs(m)
    if len(z) < 2:
        return float(mag), 0.0
    # project onto the mean direction; the transverse part does not bias |m| to first order
    u = m / mag if mag > 0 else 1.0
    proj = (z * np.conj(u)).real
    return float(mag), float(proj.std(ddof=1) / np.sqrt(len(z)))


def simulate_sequence(
    zfs: ZfsParams,
    b_static: FieldVector,
    noise: NoiseParams,
    spec_template: SequenceSpec,
    times,
    n_traj: int = 2000,
    model: ShiftModel = ShiftModel.EXACT,
    dt: float | None = None,
    seed: int = 0,
    consts: PhysicalConstants = PhysicalConstants(),
    workers: int = 1,
) -> DecayCurve:
    """Ensemble coherence for each total evolution time in ``times``.

    ``dt`` is an upper bound on the step; the grid is refined so that every
    pulse lands on a node.  Output is independent of ``workers``.
    """
    if n_traj < 100:
        raise ValueError("n_traj must be >= 100")
    times = np.asarray(times, dtype=float)
    coh = np.empty(len(times))
    err = np.empty(len(times))
    for i, t in enumerate(times):
        if t == 0:
            coh[i], err[i] = 1.0, 0.0
            continue
        phases, _ = accumulate_phases(
            zfs, b_static, noise, spec_template.at(t), n_traj, model, dt, seed, consts,
            stream_offset=i * n_traj, workers=workers,
        )
        coh[i], err[i] = ensemble_coherence(phases)
    return DecayCurve(times, coh, err, n_traj)


def ou_gaussian_coherence(spec: SequenceSpec, b_rms: float, tau0: float) -> float:
    """Coherence for a Gaussian OU frequency noise of RMS ``b_rms`` MHz.

    exp(-chi/2) with chi = (2 pi b)^2 int int s(t) s(t') exp(-|t-t'|/tau0).
    """
    edges = np.concatenate([[0.0], spec.pulse_times, [spec.total_time]])
    lengths = np.diff(edges) / tau0
    # 1 - exp(-L/tau0) per interval, written to stay accurate for L << tau0
    one_minus = -np.expm1(-lengths)
    chi = 0.0
    for i, x in enumerate(lengths):
        if x < 1e-3:
            self_term = x * x / 2 - x**3 / 6 + x**4 / 24
        else:
            self_term = x + np.expm1(-x)
        chi += 2 * tau0**2 * self_term
        for j in range(i + 1, len(lengths)):
            gap = (edges[j] - edges[i + 1]) / tau0
            sign = 1 if (i + j) % 2 == 0 else -1
            chi += 2 * sign * tau0**2 * np.exp(-gap) * one_minus[i] * one_minus[j]
    chi *= (TWO_PI * b_rms) ** 2
    return float(np.exp(-chi / 2))


def characteristic_time(spec: SequenceSpec, b_rms: float, tau0: float) -> float:
    """Total time at which the Gaussian OU coherence falls to 1/e."""
    target = np.exp(-1)
    lo, hi = 0.0, max(tau0, 1e-3)
    while ou_gaussian_coherence(spec.at(hi), b_rms, tau0) > target:
        lo, hi = hi, 2 * hi
        if hi > 1e9:
            raise OverflowError("coherence does not decay")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ou_gaussian_coherence(spec.at(mid), b_rms, tau0) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# three-level oracle


def _static_frame(zfs, b_static, consts, branch):
    es = diagonalize(build_hamiltonian(zfs, b_static, consts))
    return es, es.zero_like_index, tracked_index(es, branch)


def step_propagators(zfs, b_static, samples, dt, consts=PhysicalConstants()):
    """exp(-2 pi i H_k dt) in the static eigenbasis; shape (..., n_steps, 3, 3).

    H_k = diag(static energies) + V^dagger (b_k . S) V, with b_k in MHz.
    """
    es = diagonalize(build_hamiltonian(zfs, b_static, consts))
    v = es.states
    samples = np.asarray(samples, dtype=float)
    s_ops = [v.conj().T @ m @ v for m in (noise_operator((1, 0, 0)), noise_operator((0, 1, 0)), noise_operator((0, 0, 1)))]
    h = np.einsum("...a,aij->...ij", samples, np.stack(s_ops)) + np.diag(es.energies)
    w, u = np.linalg.eigh(h)
    phase = np.exp(-1j * TWO_PI * w * dt)
    return np.einsum("...ij,...j,...kj->...ik", u, phase, u.conj())


def _propagate(props, state, pulse_steps, i0, i1):
    n_steps = props.shape[-3]
    pulses = set(pulse_steps)
    swaps = 0
    for k in range(n_steps):
        if k in pulses:
            state[..., [i0, i1]] = state[..., [i1, i0]]
            swaps += 1
        state = np.einsum("...ij,...j->...i", props[..., k, :, :], state)
    # after an odd number of swaps the original |0> amplitude sits in slot i1
    s0, s1 = (i1, i0) if swaps % 2 else (i0, i1)
    return state[..., s0] * np.conj(state[..., s1])


def oracle_propagate_batch(
    zfs: ZfsParams,
    b_static: FieldVector,
    samples: np.ndarray,
    dt: float,
    spec: SequenceSpec,
    consts: PhysicalConstants = PhysicalConstants(),
) -> np.ndarray:
    """Normalized coherence for a stack of trajectories ``(n_traj, n_steps, 3)``.

    The phase of the result matches the toggled phase of the semiclassical
    engine; noise-free evolution gives exactly 1.
    """
    samples = np.asarray(samples, dtype=float)
    n_steps = samples.shape[-2]
    if abs(n_steps * dt - spec.total_time) > dt / 2:
        raise GridMismatch(f"trajectory covers {n_steps * dt:g} us, sequence needs {spec.total_time:g} us")
    pulse_steps = []
    for t in spec.pulse_times:
        k = int(round(t / dt))
        if abs(k * dt - t) > dt / 2 or not 0 < k < n_steps:
            raise GridMismatch(f"pulse at {t:g} us cannot be placed on the grid")
        pulse_steps.append(k)
    _, i0, i1 = _static_frame(zfs, b_static, consts, spec.branch)

    def initial(shape):
        psi = np.zeros(shape + (3,), dtype=complex)
        psi[..., i0] = psi[..., i1] = 1 / np.sqrt(2)
        return psi

    ref_props = step_propagators(zfs, b_static, np.zeros((n_steps, 3)), dt, consts)
    c_ref = _propagate(ref_props, initial(()), pulse_steps, i0, i1)
    lead = samples.shape[:-2]
    flat = samples.reshape((-1, n_steps, 3))
    out = np.empty(len(flat), dtype=complex)
    size = max(1, 200_000 // n_steps)
    for lo in range(0, len(flat), size):
        props = step_propagators(zfs, b_static, flat[lo:lo + size], dt, consts)
        out[lo:lo + size] = _propagate(props, initial((len(props),)), pulse_steps, i0, i1) / c_ref
    return out.reshape(lead)


def oracle_propagate(
    zfs: ZfsParams,
    b_static: FieldVector,
    trajectory: NoiseTrajectory,
    spec: SequenceSpec,
    consts: PhysicalConstants = PhysicalConstants(),
) -> complex:
    """Full three-level coherence for one trajectory, normalized to t = 0."""
    return complex(oracle_propagate_batch(zfs, b_static, trajectory.samples[None], trajectory.dt, spec, consts)[0])
