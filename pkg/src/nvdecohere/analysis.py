"""Decay fitting, Redfield T2 predictions and parameter sweeps."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .dynamics import DecayCurve, SequenceSpec, characteristic_time, simulate_sequence
from .errors import InsufficientData, NoDecayDetected, NonConvergence, NonPositiveValue
from .hamiltonian import FieldVector, PhysicalConstants, ZfsParams
from .noise import NoiseParams, ShiftModel, gaussian_samples, renormalized_shift

TWO_PI = 2 * np.pi
MAX_ITER = 200


@dataclass
class FitResult:
    params: dict[str, float]
    std_errs: dict[str, float]
    residual_norm: float  # RMS residual
    converged: bool
    n_iter: int

    def __getitem__(self, name):
        return self.params[name]


@dataclass
class SweepTable:
    """One row per sweep point; ``x`` is theta (deg), |B| (gauss) or N."""

    x: np.ndarray
    t2: np.ndarray
    std_err: np.ndarray
    included: np.ndarray = field(default=None)
    label: str = "x"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.t2 = np.asarray(self.t2, dtype=float)
        self.std_err = np.asarray(self.std_err, dtype=float)
        if self.included is None:
            self.included = np.ones(len(self.x), dtype=bool)
        self.included = np.asarray(self.included, dtype=bool)
        if not len(self.x) == len(self.t2) == len(self.std_err) == len(self.included):
            raise ValueError("row fields must have equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("independent variable must be strictly increasing")

    @property
    def one_over_t2(self) -> np.ndarray:
        return 1.0 / self.t2

    @property
    def one_over_t2_err(self) -> np.ndarray:
        return self.std_err / self.t2**2

    def masked(self, values) -> "SweepTable":
        """Copy with rows whose x is in ``values`` excluded."""
        inc = self.included & ~np.isin(self.x, np.asarray(values, dtype=float))
        return SweepTable(self.x, self.t2, self.std_err, inc, self.label)


def _least_squares(residuals, p0, names, jac="2-point"):
    sol = optimize.least_squares(
        residuals, p0, jac=jac, method="lm", xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=MAX_ITER
    )
    n = sol.fun.size
    p = len(p0)
    if sol.status <= 0:
        raise NonConvergence(f"least squares did not converge: {sol.message}")
    dof = max(n - p, 1)
    s2 = float(sol.fun @ sol.fun) / dof
    try:
        cov = np.linalg.inv(sol.jac.T @ sol.jac) * s2
        errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        errs = np.full(p, np.inf)
    return FitResult(
        params=dict(zip(names, map(float, sol.x))),
        std_errs=dict(zip(names, map(float, errs))),
        residual_norm=float(np.sqrt(np.mean(sol.fun**2))),
        converged=bool(sol.success),
        n_iter=int(sol.nfev),
    )


def _weights(curve: DecayCurve) -> np.ndarray:
    err = curve.std_err
    positive = err[err > 0]
    if positive.size == 0:
        return np.ones_like(err)
    # zero error bars (e.g. the exact t = 0 point) get the smallest nonzero one
    return 1.0 / np.where(err > 0, err, positive.min())


def _decay_guess(curve: DecayCurve, level: float) -> tuple[float, float]:
    """Amplitude and the time at which the curve crosses amplitude*level."""
    if len(curve.times) < 4:
        raise InsufficientData("need at least 4 points")
    t, y = curve.times, curve.coherence
    a = y[0]
    if not np.any(y < 0.9 * a):
        raise NoDecayDetected("coherence never falls below 90% of its initial value")
    below = np.nonzero(y < a * level)[0]
    if below.size and below[0] > 0:
        k = below[0]
        y0, y1 = y[k - 1], y[k]
        frac = (y0 - a * level) / (y0 - y1)
        return a, t[k - 1] + frac * (t[k] - t[k - 1])
    if below.size:
        return a, t[0]
    # never reaches the level: extrapolate from the last point
    k = len(t) - 1
    ratio = np.clip(y[k] / a, 1e-6, 0.999999)
    return a, t[k] * np.log(level) / np.log(ratio)


def fit_exponential(curve: DecayCurve) -> FitResult:
    """Weighted fit of A exp(-t / T2); parameters ``amplitude`` and ``t2``."""
    a0, t0 = _decay_guess(curve, np.exp(-1))
    t, y, w = curve.times, curve.coherence, _weights(curve)
    if np.any(y < 0) or np.any(y > 1.1):
        raise ValueError("coherence outside [0, 1.1]")

    def res(p):
        return w * (p[0] * np.exp(-t / p[1]) - y)

    def jac(p):
        e = np.exp(-t / p[1])
        return np.column_stack([w * e, w * p[0] * e * t / p[1] ** 2])

    return _least_squares(res, [a0, t0], ["amplitude", "t2"], jac)


def estimate_brms_from_fid(curve: DecayCurve) -> float:
    """RMS frequency noise (MHz) from a quasi-static Gaussian FID decay."""
    return fit_gaussian_fid(curve)["b_rms"]


def fit_gaussian_fid(curve: DecayCurve) -> FitResult:
    """Weighted fit of A exp(-(2 pi b t)^2 / 2); parameters ``amplitude``, ``b_rms``."""
    a0, t_half = _decay_guess(curve, np.exp(-0.5))
    b0 = 1.0 / (TWO_PI * t_half)
    t, y, w = curve.times, curve.coherence, _weights(curve)

    def res(p):
        return w * (p[0] * np.exp(-0.5 * (TWO_PI * p[1] * t) ** 2) - y)

    def jac(p):
        e = np.exp(-0.5 * (TWO_PI * p[1] * t) ** 2)
        return np.column_stack([w * e, -w * p[0] * e * TWO_PI**2 * p[1] * t**2])

    fit = _least_squares(res, [a0, b0], ["amplitude", "b_rms"], jac)
    fit.params["b_rms"] = abs(fit.params["b_rms"])
    return fit


def redfield_t2(b_tilde_rms: float, tau0: float) -> float:
    """Motional-narrowing coherence time 1 / ((2 pi b)^2 tau0), us."""
    if not b_tilde_rms > 0 or not tau0 > 0:
        raise ValueError("b_tilde_rms and tau0 must be positive")
    return 1.0 / ((TWO_PI * b_tilde_rms) ** 2 * tau0)


def dominant_linear_rms(theta_deg, field_magnitude, zfs, noise, consts=PhysicalConstants()):
    """RMS of the linear b_z shift gamma^2 Bz bz / sqrt(gamma^2 Bz^2 + |E~|^2), MHz."""
    th = np.deg2rad(np.asarray(theta_deg, dtype=float))
    g = consts.gamma_over_2pi
    wz = g * field_magnitude * np.where(th == np.pi / 2, 0.0, np.cos(th))
    wx = g * field_magnitude * np.sin(th)
    e_tilde = np.abs(zfs.e + wx * wx / (2 * zfs.d))
    return np.abs(wz) * noise.b_rms[2] / np.sqrt(wz * wz + e_tilde * e_tilde)


def angular_model(
    theta, field_magnitude, zfs, noise, tau0, offset, consts=PhysicalConstants()
):
    """1/T2 in 1/us for field angle ``theta`` (degrees) from the NV axis."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > 90):
        raise ValueError("theta must lie in [0, 90] degrees")
    b = dominant_linear_rms(theta, field_magnitude, zfs, noise, consts)
    out = (TWO_PI * b) ** 2 * tau0 + offset
    return float(out) if out.ndim == 0 else out


def fit_angular(
    table: SweepTable,
    field_magnitude: float,
    zfs: ZfsParams,
    noise: NoiseParams,
    consts: PhysicalConstants = PhysicalConstants(),
    weights=None,
) -> FitResult:
    """Fit ``tau0`` and ``offset`` of the angular model to 1/T2 of included rows."""
    inc = table.included
    if inc.sum() < 4:
        raise InsufficientData(f"{int(inc.sum())} included rows; need at least 4")
    theta = table.x[inc]
    y = table.one_over_t2[inc]
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)[inc]
    shape = (TWO_PI * dominant_linear_rms(theta, field_magnitude, zfs, noise, consts)) ** 2
    # the model is linear in both parameters: seed from ordinary least squares
    design = np.column_stack([shape, np.ones_like(shape)])
    p0, *_ = np.linalg.lstsq(design * w[:, None], y * w, rcond=None)

    def res(p):
        return w * (angular_model(theta, field_magnitude, zfs, noise, p[0], p[1], consts) - y)

    return _least_squares(res, p0, ["tau0", "offset"])


def fit_power_law(t2_vs_n: SweepTable) -> FitResult:
    """T2 = prefactor * N^r by linear regression in log-log space."""
    inc = t2_vs_n.included
    n, t2 = t2_vs_n.x[inc], t2_vs_n.t2[inc]
    if len(n) < 3:
        raise InsufficientData("need at least 3 rows")
    if np.any(t2 <= 0) or np.any(n < 1):
        raise NonPositiveValue("T2 must be positive and N >= 1")
    lx, ly = np.log(n), np.log(t2)
    reg = stats.linregress(lx, ly)
    resid = ly - (reg.intercept + reg.slope * lx)
    pref = float(np.exp(reg.intercept))
    return FitResult(
        params={"prefactor": pref, "r": float(reg.slope)},
        std_errs={"prefactor": float(pref * reg.intercept_stderr), "r": float(reg.stderr)},
        residual_norm=float(np.sqrt(np.mean(resid**2))),
        converged=True,
        n_iter=1,
    )


# ---------------------------------------------------------------------------
# sweep drivers


def shift_std(zfs, b_static, noise, branch, consts, n_samples=20_000, seed=0) -> float:
    """Standard deviation of the exact renormalized shift, MHz."""
    s = renormalized_shift(
        zfs, b_static, gaussian_samples(noise, n_samples, seed), ShiftModel.EXACT, branch, consts
    )
    return float(s.std())


def auto_times(
    zfs, b_static, noise, spec: SequenceSpec, consts=PhysicalConstants(), n_points=10, span=(0.2, 2.5)
) -> np.ndarray:
    """Time grid bracketing the expected 1/e decay of ``spec``."""
    b = shift_std(zfs, b_static, noise, spec.branch, consts)
    if b <= 0:
        raise NoDecayDetected("no noise: coherence does not decay")
    t_e = characteristic_time(spec, b, noise.tau0)
    return np.round(np.linspace(span[0], span[1], n_points) * t_e, 12)


@dataclass
class SweepPoint:
    x: float
    curve: DecayCurve
    fit: FitResult


def _run_points(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda f: f(), jobs))
    return [f() for f in jobs]


def _point(zfs, b_static, noise, spec, times, n_traj, model, dt, seed, consts, x):
    if times is None:
        times = auto_times(zfs, b_static, noise, spec, consts)
    curve = simulate_sequence(zfs, b_static, noise, spec, times, n_traj, model, dt, seed, consts)
    return SweepPoint(x, curve, fit_exponential(curve))


def _table(points, label, masked=()):
    x = [p.x for p in points]
    table = SweepTable(x, [p.fit["t2"] for p in points], [p.fit.std_errs["t2"] for p in points], label=label)
    return table.masked(masked)


def sweep_angle(
    zfs, field_magnitude, noise, thetas, masked=(), spec=SequenceSpec(), times=None,
    n_traj=2000, model=ShiftModel.EXACT, dt=None, seed=0, consts=PhysicalConstants(), workers=1,
):
    """Hahn-echo T2 versus polar angle; rows in ``masked`` are excluded from fits."""
    jobs = [
        (lambda th=th, i=i: _point(
            zfs, FieldVector.from_polar(field_magnitude, th), noise, spec, times,
            n_traj, model, dt, seed + i, consts, th))
        for i, th in enumerate(thetas)
    ]
    points = _run_points(jobs, workers)
    return _table(points, "theta_deg", masked), points


def interpolate_tau0(profile, b_gauss: float) -> float:
    """Piecewise-linear tau0(B) from (B, tau0) knots, clamped at the ends."""
    knots = np.asarray(sorted(profile), dtype=float)
    return float(np.interp(b_gauss, knots[:, 0], knots[:, 1]))


def sweep_field(
    zfs, magnitudes, noise, orientation="parallel", tau0_profile=None, spec=SequenceSpec(),
    times=None, n_traj=2000, model=ShiftModel.EXACT, dt=None, seed=0,
    consts=PhysicalConstants(), workers=1,
):
    """T2 versus |B| along the NV axis or perpendicular to it."""
    theta = 0.0 if orientation == "parallel" else 90.0
    jobs = []
    for i, b in enumerate(magnitudes):
        nz = noise if tau0_profile is None else NoiseParams(noise.b_rms, interpolate_tau0(tau0_profile, b))
        jobs.append(lambda b=b, nz=nz, i=i: _point(
            zfs, FieldVector.from_polar(b, theta), nz, spec, times, n_traj, model, dt, seed + i, consts, b))
    points = _run_points(jobs, workers)
    return _table(points, "b_gauss"), points


def sweep_cpmg(
    zfs, b_static, noise, n_list, time_grid="total", times=None, branch="minus",
    n_traj=2000, model=ShiftModel.EXACT, dt=None, seed=0, consts=PhysicalConstants(), workers=1,
):
    """CPMG T2 for each pulse count.

    ``time_grid='total'`` uses ``times`` as total evolution times for every N;
    ``'spacing'`` treats them as pulse spacings, so total time = N * spacing.
    With ``times=None`` each N gets its own automatic grid.
    """
    jobs = []
    for i, n in enumerate(n_list):
        spec = SequenceSpec("cpmg", int(n), 1.0, branch)
        t = times
        if t is not None and time_grid == "spacing":
            t = np.asarray(t, dtype=float) * n
        jobs.append(lambda spec=spec, t=t, i=i, n=n: _point(
            zfs, b_static, noise, spec, t, n_traj, model, dt, seed + i, consts, n))
    points = _run_points(jobs, workers)
    return _table(points, "n_pulses"), points
