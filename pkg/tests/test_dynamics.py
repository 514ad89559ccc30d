import numpy as np
import pytest

from nvdecohere.dynamics import (
    DecayCurve,
    SequenceSpec,
    accumulate_phases,
    oracle_propagate,
    oracle_propagate_batch,
    ou_gaussian_coherence,
    simulate_sequence,
    step_grid,
    step_propagators,
    toggling_function,
)
from nvdecohere.errors import GridMismatch, OutOfRange, StepTooCoarse
from nvdecohere.hamiltonian import FieldVector
from nvdecohere.noise import NoiseParams, NoiseTrajectory, ShiftModel, longitudinal_rms, ou_batch, ou_trajectory


def test_toggling_examples():
    assert toggling_function(SequenceSpec("fid", 0, 3.0), 2.9) == 1
    hahn = SequenceSpec("hahn", 1, 2.0)
    assert toggling_function(hahn, 0.9) == 1
    assert toggling_function(hahn, 1.1) == -1
    cpmg = SequenceSpec("cpmg", 2, 4.0)
    np.testing.assert_allclose(cpmg.pulse_times, [1.0, 3.0])
    assert toggling_function(cpmg, 2.0) == -1
    assert toggling_function(cpmg, 3.5) == 1
    with pytest.raises(OutOfRange):
        toggling_function(hahn, 2.0)
    with pytest.raises(OutOfRange):
        toggling_function(hahn, -0.1)


@pytest.mark.parametrize("n", [1, 2, 3, 8])
def test_step_grid_places_pulses_on_nodes(n):
    spec = SequenceSpec("cpmg", n, 1.7)
    grid = step_grid(spec, 0.01)
    assert grid.dt <= 0.01
    np.testing.assert_allclose(np.array(grid.pulse_steps) * grid.dt, spec.pulse_times, rtol=1e-12)
    mids = (np.arange(grid.n_steps) + 0.5) * grid.dt
    assert np.array_equal(grid.signs, [toggling_function(spec, t) for t in mids])
    # toggled integral of a constant vanishes for an even number of equal half-intervals
    assert abs(grid.signs.sum()) == (0 if n % 2 == 0 else 0)


def test_zero_noise_gives_full_coherence(zfs, b_par):
    curve = simulate_sequence(zfs, b_par, NoiseParams((0, 0, 0), 0.05), SequenceSpec(), [0, 0.5, 1, 2], 100)
    assert np.array_equal(curve.coherence, np.ones(4))
    assert curve.coherence[0] == 1.0 and curve.std_err[0] == 0.0


def test_step_too_coarse(zfs, b_par, bath):
    with pytest.raises(StepTooCoarse):
        simulate_sequence(zfs, b_par, bath, SequenceSpec(), [1.0], 100, dt=0.01)


def test_hahn_equals_cpmg_one(zfs, b_par, bath):
    times = [0.2, 0.5, 1.0]
    hahn = simulate_sequence(zfs, b_par, bath, SequenceSpec("hahn"), times, 200, seed=5)
    cpmg = simulate_sequence(zfs, b_par, bath, SequenceSpec("cpmg", 1), times, 200, seed=5)
    assert np.array_equal(hahn.coherence, cpmg.coherence)
    assert np.array_equal(hahn.std_err, cpmg.std_err)


def test_worker_count_does_not_change_result(zfs, b_par, bath, monkeypatch):
    import nvdecohere.dynamics as dyn

    monkeypatch.setattr(dyn, "_CHUNK_SAMPLES", 20_000)  # force several chunks
    times = [0.3, 0.9]
    one = simulate_sequence(zfs, b_par, bath, SequenceSpec(), times, 300, seed=1, workers=1)
    four = simulate_sequence(zfs, b_par, bath, SequenceSpec(), times, 300, seed=1, workers=4)
    assert np.array_equal(one.coherence, four.coherence)


def test_static_noise_refocused_by_echo(zfs, b_par):
    quasi_static = NoiseParams((0, 0, 0.7), 1e9)
    curve = simulate_sequence(zfs, b_par, quasi_static, SequenceSpec("hahn"), [0.5, 1, 2, 4], 200,
                              ShiftModel.LONGITUDINAL)
    np.testing.assert_allclose(curve.coherence, 1.0, atol=1e-6)


def test_quasi_static_fid_is_gaussian(zfs, b_par):
    b_tilde = longitudinal_rms(zfs, b_par, NoiseParams((0, 0, 0.7), 1.0))
    t2_star = np.sqrt(2) / (2 * np.pi * b_tilde)
    noise = NoiseParams((0, 0, 0.7), 100 * t2_star)
    times = np.linspace(0.1, 1.2, 6) * t2_star
    curve = simulate_sequence(zfs, b_par, noise, SequenceSpec("fid", 0), times, 2000, seed=4)
    expected = np.exp(-0.5 * (2 * np.pi * b_tilde * times) ** 2)
    np.testing.assert_allclose(curve.coherence, expected, rtol=0.05)


@pytest.mark.parametrize("spec", [SequenceSpec("fid", 0), SequenceSpec("hahn", 1), SequenceSpec("cpmg", 4)])
def test_gaussian_noise_matches_ou_filter_integral(zfs, b_par, spec):
    # linear shift of Gaussian OU noise: exact coherence is exp(-chi/2)
    noise = NoiseParams((0, 0, 0.5), 0.2)
    b_tilde = longitudinal_rms(zfs, b_par, noise)
    times = np.array([0.3, 0.8, 1.5])
    curve = simulate_sequence(zfs, b_par, noise, spec, times, 1000, ShiftModel.LONGITUDINAL, seed=8)
    expected = np.array([ou_gaussian_coherence(spec.at(t), b_tilde, noise.tau0) for t in times])
    assert np.all(np.abs(curve.coherence - expected) <= 4 * curve.std_err + 0.01)


def test_ou_filter_integral_limits():
    # motional narrowing: FID slope (2 pi b)^2 tau0; quasi-static: exp(-(2 pi b t)^2 / 2)
    b, tau0, t = 0.3, 0.01, 5.0
    c = ou_gaussian_coherence(SequenceSpec("fid", 0, t), b, tau0)
    chi = 2 * (2 * np.pi * b) ** 2 * tau0**2 * (t / tau0 - 1 + np.exp(-t / tau0))
    assert c == pytest.approx(np.exp(-chi / 2), rel=1e-12)
    c = ou_gaussian_coherence(SequenceSpec("fid", 0, 0.5), b, 1e6)
    assert c == pytest.approx(np.exp(-0.5 * (2 * np.pi * b * 0.5) ** 2), rel=1e-5)
    # Hahn echo at short times: chi = (2 pi b)^2 t^3 / (6 tau0)
    c = ou_gaussian_coherence(SequenceSpec("hahn", 1, 0.01), b, 10.0)
    assert -2 * np.log(c) == pytest.approx((2 * np.pi * b) ** 2 * 0.01**3 / 60, rel=1e-3)


def test_decay_curve_invariants():
    with pytest.raises(ValueError):
        DecayCurve([0, 1, 1], [1, 0.5, 0.4], [0, 0, 0], 100)


def test_oracle_zero_noise(zfs, b_perp):
    spec = SequenceSpec("cpmg", 3, 0.6)
    tr = NoiseTrajectory(0.005, np.zeros((120, 3)))
    c = oracle_propagate(zfs, b_perp, tr, spec)
    assert abs(abs(c) - 1) < 1e-10
    assert abs(c - 1) < 1e-10


def test_oracle_grid_mismatch(zfs, b_par, bath):
    tr = ou_trajectory(bath, 0.005, 150, seed=0)
    with pytest.raises(GridMismatch):
        oracle_propagate(zfs, b_par, tr, SequenceSpec("hahn", 1, 1.0))


def test_oracle_phase_matches_engine(zfs, b_par):
    noise = NoiseParams((0.0, 0.0, 0.1), 0.05)
    spec = SequenceSpec("hahn", 1, 1.0)
    phases, grid = accumulate_phases(zfs, b_par, noise, spec, 10, seed=12)
    samples = ou_batch(noise, grid.dt, grid.n_steps, 12, range(10))
    for j in range(10):
        c = oracle_propagate(zfs, b_par, NoiseTrajectory(grid.dt, samples[j]), spec)
        assert abs(np.angle(c * np.exp(-1j * phases[j]))) < 1e-3


def test_oracle_curve_agrees_with_engine(zfs, b_par, bath):
    spec = SequenceSpec("hahn", 1, 1.0)
    for i, t in enumerate([0.4, 1.0]):
        phases, grid = accumulate_phases(zfs, b_par, bath, spec.at(t), 200, seed=3, stream_offset=i * 200)
        samples = ou_batch(bath, grid.dt, grid.n_steps, 3, range(i * 200, (i + 1) * 200))
        c = oracle_propagate_batch(zfs, b_par, samples, grid.dt, spec.at(t))
        assert abs(c.mean()) == pytest.approx(abs(np.exp(1j * phases).mean()), rel=0.01)


def test_step_propagators_unitary(zfs, bath):
    field = FieldVector(10, 5, 20)
    samples = ou_batch(bath, 0.005, 400, 0, [0])[0] * 20
    u = step_propagators(zfs, field, samples, 0.005)
    eye = np.eye(3)
    err = np.abs(np.einsum("kij,kil->kjl", u.conj(), u) - eye).max()
    assert err < 1e-12


def test_norm_conserved_over_many_steps(zfs, b_par, bath):
    n = 100_000
    samples = ou_trajectory(bath, 0.005, n, seed=1).samples
    u = step_propagators(zfs, b_par, samples, 0.005)
    psi = np.array([1, 1, 0], dtype=complex) / np.sqrt(2)
    for k in range(n):
        psi = u[k] @ psi
    assert abs(np.vdot(psi, psi).real - 1) < 1e-9
