import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvdecohere.errors import AmbiguousZeroState
from nvdecohere.hamiltonian import (
    FieldVector,
    PhysicalConstants,
    ZfsParams,
    build_hamiltonian,
    diagonalize,
    exact_transitions,
    perturbation_error,
    perturbative_transitions,
    spin1_operators,
)

# Exact transitions from 40-digit mpmath diagonalization (D=2870, E=4.85, gamma=2.8025)
GOLDEN_EXACT = {
    (25, 0, 0): (2866.8564688141768, 2878.2629376283536),
    (0, 0, 25): (2799.7698326482843, 2940.2301673517157),
    (75, 0, 0): (2880.4360572241302, 2905.4221144482603),
    (150, 0, 0): (2925.3583901359171, 2995.2667802718342),
    (15, 10, 20): (2815.0660895666813, 2927.6005480944814),
}

fields = st.tuples(*(st.floats(-200, 200, allow_nan=False),) * 3).map(lambda t: FieldVector(*t))


def test_spin1_basis():
    s = spin1_operators()
    np.testing.assert_array_equal(s.sz, np.diag([1, 0, -1]))
    np.testing.assert_allclose(s.sx @ s.sy - s.sy @ s.sx, 1j * s.sz, atol=1e-15)
    np.testing.assert_allclose(s.sy @ s.sz - s.sz @ s.sy, 1j * s.sx, atol=1e-15)
    np.testing.assert_allclose(s.sz @ s.sx - s.sx @ s.sz, 1j * s.sy, atol=1e-15)
    casimir = s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz
    np.testing.assert_allclose(casimir, 2 * np.eye(3), atol=1e-15)
    for m in (s.sx, s.sy, s.sz):
        np.testing.assert_array_equal(m, m.conj().T)


def test_zero_field_levels(zfs, consts):
    h = build_hamiltonian(ZfsParams(2870, 0), FieldVector(), consts)
    np.testing.assert_allclose(np.linalg.eigvalsh(h), [-2 * 2870 / 3, 2870 / 3, 2870 / 3], atol=1e-9)
    f_minus, f_plus, _ = exact_transitions(build_hamiltonian(zfs, FieldVector(), consts))
    assert f_minus == pytest.approx(2865.15, abs=1e-9)
    assert f_plus == pytest.approx(2874.85, abs=1e-9)


def test_diagonal_matrix_transitions():
    f_minus, f_plus, es = exact_transitions(np.diag([7.0, 1.0, -4.0]).astype(complex))
    assert es.zero_like_index == 1
    assert (f_minus, f_plus) == (6.0, 5.0)[::-1]


@pytest.mark.parametrize("field", list(GOLDEN_EXACT))
def test_exact_transitions_golden(field, zfs, consts):
    f_minus, f_plus, es = exact_transitions(build_hamiltonian(zfs, FieldVector(*field), consts))
    np.testing.assert_allclose([f_minus, f_plus], GOLDEN_EXACT[field], rtol=0, atol=1e-9)
    np.testing.assert_allclose(es.states.conj().T @ es.states, np.eye(3), atol=1e-12)


def test_parallel_field_closed_form(zfs, consts, b_par):
    pt = perturbative_transitions(zfs, b_par, consts=consts)
    r = np.hypot(2.8025 * 25, 4.85)
    assert pt.delta_e == 0
    assert pt.f_plus == pytest.approx(2870 + r, abs=1e-12)
    assert pt.f_minus == pytest.approx(2870 - r, abs=1e-12)
    f_minus, f_plus, _ = exact_transitions(build_hamiltonian(zfs, b_par, consts))
    assert (f_minus, f_plus) == pytest.approx((pt.f_minus, pt.f_plus), abs=1e-9)


def test_transverse_field_formulas(zfs, consts, b_perp):
    pt = perturbative_transitions(zfs, b_perp, consts=consts)
    w = 2.8025 * 25
    de = w**2 / 2870
    et = 4.85 + w**2 / (2 * 2870)
    assert pt.delta_e == pytest.approx(de, rel=1e-14)
    assert abs(pt.e_tilde_plus) == pytest.approx(et, rel=1e-14)
    assert pt.f_plus == pytest.approx(2870 + 1.5 * de + et, rel=1e-14)
    assert pt.f_minus == pytest.approx(2870 + 1.5 * de - et, rel=1e-14)
    exact = GOLDEN_EXACT[(25, 0, 0)]
    assert abs(pt.f_minus - exact[0]) < 0.01 and abs(pt.f_plus - exact[1]) < 0.01


def test_zero_field_perturbative(zfs):
    pt = perturbative_transitions(zfs, FieldVector())
    assert (pt.delta_e, pt.e_tilde_plus, pt.f_minus, pt.f_plus) == (0.0, 4.85, 2865.15, 2874.85)


def test_perturbation_error_values(zfs, consts):
    assert perturbation_error(zfs, FieldVector(), consts) == pytest.approx((0, 0), abs=1e-9)
    e25 = perturbation_error(zfs, FieldVector(25, 0, 0), consts)
    e150 = perturbation_error(zfs, FieldVector(150, 0, 0), consts)
    # measured with the mpmath oracle above
    assert e25 == pytest.approx((0.0038984, 0.0077968), abs=2e-7)
    assert e150 == pytest.approx((1.3648296, 2.7296592), abs=2e-7)
    assert max(e150) > max(e25)
    assert e150[0] <= 2.0


def test_ambiguous_zero_state():
    # equal weight of m_s = 0 in every eigenvector
    u = np.array([[1, 1, 1], [1, np.exp(2j * np.pi / 3), np.exp(4j * np.pi / 3)],
                  [1, np.exp(4j * np.pi / 3), np.exp(2j * np.pi / 3)]]) / np.sqrt(3)
    h = u @ np.diag([1.0, 2.0, 3.0]) @ u.conj().T
    with pytest.raises(AmbiguousZeroState):
        exact_transitions(h)


@settings(max_examples=60, deadline=None)
@given(fields, st.floats(100, 4000), st.floats(0, 50))
def test_hamiltonian_hermitian_traceless(field, d, e):
    h = build_hamiltonian(ZfsParams(d, e), field)
    np.testing.assert_array_equal(h, h.conj().T)
    assert abs(np.trace(h)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.tuples(*(st.floats(-30, 30),) * 3).map(lambda t: FieldVector(*t)))
def test_eigensystem_reconstruction(field):
    h = build_hamiltonian(ZfsParams(), field)
    es = diagonalize(h)
    rebuilt = (es.states * es.energies) @ es.states.conj().T
    assert np.linalg.norm(h - rebuilt) <= 1e-9 * np.linalg.norm(h)
    assert np.all(np.diff(es.energies) >= 0)
    assert es.energies.sum() == pytest.approx(np.trace(h).real, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 150), st.floats(-150, 150), st.floats(0, 2 * np.pi))
def test_rotational_covariance_without_strain(bperp, bz, angle):
    # with E = 0 nothing singles out an azimuth
    zfs = ZfsParams(2870, 0)
    a = perturbative_transitions(zfs, FieldVector(bperp, 0, bz))
    b = perturbative_transitions(zfs, FieldVector(bperp * np.cos(angle), bperp * np.sin(angle), bz))
    assert b.delta_e == pytest.approx(a.delta_e, rel=1e-12, abs=1e-12)
    assert abs(b.e_tilde_plus) == pytest.approx(abs(a.e_tilde_plus), rel=1e-12)
    assert b.f_plus == pytest.approx(a.f_plus, rel=1e-13)
    assert b.f_minus == pytest.approx(a.f_minus, rel=1e-13)
    assert abs(b.e_tilde_plus) == pytest.approx(abs(b.e_tilde_minus), rel=1e-14)
    assert b.f_plus >= b.f_minus


def test_strain_breaks_azimuthal_symmetry(zfs, consts):
    # E~ = E + w^2 exp(2i phi) / 2D: x and y transverse fields differ at E > 0,
    # and exact diagonalization agrees on the difference
    px = perturbative_transitions(zfs, FieldVector(25, 0, 0), consts=consts)
    py = perturbative_transitions(zfs, FieldVector(0, 25, 0), consts=consts)
    assert abs(px.e_tilde_plus) - abs(py.e_tilde_plus) == pytest.approx(2 * (2.8025 * 25) ** 2 / (2 * 2870))
    ex = exact_transitions(build_hamiltonian(zfs, FieldVector(25, 0, 0), consts))
    ey = exact_transitions(build_hamiltonian(zfs, FieldVector(0, 25, 0), consts))
    assert ex[1] - ex[0] == pytest.approx(px.f_plus - px.f_minus, abs=0.01)
    assert ey[1] - ey[0] == pytest.approx(py.f_plus - py.f_minus, abs=0.01)


# Beyond 45 deg from the strain axis |E~| passes through zero inside 0..150 G and the
# error is no longer monotonic, so the property is checked on the strain side only.
@pytest.mark.parametrize("phi", np.radians([0.0, 20.0, 45.0]))
def test_validity_decays_monotonically(zfs, consts, phi):
    errs = [max(perturbation_error(zfs, FieldVector(b * np.cos(phi), b * np.sin(phi), 0), consts))
            for b in np.arange(0, 151, 5.0)]
    assert np.all(np.diff(errs) >= -1e-9)


def test_agreement_below_25_gauss(zfs, consts):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(2000):
        v = rng.normal(size=3)
        v *= 25 * rng.random() ** (1 / 3) / np.linalg.norm(v)
        worst = max(worst, *perturbation_error(zfs, FieldVector(*v), consts))
    assert worst <= 0.05


def test_field_vector_helpers():
    f = FieldVector.from_polar(25, 90)
    assert (f.bx, f.by, f.bz) == (25, 0, 0)
    f = FieldVector.from_polar(2, 60, 90)
    assert f.magnitude == pytest.approx(2)
    assert np.degrees(f.theta) == pytest.approx(60)
    with pytest.raises(ValueError):
        FieldVector(np.nan, 0, 0)
    with pytest.raises(ValueError):
        ZfsParams(2870, -1)
    with pytest.raises(ValueError):
        PhysicalConstants(0)
