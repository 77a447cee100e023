import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import collective, css_full, dicke_collective, site_op, SZ
from spinmetro.errors import CapacityExceeded, InvalidDirection, NonSymmetricState, ReprMismatch
from spinmetro.spin import (
    Representation,
    as_direction,
    basis_state,
    coherent_spin_state,
    collective_operator,
    dicke_embed,
    dicke_project,
    dicke_state,
    expectation,
    ghz_state,
    magnetic_numbers,
    random_product_state,
    random_symmetric_state,
    rotate,
    spin_components,
    spin_mean_and_covariance,
)

AXES = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("axis", "xyz")
def test_full_operators_match_pauli_sums(n, axis):
    ours = collective_operator(axis, "full", n).dense()
    np.testing.assert_allclose(ours, collective(n, AXES[axis]), atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 5, 7])
@pytest.mark.parametrize("axis", "xyz")
def test_dicke_operators_are_symmetric_restrictions(n, axis):
    ours = collective_operator(axis, "dicke", n).dense()
    np.testing.assert_allclose(ours, dicke_collective(n, AXES[axis]), atol=1e-12)


@pytest.mark.parametrize("rep,n", [("full", 6), ("dicke", 6), ("dicke", 40)])
def test_su2_commutators(rep, n):
    jx, jy, jz = (op.dense() for op in spin_components(Representation.full(n) if rep == "full" else Representation.dicke(n)))
    for a, b, c in ((jx, jy, jz), (jy, jz, jx), (jz, jx, jy)):
        assert np.linalg.norm(a @ b - b @ a - 1j * c) < 1e-12


def test_casimir_in_symmetric_sector():
    n = 9
    jx, jy, jz = (op.dense() for op in spin_components(Representation.dicke(n)))
    j = n / 2
    np.testing.assert_allclose(jx @ jx + jy @ jy + jz @ jz, j * (j + 1) * np.eye(n + 1), atol=1e-12)


def test_conventions_single_qubit():
    # |0> is spin up along z and qubit 0 is the most significant bit
    jz = collective_operator("z", "full", 1).dense()
    np.testing.assert_allclose(jz, SZ)
    psi = basis_state(3, "100").amplitudes
    np.testing.assert_allclose(site_op(SZ, 0, 3) @ psi, -0.5 * psi)
    np.testing.assert_allclose(magnetic_numbers(4), [2, 1, 0, -1, -2])


@given(
    theta=st.floats(0, np.pi),
    phi=st.floats(0, 2 * np.pi),
    n=st.integers(1, 6),
)
@settings(max_examples=30, deadline=None)
def test_coherent_state_mean_spin(theta, phi, n):
    d = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    for rep in ("full", "dicke"):
        mean, cov = spin_mean_and_covariance(coherent_spin_state(n, d, rep))
        np.testing.assert_allclose(mean, n / 2 * np.array(d), atol=1e-10)
        # CSS variance is N/4 perpendicular to the mean spin and 0 along it
        np.testing.assert_allclose(np.array(d) @ cov @ np.array(d), 0, atol=1e-10)
        np.testing.assert_allclose(np.trace(cov), n / 2, atol=1e-10)


def test_coherent_state_full_matches_product_oracle():
    theta, phi = 1.1, 2.3
    d = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    psi = coherent_spin_state(4, d, "full").amplitudes
    assert abs(abs(np.vdot(css_full(4, theta, phi), psi)) - 1) < 1e-12


def test_dicke_embed_project_round_trip():
    rng = np.random.default_rng(3)
    s = random_symmetric_state(5, rng)
    back, weight = dicke_project(dicke_embed(s))
    assert weight == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)


def test_dicke_embed_matches_css():
    a = dicke_embed(coherent_spin_state(6, "x", "dicke"))
    b = coherent_spin_state(6, "x", "full")
    assert abs(a.overlap(b)) == pytest.approx(1.0, abs=1e-12)


def test_project_rejects_nonsymmetric_state():
    with pytest.raises(NonSymmetricState):
        dicke_project(basis_state(2, "01"))
    s, w = dicke_project(basis_state(2, "01"), check=False)
    assert w == pytest.approx(0.5)
    assert s.norm == pytest.approx(1.0)


def test_random_product_states_are_mostly_not_symmetric():
    s = random_product_state(4, np.random.default_rng(0))
    assert dicke_project(s, check=False)[1] < 1 - 1e-6


@pytest.mark.parametrize("rep", ["full", "dicke"])
def test_rotation_matches_expm(rep):
    from scipy.linalg import expm

    n = 4
    rng = np.random.default_rng(5)
    s = random_symmetric_state(n, rng)
    if rep == "full":
        s = dicke_embed(s)
    axis = np.array([0.3, -0.5, 0.8])
    axis /= np.linalg.norm(axis)
    op = collective_operator(axis, rep, n).dense()
    expected = expm(-1j * 0.7 * op) @ s.amplitudes
    np.testing.assert_allclose(rotate(s, axis, 0.7).amplitudes, expected, atol=1e-12)


def test_rotating_css_by_half_turn_flips_it():
    s = rotate(coherent_spin_state(5, "z", "dicke"), "x", np.pi)
    mean, _ = spin_mean_and_covariance(s)
    np.testing.assert_allclose(mean, [0, 0, -2.5], atol=1e-12)


def test_ghz_variance():
    for rep in ("full", "dicke"):
        _, cov = spin_mean_and_covariance(ghz_state(6, rep))
        assert cov[2, 2] == pytest.approx(9.0)


def test_expectation_powers_and_dicke_state():
    s = dicke_state(6, 1)
    jz = collective_operator("z", s.representation)
    assert expectation(s, jz, 1) == pytest.approx(1.0)
    assert expectation(s, jz, 4) == pytest.approx(1.0)
    jx = collective_operator("x", s.representation)
    # <J_x^2> = (j(j+1) - m^2)/2 for a Dicke state
    assert expectation(s, jx, 2) == pytest.approx((3 * 4 - 1) / 2)


def test_errors():
    with pytest.raises(InvalidDirection):
        as_direction((0, 0, 0))
    with pytest.raises(InvalidDirection):
        as_direction("w")
    with pytest.raises(CapacityExceeded):
        Representation.full(15)
    with pytest.raises(ReprMismatch):
        expectation(coherent_spin_state(2, "x", "full"), collective_operator("z", "dicke", 2))
    with pytest.raises(ValueError):
        dicke_state(4, 0.5)


def test_operator_power_cache_is_consistent():
    op = collective_operator((1 / np.sqrt(2), 0, 1 / np.sqrt(2)), "full", 3)
    dense = op.dense()
    p3 = op.power(3)
    np.testing.assert_allclose(p3.toarray(), dense @ dense @ dense, atol=1e-13)
    assert op.power(3) is p3
