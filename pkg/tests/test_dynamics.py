import numpy as np
import pytest
from scipy.linalg import expm

from oracles import css_full, oat_propagator, xy_hamiltonian
from spinmetro.dynamics import (
    CouplingMatrix,
    build_oat,
    build_xy,
    evolve,
    load_coupling_csv,
    save_coupling_csv,
    symmetric_leakage,
    trajectory,
    uniform_equivalence_report,
)
from spinmetro.errors import InvalidCoupling, ReprMismatch
from spinmetro.spin import coherent_spin_state, dicke_embed, dicke_project, spin_mean_and_covariance


@pytest.mark.parametrize("chi,t", [(1.0, 0.37), (-0.8, 1.3)])
def test_oat_full_matches_expm(chi, t):
    n = 4
    psi = evolve(coherent_spin_state(n, "x", "full"), build_oat(n, chi, "full"), t)
    expected = oat_propagator(n, chi, t) @ css_full(n, np.pi / 2, 0)
    np.testing.assert_allclose(psi.amplitudes, expected, atol=1e-12)


def test_oat_dicke_and_full_agree():
    n = 7
    a = evolve(coherent_spin_state(n, "x", "dicke"), build_oat(n, 1.0, "dicke"), 0.9)
    b = evolve(coherent_spin_state(n, "x", "full"), build_oat(n, 1.0, "full"), 0.9)
    assert abs(dicke_embed(a).overlap(b)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_oat_mean_spin_decay():
    # <J_x>(t) = (N/2) cos^(N-1)(chi t) for the CSS along +x
    n, chi = 10, 1.0
    ham = build_oat(n, chi)
    for t in (0.1, 0.3, 0.7):
        mean, _ = spin_mean_and_covariance(evolve(coherent_spin_state(n, "x"), ham, t))
        assert mean[0] == pytest.approx(n / 2 * np.cos(chi * t) ** (n - 1), abs=1e-12)
        assert abs(mean[1]) < 1e-12 and abs(mean[2]) < 1e-12


def test_xy_matches_explicit_hamiltonian():
    rng = np.random.default_rng(2)
    n = 4
    chi = rng.normal(size=(n, n))
    chi = (chi + chi.T) / 2
    ham = build_xy(CouplingMatrix(chi))
    np.fill_diagonal(chi, 0)
    h = xy_hamiltonian(chi)
    np.testing.assert_allclose(ham.matrix.toarray(), h, atol=1e-14)
    psi0 = coherent_spin_state(n, (0.6, 0.0, 0.8), "full")
    np.testing.assert_allclose(evolve(psi0, ham, 0.6).amplitudes, expm(-0.6j * h) @ psi0.amplitudes, atol=1e-12)
    np.testing.assert_allclose(ham.eigenvalues(), np.linalg.eigvalsh(h), atol=1e-12)


def test_uniform_xy_conserves_symmetry():
    ham = build_xy(CouplingMatrix.uniform(5, 0.4))
    psi = evolve(coherent_spin_state(5, "x", "full"), ham, 2.0)
    assert symmetric_leakage(psi) < 1e-12


def test_nonuniform_xy_leaks_out_of_symmetric_sector():
    chi = np.array([[0, 1.0, 0.2], [1.0, 0, 0.5], [0.2, 0.5, 0]])
    psi = evolve(coherent_spin_state(3, "x", "full"), build_xy(CouplingMatrix(chi)), 1.0)
    assert symmetric_leakage(psi) > 1e-3


def test_uniform_equivalence_exact_for_uniform_couplings():
    rep = uniform_equivalence_report(6, 0.7)
    assert rep.residual < 1e-10
    assert rep.times.size == 10
    assert rep.chi_mean == pytest.approx(0.7)


def test_uniform_equivalence_degrades_with_disorder():
    rng = np.random.default_rng(0)
    chi = 1.0 + 0.1 * rng.normal(size=(6, 6))
    chi = (chi + chi.T) / 2
    rep = uniform_equivalence_report(6, None, coupling=chi)
    assert rep.residual > 1e-6


def test_energy_is_conserved():
    ham = build_oat(6, 1.3)
    psi0 = coherent_spin_state(6, (0.6, 0, 0.8))
    energies = [ham.energy(s) for s in trajectory(psi0, ham, np.linspace(0, 3, 7))]
    np.testing.assert_allclose(energies, energies[0], atol=1e-12)


def test_coupling_validation_and_csv_round_trip(tmp_path):
    with pytest.raises(InvalidCoupling):
        CouplingMatrix(np.array([[0, 1], [2, 0]]))
    with pytest.raises(InvalidCoupling):
        CouplingMatrix(np.ones((2, 3)))
    c = CouplingMatrix(np.array([[5.0, 0.3, 0.1], [0.3, 0, 0.2], [0.1, 0.2, 0]]))
    assert c.chi[0, 0] == 0
    assert c.mean_coupling() == pytest.approx(0.2)
    assert not c.is_uniform()
    path = tmp_path / "c.csv"
    save_coupling_csv(c, path)
    np.testing.assert_array_equal(load_coupling_csv(path).chi, c.chi)
    path.write_text("0,a\nb,0\n")
    with pytest.raises(InvalidCoupling):
        load_coupling_csv(path)


def test_representation_mismatch():
    with pytest.raises(ReprMismatch):
        evolve(coherent_spin_state(3, "x", "dicke"), build_oat(3, 1.0, "full"), 0.1)


def test_dicke_project_after_oat():
    n = 5
    full = evolve(coherent_spin_state(n, "x", "full"), build_oat(n, 1.0, "full"), 0.4)
    dicke = evolve(coherent_spin_state(n, "x", "dicke"), build_oat(n, 1.0, "dicke"), 0.4)
    proj, w = dicke_project(full)
    assert w == pytest.approx(1.0, abs=1e-12)
    assert proj.fidelity(dicke) == pytest.approx(1.0, abs=1e-12)
