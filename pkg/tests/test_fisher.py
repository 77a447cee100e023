import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jz_distribution
from spinmetro.dynamics import build_oat, evolve
from spinmetro.errors import DegenerateFit, InsufficientShots, LengthMismatch, ZeroTheta
from spinmetro.fisher import (
    OutcomeDistribution,
    classical_fisher,
    fisher_exact,
    fisher_exact_fit,
    fisher_fit,
    fisher_sampled,
    fisher_single,
    hellinger_curve,
    hellinger_sq,
    imprint,
    max_classical_fisher,
    optimize_alpha,
    pz,
    qfi_pure,
    sample_branches,
)
from spinmetro.measurement import ConfusionModel
from spinmetro.spin import coherent_spin_state, dicke_embed, ghz_state


def _oat(n, t, rep="dicke"):
    return evolve(coherent_spin_state(n, "x", rep), build_oat(n, 1.0, rep), t)


@pytest.mark.parametrize("n", [1, 4, 9])
@pytest.mark.parametrize("theta", [-0.05, 0.02, 0.3])
def test_css_hellinger_closed_form(n, theta):
    # two coherent states at angle theta: Bhattacharyya coefficient cos^N(theta/2)
    d2 = hellinger_curve(coherent_spin_state(n, "x"), 0.0, [theta])[0]
    assert d2 == pytest.approx(1 - np.cos(theta / 2) ** n, abs=1e-13)


def test_pz_matches_full_space_oracle():
    s = _oat(4, 0.3)
    full = dicke_embed(s)
    np.testing.assert_allclose(pz(full).probabilities, jz_distribution(full.amplitudes), atol=1e-14)
    np.testing.assert_allclose(pz(s).probabilities, pz(full).probabilities, atol=1e-12)
    assert pz(coherent_spin_state(3, "z")).mean() == pytest.approx(1.5)


def test_classical_fisher_css_and_ghz():
    assert classical_fisher(coherent_spin_state(10, "x")) == pytest.approx(10, rel=1e-8)
    # the cat state saturates the Heisenberg limit F_Q = N^2
    assert qfi_pure(ghz_state(6)) == pytest.approx(36)


def test_hellinger_small_theta_converges_to_classical_fisher():
    s = _oat(8, 0.2)
    fc = classical_fisher(s, 0.1)
    fit = fisher_exact_fit(s, 0.1, thetas=[-0.01, -0.005, 0.005, 0.01])
    assert fit.F == pytest.approx(fc, rel=2e-3)
    assert fc <= qfi_pure(s) * (1 + 1e-9)


def test_fisher_fit_recovers_synthetic_coefficients():
    th = np.array([-0.1, -0.05, 0.05, 0.1])
    est = fisher_fit(th, 0.75 * th**2 + 0.2 * th**3)
    assert est.F == pytest.approx(6.0, rel=1e-12)
    assert est.coefficients[1] == pytest.approx(0.2)
    quad = fisher_fit(th, 0.5 * th**2, cubic=False)
    assert quad.F == pytest.approx(4.0)


def test_fisher_errors():
    with pytest.raises(ZeroTheta):
        fisher_single(0.1, 0.0)
    with pytest.raises(DegenerateFit):
        fisher_fit([0.1], [0.01])
    with pytest.raises(DegenerateFit):
        fisher_fit([0.1, 0.1], [0.01, 0.01])
    with pytest.raises(LengthMismatch):
        fisher_fit([0.1, 0.2], [0.01])
    with pytest.raises(LengthMismatch):
        hellinger_sq([0.5, 0.5], [1.0, 0.0, 0.0])
    with pytest.raises(InsufficientShots):
        sample_branches(coherent_spin_state(2, "x"), 0.0, 0.05, 10, seed=0)
    with pytest.raises(ValueError):
        OutcomeDistribution([0.5, 0.6])


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=8))
@settings(max_examples=40, deadline=None)
def test_hellinger_properties(weights):
    p = np.array(weights) / np.sum(weights)
    q = p[::-1]
    assert hellinger_sq(p, p) == pytest.approx(0.0, abs=1e-12)
    assert 0 <= hellinger_sq(p, q) <= 1
    assert hellinger_sq(p, q) == pytest.approx(hellinger_sq(q, p))


def test_imprint_order():
    # alpha about x first, then theta about y
    s = coherent_spin_state(1, "z")
    out = imprint(s, np.pi / 2, np.pi / 2)
    # z --(x, pi/2)--> -y, which a y rotation leaves alone
    assert pz(out).mean() == pytest.approx(0.0, abs=1e-12)
    assert pz(imprint(s, 0.0, np.pi / 2)).mean() == pytest.approx(0.0, abs=1e-12)


def test_optimize_alpha_tie_break_and_values():
    a, est, values = optimize_alpha(coherent_spin_state(6, "x"), -0.05, [-0.2, 0.0, 0.2])
    assert a == 0.0
    assert est.F == pytest.approx(values[1])
    a, _, _ = optimize_alpha(coherent_spin_state(6, "x"), -0.05, [0.3, -0.3])
    assert a == -0.3


def test_fisher_exact_single_theta():
    est = fisher_exact(coherent_spin_state(4, "x"), 0.0, -0.05)
    assert est.F == pytest.approx(8 * (1 - np.cos(0.025) ** 4) / 0.0025)
    assert est.method == "single"
    assert json.loads(est.to_json())["theta"] == -0.05


def test_sampled_fisher_is_consistent_with_exact():
    s = _oat(6, 0.15)
    exact = fisher_exact(s, 0.0, -0.05).F
    est = fisher_sampled(s, 0.0, -0.05, shots=200_000, seed=4)
    assert abs(est.F - exact) < 3 * est.std
    assert est.provenance["scheme"]["groups"] == 240


def test_sampled_fisher_with_readout_correction():
    n = 4
    s = _oat(n, 0.15, "full")
    model = ConfusionModel.random(n, np.random.default_rng(6))
    exact = fisher_exact(s, 0.0, -0.05).F
    est = fisher_sampled(s, 0.0, -0.05, 200_000, seed=6, confusion=model, simulate_errors=model)
    assert abs(est.F - exact) < 3 * est.std
    assert est.provenance["corrected"]


def test_zero_branch_is_shared_across_theta():
    s = _oat(4, 0.2)
    a = sample_branches(s, 0.1, -0.05, 2000, seed=1, theta_index=0)
    b = sample_branches(s, 0.1, 0.05, 2000, seed=1, theta_index=1)
    assert a["zero"].counts == b["zero"].counts
    assert a["theta"].counts != b["theta"].counts
    c = sample_branches(s, 0.1, -0.05, 2000, seed=1, stream=(7,))
    assert c["zero"].counts != a["zero"].counts


def test_max_classical_fisher_refines_between_grid_points():
    s = _oat(10, 0.25)
    coarse = max(classical_fisher(s, a) for a in np.linspace(-0.6, 0.6, 61))
    alpha, best = max_classical_fisher(s)
    assert best >= coarse
    assert best <= qfi_pure(s) * (1 + 1e-9)
    # the refined point is a local maximum
    assert best >= classical_fisher(s, alpha + 1e-3) and best >= classical_fisher(s, alpha - 1e-3)
    assert max_classical_fisher(coherent_spin_state(4, "x"))[1] == pytest.approx(4, rel=1e-8)
