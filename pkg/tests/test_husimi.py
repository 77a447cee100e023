import numpy as np
import pytest

from oracles import css_full
from spinmetro.husimi import (
    SphericalGrid,
    husimi_q,
    q_csv,
    read_grid_binary,
    spherical_grid,
    write_grid_binary,
)
from spinmetro.dynamics import build_oat, evolve
from spinmetro.spin import coherent_spin_state, dicke_embed, ghz_state, random_symmetric_state


def test_css_peak_and_antipode():
    grid = SphericalGrid([np.pi / 2, np.pi / 2], [0.0, np.pi])
    q = husimi_q(coherent_spin_state(8, "x"), grid).values
    assert q[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert q[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_matches_overlap_oracle_on_random_points():
    rng = np.random.default_rng(0)
    n = 4
    psi = dicke_embed(random_symmetric_state(n, rng))
    thetas = np.sort(rng.uniform(0, np.pi, 5))
    phis = np.sort(rng.uniform(0, 2 * np.pi, 4))
    q = husimi_q(psi, SphericalGrid(thetas, phis)).values
    for i, t in enumerate(thetas):
        for j, p in enumerate(phis):
            assert q[i, j] == pytest.approx(abs(np.vdot(css_full(n, t, p), psi.amplitudes)) ** 2, abs=1e-12)


def test_poles_of_css_along_x():
    # |<up...up|CSS_x>|^2 = 2^-N
    q = husimi_q(coherent_spin_state(6, "x"), spherical_grid(3, 4)).values
    np.testing.assert_allclose(q[0], 1 / 64, atol=1e-14)
    np.testing.assert_allclose(q[-1], 1 / 64, atol=1e-14)


def test_ghz_poles():
    q = husimi_q(ghz_state(5), spherical_grid(5, 8)).values
    np.testing.assert_allclose(q[0], 0.5, atol=1e-14)
    np.testing.assert_allclose(q[-1], 0.5, atol=1e-14)


def test_density_integrates_to_one():
    s = evolve(coherent_spin_state(10, "x"), build_oat(10, 1.0), 0.4)
    g = husimi_q(s, spherical_grid(181, 240), density=True)
    assert g.sphere_integral() == pytest.approx(1.0, abs=1e-4)


def test_full_and_dicke_agree_and_large_n_works():
    s = random_symmetric_state(5, np.random.default_rng(1))
    grid = spherical_grid(7, 9)
    np.testing.assert_allclose(husimi_q(s, grid).values, husimi_q(dicke_embed(s), grid).values, atol=1e-13)
    big = husimi_q(coherent_spin_state(300, "x"), grid).values
    assert np.all(np.isfinite(big)) and big.max() <= 1 + 1e-12


def test_csv_and_binary_round_trip(tmp_path):
    s = coherent_spin_state(3, "y")
    g = q_csv(s, (4, 6), tmp_path / "q.csv", header_comment="hdr")
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == "# hdr" and lines[1] == "theta,phi,Q" and len(lines) == 2 + 24
    write_grid_binary(g, tmp_path / "q.bin")
    back = read_grid_binary(tmp_path / "q.bin")
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.phis, g.phis)
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_grid_binary(tmp_path / "bad.bin")


def test_grid_validation():
    with pytest.raises(ValueError):
        SphericalGrid([0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        SphericalGrid([0.0, 4.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        SphericalGrid([0.0, 1.0], [0.0, 1.0], values=np.zeros((3, 3)))
