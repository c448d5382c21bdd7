import csv
import math
import threading

import numpy as np
import pytest

from platoon_risk import approx
from platoon_risk.approx import (
    RationalFit,
    averaged_alphas,
    basis,
    error_scan,
    f_tilde,
    fit_rational,
    grid_fit,
    in_window,
    orthonormalize,
    pole,
    s2_grid,
    s_star,
    sigma_tilde,
    split,
    truncate,
    window,
)
from platoon_risk.errors import IllConditionedBasis, InvalidParameter, OutOfDomain, OutsideWindow
from platoon_risk.graph import graph_spectrum, make_complete, make_path, make_random_connected
from platoon_risk.stability import in_region_S, theta
from platoon_risk.variance import f_value, sigma_vector


@pytest.mark.parametrize("s2", [0.1, 0.37, 0.5, 0.9])
def test_s_star_residual(s2):
    x = s_star(s2)
    assert 0 < x < math.pi / 2
    assert abs(x / math.tan(x) - s2) <= 1e-12


def test_s_star_monotone_and_domain():
    assert s_star(0.1) > s_star(0.9)
    for bad in (0.05, 0.95):
        with pytest.raises(OutOfDomain):
            s_star(bad)


def test_pole_is_right_edge_of_S():
    for s2 in (0.1, 0.5, 0.9):
        assert pole(s2) == pytest.approx(theta(s2), rel=1e-14)


@pytest.fixture(scope="module")
def mid_fit():
    return fit_rational(0.5)


def test_fit_shapes(mid_fit):
    assert isinstance(mid_fit, RationalFit)
    assert mid_fit.alpha.shape == (8,)
    assert mid_fit.a_coeffs.shape == (6,)
    assert mid_fit.b_coeffs.shape == (5,)


@pytest.mark.parametrize("s2", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_gram_orthonormal_and_residual_orthogonal(s2):
    fit = fit_rational(s2)
    np.testing.assert_allclose(fit.gram, np.eye(8), atol=1e-8)
    assert np.max(np.abs(fit.residual_projection)) <= 1e-7


def test_split_identity(mid_fit):
    s = np.linspace(*mid_fit.window, 50)
    np.testing.assert_allclose(mid_fit(s), mid_fit.pre_split(s), rtol=1e-10)
    A, B = split(mid_fit.alpha, mid_fit.pole)
    np.testing.assert_array_equal(A, mid_fit.a_coeffs)
    np.testing.assert_array_equal(B, mid_fit.b_coeffs)


def test_full_fit_close_to_kernel(mid_fit):
    s = np.linspace(*mid_fit.window, 40)
    exact = np.array([f_value(float(x), 0.5) for x in s])
    assert np.max(np.abs(mid_fit.pre_split(s, full=True) / exact - 1)) < 1e-3


@pytest.mark.parametrize("s2", [0.3, 0.5, 0.7])
def test_mid_range_coefficients(s2):
    al = fit_rational(s2).alpha
    for k, ref in [(2, -0.0742), (3, 0.0198), (4, -0.0036)]:
        assert al[k] == pytest.approx(ref, rel=0.15)
    # dropped terms: order-of-magnitude check
    assert abs(al[5]) < 2e-3
    assert abs(al[6]) < 5e-4
    assert abs(al[7]) < 1e-4


def test_averaged_coefficients():
    al = averaged_alphas()
    for k, ref in [(2, -0.0742), (3, 0.0198), (4, -0.0036)]:
        assert al[k] == pytest.approx(ref, rel=0.15)


def test_truncate_keeps_degree_four():
    al = np.arange(8.0)
    np.testing.assert_array_equal(truncate(al), [0, 1, 2, 3, 4, 0, 0, 0])


def test_orthonormalize_detects_rank_loss():
    x = np.linspace(0.1, 1.0, 64)
    w = np.full(64, 0.9 / 64)
    T = np.column_stack([np.ones_like(x), x, 2 * x + 1])
    with pytest.raises(IllConditionedBasis):
        orthonormalize(T, w)


def test_orthonormalize_tracks_coefficients():
    x, w = np.polynomial.legendre.leggauss(64)
    x = 0.5 * (x + 1) * 0.8 + 0.1
    w = 0.4 * w
    T = basis(x, 1.2)
    Psi, C = orthonormalize(T, w)
    np.testing.assert_allclose(Psi, T @ C.T, rtol=1e-7, atol=1e-7)


def test_grid_layout():
    g = s2_grid()
    assert g[0] == 0.1 and g[-1] == 0.9
    d = np.diff(g)
    np.testing.assert_allclose(d[g[:-1] < 0.845], 0.01, atol=1e-9)
    np.testing.assert_allclose(d[g[:-1] >= 0.85 - 1e-9], 0.0025, atol=1e-9)


def test_grid_fit_write_once_across_threads():
    approx._fits.pop(0.42, None)
    out = []

    def worker():
        out.append(grid_fit(0.42))

    threads = [threading.Thread(target=worker) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(f is out[0] for f in out)
    assert grid_fit(0.42) is out[0]


@pytest.mark.parametrize("s1, s2", [(0.05, 0.5), (1.2, 0.5), (0.5, 0.05), (0.5, 0.95)])
def test_f_tilde_outside_window(s1, s2):
    assert not in_window(s1, s2)
    with pytest.raises(OutsideWindow):
        f_tilde(s1, s2)


def test_window_inside_S():
    for s2 in np.linspace(0.1, 0.9, 17):
        lo, hi = window(float(s2))
        assert in_region_S(lo, s2) and in_region_S(hi, s2)


def test_f_tilde_minimum_location():
    s2 = 0.5
    s = np.linspace(*window(s2), 400)
    exact = np.array([f_value(float(x), s2) for x in s])
    approx_vals = np.array([f_tilde(float(x), s2) for x in s])
    assert np.all(approx_vals > 0)
    assert abs(s[np.argmin(exact)] - s[np.argmin(approx_vals)]) <= 0.02


def test_sigma_tilde_matches_exact():
    tau, beta = 0.2, 2.0
    g = make_random_connected(8, 0.8, seed=4, weight_range=(0.5, 2.0))
    s = graph_spectrum(g.scaled(1.0 / (graph_spectrum(g).eigenvalues[-1] * tau)))
    assert all(in_window(float(l * tau), beta * tau) for l in s.eigenvalues[1:])
    exact = sigma_vector(s, 1.0, tau, beta).sigma
    approx_sigma = sigma_tilde(s, 1.0, tau, beta).sigma
    np.testing.assert_allclose(approx_sigma / exact, 1.0, atol=1e-3)


def test_sigma_tilde_complete_constant():
    md = sigma_tilde(graph_spectrum(make_complete(6, 1.111 / 0.6)), 1.0, 0.1, 2.2)
    np.testing.assert_allclose(md.sigma, md.sigma[0], rtol=1e-14)


def test_sigma_tilde_reports_modes():
    s = graph_spectrum(make_path(4, 1.0))  # eigenvalues 0, 0.586, 2, 3.41
    with pytest.raises(OutsideWindow) as info:
        sigma_tilde(s, 1.0, 0.1, 3.0)
    assert info.value.modes == (2,)


@pytest.fixture(scope="module")
def small_scan():
    return error_scan(20, 16)


def test_error_scan_small(small_scan, tmp_path):
    assert np.all(small_scan.eta >= 0)
    assert small_scan.max_eta <= 1e-3
    path = tmp_path / "scan.csv"
    small_scan.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["s1", "s2", "f_exact", "f_tilde", "eta"]
    assert len(rows) == 1 + 20 * 16


def test_error_scan_refinement_stable(small_scan):
    fine = error_scan(40, 32)
    assert fine.max_eta <= 2 * small_scan.max_eta


def test_error_scan_minimum_grid():
    with pytest.raises(InvalidParameter):
        error_scan(9, 20)
