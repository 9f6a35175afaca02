import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltawell import floquet, forcing, kernel, volterra


@pytest.fixture
def sine():
    return forcing.sine_forcing(0.5, 1.5)


def test_lattice_coefficients_sign_convention(sine):
    c = floquet.lattice_coefficients(sine)
    # c_j = -C_{-j}; for a sine this equals C_j
    assert np.allclose(c, sine.coefficient_array(1))
    geo = forcing.build_forcing("geometric", 1.1, r=-0.45, lam=0.3)
    cg = floquet.lattice_coefficients(geo, 3)
    assert np.allclose(cg[4:], -0.45 * 0.3 ** np.arange(1, 4))


def test_single_harmonic_is_tridiagonal(sine):
    A = floquet.build_lattice_system(sine, 0.4 + 0.2j, 20).matrix
    i, j = np.nonzero(np.abs(A) > 0)
    assert np.max(np.abs(i - j)) == 1
    assert np.allclose(np.diag(A), 1)


def test_b_at_one():
    w = kernel.sqrt_fourth_quadrant(1 - 1j)
    assert floquet.b_coeff(1.0) == pytest.approx(-1j * (1 + w), abs=1e-15)
    assert floquet.h_coeff(2.0) == -0.5


def test_b_and_laplace_M():
    # b(p) = -(i/p)(1 + sqrt(1 - ip)) = -(2i/p + L_M(p))
    p = np.array([0.3 + 1j, 2 - 5j, 1.0])
    assert np.allclose(floquet.b_coeff(p), -(2j / p + kernel.laplace_M(p)), atol=1e-14)


def test_b_decay_along_lattice():
    n = np.array([1e3, 4e3, 1.6e4])
    b = np.abs(floquet.b_coeff(0.2 + 1j * n * 1.5))
    assert np.allclose(b[:-1] / b[1:], 2.0, rtol=3e-2)


def test_zero_forcing_gives_zero():
    spec = forcing.build_forcing("harmonic-list", 1.2, coefficients=[])
    sol = floquet.solve_lattice(floquet.build_lattice_system(spec, 0.5, 16))
    assert np.all(sol.y == 0)


def test_doubling_converges(sine):
    sol = floquet.solve_lattice(floquet.build_lattice_system(sine, 0.3 + 0.4j, 16))
    assert sol.converged
    assert sol.doubling_change < floquet.DOUBLING_RTOL
    assert sol.residual < 1e-12
    assert sol.n[sol.N] == 0 and sol.value(0) == sol.y0


def test_lattice_matches_laplace_relation(sine):
    # y(p) = sum_j C_j [1/(p - ijw) + (i/(p - ijw))(1 + sqrt(1 - i(p - ijw))) y(p - ijw)]
    p = 0.5 + 0.3j
    sol = floquet.solve_lattice(floquet.build_lattice_system(sine, p, 32))
    total = 0j
    for j in (-1, 1):
        q = p - 1j * j * sine.omega
        w = kernel.sqrt_fourth_quadrant(1 - 1j * q)
        total += sine.coefficient(j) * (1 / q + 1j / q * (1 + w) * sol.value(-j))
    assert abs(total - sol.y0) < 1e-12


def test_lattice_against_time_domain():
    spec = forcing.sine_forcing(0.2, 1.5)
    Y = volterra.solve_Y(spec, volterra.bound_state(), 80.0, 5e-3)
    for p in (0.6, 0.8 + 1j):
        ref = volterra.laplace_of_series(Y, p, tail_period=2 * np.pi / 1.5)[0]
        assert abs(floquet.lattice_y(spec, p) - ref) < 1e-4 * abs(ref)


def test_cauchy_riemann(sine):
    p, e = 0.4 + 0.7j, 1e-5
    y = lambda z: floquet.lattice_y(sine, z)  # noqa: E731
    dx = (y(p + e) - y(p - e)) / (2 * e)
    dy = (y(p + 1j * e) - y(p - 1j * e)) / (2j * e)
    assert abs(dx - dy) < 1e-6 * abs(dx)


def test_square_root_signature_at_branch_point():
    spec = forcing.sine_forcing(0.5, 1.1)
    s_r = floquet.classify_singularities(spec, scan=False).s_r
    eps = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    y = np.array([floquet.lattice_y(spec, 1j * s_r + e) for e in eps])
    y4 = np.array([floquet.lattice_y(spec, 1j * s_r + e / 4) for e in eps])
    d = np.abs(y - y4)
    slope = np.polyfit(np.log(eps), np.log(d), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.1)


def test_check_point_errors(sine):
    with pytest.raises(ValueError, match="Re p0"):
        floquet.build_lattice_system(sine, -0.1, 16)
    with pytest.raises(ValueError, match="n = 0"):
        floquet.build_lattice_system(sine, 0.0, 16)
    s_r = floquet.classify_singularities(sine, scan=False).s_r
    with pytest.raises(ValueError, match="branch"):
        floquet.build_lattice_system(sine, 1j * s_r, 16)


@given(st.floats(-50, 50), st.floats(0.1, 5))
def test_normalize_p0(im, omega):
    p0, n = floquet.normalize_p0(complex(0.3, im), omega)
    assert 0 <= p0.imag < omega
    assert abs(p0 + 1j * n * omega - complex(0.3, im)) < 1e-9 * max(1, abs(im))


@pytest.mark.parametrize("omega, k0, s_r", [(1.1, -1, 0.1), (1.5, -1, 0.5), (0.3, -4, 0.2)])
def test_branch_point(omega, k0, s_r):
    rep = floquet.classify_singularities(forcing.sine_forcing(0.3, omega), scan=False)
    assert rep.k0 == k0
    assert rep.s_r == pytest.approx(s_r, abs=1e-12)
    assert 1 + rep.s_r + rep.k0 * omega == pytest.approx(0, abs=1e-12)
    assert not rep.resonant


@pytest.mark.parametrize("omega", [0.5, 1.0])
def test_resonant_frequencies(omega):
    rep = floquet.classify_singularities(forcing.sine_forcing(0.3, omega), scan=False)
    assert rep.resonant and rep.s_r == 0


def test_no_poles_for_weak_sine():
    rep = floquet.classify_singularities(forcing.sine_forcing(0.3, 1.3))
    assert rep.pole_candidates == ()


def test_pole_cancellation_sine():
    rep = floquet.check_pole_cancellation(forcing.sine_forcing(0.3, 1.3), 64)
    assert rep.margin > 1e-3
    assert rep.relative_change < 1e-6


def test_pole_cancellation_two_harmonics():
    spec = forcing.build_forcing("harmonic-list", 1.3, coefficients=[-0.1j, 0.05])
    rep = floquet.check_pole_cancellation(spec, 64)
    assert rep.margin > 1e-4 and rep.relative_change < 1e-6


def test_pole_cancellation_rejects():
    with pytest.raises(ValueError):
        floquet.check_pole_cancellation(forcing.build_forcing("harmonic-list", 1.3), 16)
    with pytest.raises(ValueError):
        floquet.check_pole_cancellation(forcing.sine_forcing(0.3, 0.5), 16)


def test_sigma_min_positive(sine):
    smin, smax = floquet.sigma_min(sine, 0.3j, 32)
    assert 0 < smin <= smax


@pytest.mark.parametrize("F, f", [
    (lambda p: 1 / (p + 1), lambda t: np.exp(-t)),
    (lambda p: 1 / ((p + 1) ** 2 + 4), lambda t: np.exp(-t) * np.sin(2 * t) / 2),
    (lambda p: (p + 1) ** -1.5, lambda t: 2 * np.exp(-t) * np.sqrt(t / np.pi)),
])
def test_inverse_laplace_pairs(F, f):
    s = np.linspace(-200, 200, 40001)
    t = np.linspace(0.5, 10, 20)
    Y = floquet.inverse_laplace_line(F(0.5 + 1j * s), s, 0.5, t)
    assert np.max(np.abs(Y.values - f(t))) < 1e-6


def test_inverse_laplace_rejects_coarse_grid():
    s = np.linspace(-10, 10, 11)
    with pytest.raises(ValueError):
        floquet.inverse_laplace_line(1 / (0.5 + 1j * s + 1), s, 0.5, np.array([50.0]))


def test_inverse_laplace_pipeline(sine):
    sg, yl = floquet.lattice_line(sine, 0.3, 60.0, per_period=32)
    t = np.linspace(1, 8, 15)
    Yi = floquet.inverse_laplace_line(yl, sg, 0.3, t)
    Yt = volterra.solve_Y(sine, volterra.bound_state(), 10, 0.0025)
    ref = np.interp(t, Yt.t, Yt.values.real) + 1j * np.interp(t, Yt.t, Yt.values.imag)
    assert np.max(np.abs(Yi.values - ref)) < 1e-4
