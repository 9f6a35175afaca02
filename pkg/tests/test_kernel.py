import numpy as np
import pytest
import scipy.integrate
from hypothesis import given
from hypothesis import strategies as st

from deltawell import kernel
from deltawell.cli import read_csv


def M_oracle(s):
    """M from the u^2/(1+u^2) representation, substituting v = u^2.

    M(s) = (i/pi) e^{-is} int_0^inf sqrt(v)/(1+v) e^{-isv} dv, done by
    QAWF Fourier quadrature.
    """
    f = lambda v: np.sqrt(v) / (1 + v)  # noqa: E731
    c = scipy.integrate.quad(f, 0, np.inf, weight="cos", wvar=s, limlst=200)[0]
    sn = scipy.integrate.quad(f, 0, np.inf, weight="sin", wvar=s, limlst=200)[0]
    return 1j / np.pi * np.exp(-1j * s) * (c - 1j * sn)


def laplace_oracle(p):
    """Laplace transform from the u-representation (no oscillation left)."""
    f = lambda u: u * u / ((1 + u * u) * (p + 1j * (1 + u * u)))  # noqa: E731
    re = scipy.integrate.quad(lambda u: f(u).real, 0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    im = scipy.integrate.quad(lambda u: f(u).imag, 0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    return 2j / np.pi * (re + 1j * im)


@pytest.mark.parametrize("s", [0.05, 0.5, 1.0, 3.0, 10.0, 40.0])
def test_two_representations_agree(s):
    assert abs(kernel.eval_M(s) - M_oracle(s)) < 1e-8 * max(1, abs(M_oracle(s)))


def test_singular_limit():
    s = np.array([1e-10, 1e-8])
    lim = np.sqrt(s) * kernel.eval_M(s)
    assert np.allclose(lim, 2 * kernel.KAPPA, atol=1e-4)


def test_large_time_decay():
    # |M| ~ |KAPPA| s^{-3/2} once the oscillating boundary term dominates
    s = np.array([1e3, 4e3])
    ratio = abs(kernel.eval_M(s[0]) / kernel.eval_M(s[1]))
    assert ratio == pytest.approx(8.0, rel=1e-2)


def test_eval_M_rejects_nonpositive():
    with pytest.raises(ValueError):
        kernel.eval_M(0.0)
    with pytest.raises(ValueError):
        kernel.eval_M([1.0, -1.0])


def test_fresnel_E_limit():
    assert abs(kernel.fresnel_E(1e8) - np.sqrt(np.pi) * np.exp(-0.25j * np.pi)) < 1e-3


@pytest.mark.parametrize("p", [1.0, 0.3 + 2j, 2 - 3j, 0.1])
def test_laplace_M_matches_u_representation(p):
    assert abs(kernel.laplace_M(p) - laplace_oracle(p)) < 1e-10


@given(st.floats(0.05, 5.0), st.floats(-5.0, 5.0))
def test_laplace_M_property(a, b):
    p = complex(a, b)
    assert abs(kernel.laplace_M(p) - laplace_oracle(p)) < 1e-9


def test_laplace_M_at_one():
    # frozen oracle: -i + i sqrt(1 - i), fourth-quadrant root
    w = np.sqrt(1 - 1j)
    w = -w if w.imag > 0 else w
    assert kernel.laplace_M(1.0) == pytest.approx(-1j + 1j * w, abs=1e-15)


def test_laplace_M_small_p_gives_integral_of_M():
    assert kernel.laplace_M(1e-9) == pytest.approx(0.5, abs=1e-8)


def test_laplace_M_pole():
    with pytest.raises(ZeroDivisionError):
        kernel.laplace_M(0.0)


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_sqrt_branch(w):
    r = kernel.sqrt_fourth_quadrant(w)
    assert r.imag <= 0
    assert abs(r * r - w) <= 1e-12 * max(1.0, abs(w))


def test_sqrt_branch_continuous_from_right():
    p = np.array([1e-8, 1j, -1j + 1e-9, 5 + 5j])
    r = kernel.sqrt_fourth_quadrant(1 - 1j * p)
    assert abs(r[0] - 1) < 1e-8
    assert np.all(r.real >= -1e-12) and np.all(r.imag <= 0)


@pytest.mark.parametrize("h", [0.01, 0.2])
def test_cell_moments_match_quadrature(h):
    tab = kernel.kernel_cell_moments(h, 6)
    # first cell via t = v^2 to remove the singularity
    f0 = lambda v: 2 * v * kernel.eval_M(v * v)  # noqa: E731
    g0 = lambda v: 2 * v * v * v * kernel.eval_M(v * v)  # noqa: E731
    q = lambda f, a, b: complex(  # noqa: E731
        scipy.integrate.quad(lambda x: f(x).real, a, b, epsabs=1e-14)[0],
        scipy.integrate.quad(lambda x: f(x).imag, a, b, epsabs=1e-14)[0])
    assert abs(tab.moments[0] - q(f0, 0, np.sqrt(h))) < 1e-12
    assert abs(tab.first_moments[0] - q(g0, 0, np.sqrt(h))) < 1e-12
    for k in range(1, 6):
        a, b = k * h, (k + 1) * h
        assert abs(tab.moments[k] - q(kernel.eval_M, a, b)) < 1e-12
        fm = q(lambda s: (s - a) * kernel.eval_M(s), a, b)
        assert abs(tab.first_moments[k] - fm) < 1e-12


def test_cell_moments_additive():
    fine = kernel.kernel_cell_moments(0.05, 8)
    coarse = kernel.kernel_cell_moments(0.1, 4)
    pairs = fine.moments.reshape(4, 2).sum(axis=1)
    assert np.allclose(pairs, coarse.moments, atol=1e-14)
    # first moments: shift the second half-cell by h/2
    fm = fine.first_moments.reshape(4, 2)
    shifted = fm[:, 0] + fm[:, 1] + 0.05 * fine.moments.reshape(4, 2)[:, 1]
    assert np.allclose(shifted, coarse.first_moments, atol=1e-14)


def test_product_weights_integrate_constants_and_lines():
    h, K = 0.1, 20
    tab = kernel.kernel_cell_moments(h, K)
    alpha, beta = tab.product_weights()
    total = tab.moments.sum()
    assert abs((alpha + beta).sum() - total) < 1e-13
    # Y(t) = t on [0, t_K]: int M(t_K - t) t dt = t_K int M - int s M
    n = K
    Y = h * np.arange(n + 1)
    approx = sum(alpha[k] * Y[n - k] + beta[k] * Y[n - k - 1] for k in range(n))
    exact = n * h * total - (tab.first_moments + h * np.arange(K) * tab.moments).sum()
    assert abs(approx - exact) < 1e-13


def test_cell_moments_validation_and_cache():
    with pytest.raises(ValueError):
        kernel.kernel_cell_moments(0.0, 3)
    assert kernel.kernel_cell_moments(0.1, 3) is kernel.kernel_cell_moments(0.1, 3)
    with pytest.raises(ValueError):
        kernel.kernel_cell_moments(0.1, 3).moments[0] = 0


def test_kernel_table_round_trip(tmp_path):
    tab = kernel.kernel_cell_moments(0.037, 17)
    path = tmp_path / "k.csv"
    kernel.write_kernel_table(tab, path)
    cols = read_csv(path)
    assert np.array_equal(cols["s"], tab.s_grid[:17])
    assert np.array_equal(cols["re_m"], tab.moments.real)
    assert np.array_equal(cols["im_m"], tab.moments.imag)
    assert np.array_equal(cols["re_M"][1:], tab.M_values[1:17].real)
