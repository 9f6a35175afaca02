import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltawell import floquet, nongeneric as ng

OMEGA, R = 1.1, 0.45
# [DERIVED] first matching root at the pole point, deep continued fraction
LAMBDA_S = 0.6868165946940606


@pytest.fixture(scope="module")
def kv():
    return ng.kernel_vector(OMEGA, R, LAMBDA_S, N=80)


def test_a_zero_at_origin():
    assert ng.eval_a(OMEGA, R, 0.0, 0) == 0


def test_a_below_threshold_is_fourth_quadrant():
    a = ng.eval_a(OMEGA, R, 0.0, -1)  # 1 - omega < 0
    assert a.real == pytest.approx(-1 / R)
    assert a.imag == pytest.approx(-np.sqrt(OMEGA - 1) / R)


def test_pole_and_branch_points():
    assert ng.pole_point(OMEGA, R) == pytest.approx(0.4025, abs=1e-15)
    assert 1 + ng.eval_a(OMEGA, R, 0.4025, -1) == pytest.approx(0, abs=1e-14)
    assert ng.branch_point(OMEGA) == pytest.approx(0.1, abs=1e-15)
    assert ng.branch_point(OMEGA) == pytest.approx(
        floquet.classify_singularities(ng.family_forcing(OMEGA, R, 0.5), scan=False).s_r)
    with pytest.raises(ValueError):
        ng.pole_point(OMEGA, 1.2)


def test_family_forcing_sign():
    spec = ng.family_forcing(OMEGA, R, 0.3)
    c = floquet.lattice_coefficients(spec, 2)
    assert np.allclose(c, [-R * 0.09, -R * 0.3, 0, -R * 0.3, -R * 0.09])


@pytest.mark.parametrize("lam", [0.3, 0.6, 0.9])
def test_large_n_asymptotics(lam):
    # g_n = 1/lambda + delta_n with delta_n sqrt(n omega) -> -r/lambda
    n = 10_000
    a = np.real(ng.eval_a(OMEGA, R, ng.pole_point(OMEGA, R), np.arange(n + 2001)))
    g, hit = ng._iterate(lam, a, 1 / lam)
    assert not hit
    assert (g[n] - 1 / lam) * np.sqrt(n * OMEGA) == pytest.approx(-R / lam, rel=0.05)
    # G_n - (lambda + 1/lambda) = -(1 - lambda^2) / (lambda (1 + a_n)) exactly
    assert ng._G(lam, a[n]) - (lam + 1 / lam) == pytest.approx(
        -(1 - lam ** 2) / (lam * (1 + a[n])), rel=1e-10)


@given(st.floats(0.2, 0.95), st.floats(0.05, 0.9))
def test_seed_interval_encloses_iff_r_small(lam, r):
    # the +-(1 - lambda^2)/sqrt(n0 omega) seeds bracket g_n0 only if r < lambda (1 - lambda^2)
    margin = r / (lam * (1 - lam ** 2))
    if abs(margin - 1) < 0.2:
        return
    n0 = 400
    a = np.real(ng.eval_a(OMEGA, r, 0.05, np.arange(n0 + 4001)))
    g, _ = ng._iterate(lam, a, 1 / lam)
    inside = abs(g[n0] - 1 / lam) < (1 - lam ** 2) / np.sqrt(n0 * OMEGA)
    assert inside == (margin < 1)


@given(st.floats(0.3, 0.9), st.floats(0.2, 2.0), st.floats(0.5, 3.0))
def test_riccati_closed_form(lam, a, seed):
    G = ng._G(lam, a)
    if not -1.9 < G < 1.9:
        return
    n0 = 12
    g, _ = ng._iterate(lam, np.full(n0 + 1, a), seed)
    cf = ng.riccati_closed_form(G, n0, seed, np.arange(n0 + 1))
    ok = np.abs(g) < 1e3  # away from poles of the closed form
    assert np.allclose(g[ok], cf[ok], rtol=1e-10, atol=1e-10)


def test_riccati_rejects():
    with pytest.raises(ValueError):
        ng.riccati_closed_form(2.5, 5, 1.0, 0)


def test_envelope_brackets_limit():
    for lam in np.linspace(0.31, 0.39, 5):
        env = ng.continued_fraction_g0(OMEGA, R, lam, n0=10)
        lim = ng.continued_fraction_g0(OMEGA, R, lam, n0=10, seed_mode="limit")
        deep = ng.continued_fraction_g0(OMEGA, R, lam, n0=400, seed_mode="limit")
        assert env.monotone
        assert env.bracket[0] <= lim.g0 <= env.bracket[1]
        # the seeds miss g_10 (r > lambda (1 - lambda^2)), but only just
        assert min(abs(deep.g0 - x) for x in env.bracket) < 1e-7
        assert env.width < 3e-6


def test_depth_convergence():
    vals = [ng.continued_fraction_g0(OMEGA, R, 0.5, n0=n, seed_mode="limit").g0
            for n in (25, 50, 100, 200)]
    assert abs(vals[-1] - vals[-2]) < 1e-12
    assert abs(vals[1] - vals[-1]) < abs(vals[0] - vals[-1]) + 1e-15


def test_cf_validation():
    with pytest.raises(ValueError):
        ng.continued_fraction_g0(OMEGA, R, 1.5)
    with pytest.raises(ValueError):
        ng.continued_fraction_g0(OMEGA, R, 0.5, n0=0)
    with pytest.raises(ValueError):
        ng.continued_fraction_g0(OMEGA, R, 0.5, seed_mode="other")


def test_lambda_root():
    roots = ng.find_lambda_s(OMEGA, R)
    assert roots.lambda_s == pytest.approx(LAMBDA_S, abs=1e-12)
    assert roots.residual < 1e-12
    # root is a genuine matching point, not a pole of g0
    cf = ng.continued_fraction_g0(OMEGA, R, roots.lambda_s, n0=400, seed_mode="limit")
    rhs = ng.initial_condition_rhs(OMEGA, R, roots.lambda_s, roots.s0)
    assert cf.g0 == pytest.approx(float(rhs), abs=1e-10)
    assert all(abs(roots.lambda_s - p) > 1e-3 for p in roots.poles)


def test_lambda_root_depth_stable():
    assert ng.find_lambda_s(OMEGA, R, n0=100).lambda_s == pytest.approx(LAMBDA_S, abs=1e-12)


def test_no_root_raises_lookup():
    roots = ng.LambdaRoots((), (), (), 0.1, 10)
    with pytest.raises(LookupError):
        roots.lambda_s


def test_kernel_invariants(kv):
    assert kv.z[0] == 1
    assert kv.recurrence_residual < 1e-12
    assert LAMBDA_S < kv.decay_ratio < 1
    assert np.all(np.abs(kv.z[41:]) < np.abs(kv.z[40:-1]))
    assert ng.kernel_residual(kv) < 1e-9
    assert ng.adjoint_kernel_residual(kv) < 1e-9


def test_redundancy_sums_vanish(kv):
    sums = [abs(kv.redundancy_sum(n)) for n in (20, 40, 80)]
    assert sums[0] > sums[1] > sums[2]
    assert sums[2] < 1e-12


def test_non_root_fails_boundary_row():
    # the backward sweep always yields a decaying z; only a root satisfies row n = -1
    assert ng.kernel_residual(ng.kernel_vector(OMEGA, R, 0.5, N=60)) > 1e-3
    with pytest.raises(ValueError):
        ng.kernel_vector(OMEGA, R, LAMBDA_S, N=20)


def test_lattice_singular_at_pole_point():
    s_p, rel = ng.locate_s_p(OMEGA, R, LAMBDA_S)
    assert s_p == pytest.approx(0.4025, abs=1e-6)
    assert rel < 1e-8
    _, rel_off = ng.locate_s_p(OMEGA, R, LAMBDA_S - 0.05)
    assert rel_off > 1e3 * rel


def test_overlap_stable_and_imaginary(kv):
    o50 = ng.overlap_c(OMEGA, R, LAMBDA_S, N=50)
    o100 = ng.overlap_c(OMEGA, R, LAMBDA_S, N=100)
    assert abs(o50.c - o100.c) <= o50.remainder_bound
    assert abs(o50.c.real) < 1e-12
    # [DERIVED] frozen value
    assert o100.c.imag == pytest.approx(0.55108882, abs=1e-7)
    with pytest.raises(ArithmeticError):
        ng.overlap_c(OMEGA, R, LAMBDA_S, N=50, tol=1e-12)


def test_incomplete_ionization_plateau():
    rep = ng.verify_incomplete_ionization(OMEGA, R, LAMBDA_S, T=100.0, h=1e-2)
    assert rep.P_floor > 0.01
    assert rep.band_stable
    assert rep.P.max() <= 1 + 1e-9
