"""Acceptance thresholds and the runners that check them.

Every threshold used by the CLI summaries and by the acceptance tests is
defined here and nowhere else.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import floquet, forcing, kernel, nongeneric, volterra

# 1: unitarity
UNITARITY_TOL = 5e-3
UNITARITY_HALVING_RATIO = 1.8
UNITARITY_CASE = dict(r=0.2, omega=1.5, T=50.0, h=5e-3)
UNITARITY_BUDGET = 120.0

# 2: decay-rate scaling
FERMI_OMEGA = 1.5
FERMI_R = (0.1, 0.05)
FERMI_EXPECTED = 2.0 ** (2 * (1 + int(np.floor(1 / FERMI_OMEGA))))
FERMI_REL_TOL = 0.2
FERMI_T = 300.0
FERMI_H = 1e-2
FERMI_WINDOW = (50.0, 300.0)
FERMI_BUDGET = 300.0

# 3: power-law tail
TAIL_SLOPE = -1.5
TAIL_SLOPE_TOL = 0.15
TAIL_T = 400.0
TAIL_H = 1e-2
TAIL_WINDOW = (100.0, 400.0)
TAIL_R = FERMI_R[0]
TAIL_R_SUPPLEMENTARY = 0.7
TAIL_BUDGET = 600.0

# 4: Laplace cross-validation
LAPLACE_REL_TOL = 1e-4
LAPLACE_POINTS = (0.3, 0.5 + 0.7j, 0.4 - 1.2j, 1.0 + 2.0j, 0.3 + 0.1j)
LAPLACE_CASE = dict(r=0.2, omega=1.5, T=80.0, h=5e-3)
LAPLACE_BUDGET = 120.0

# 5: closed-form transform of the kernel
KERNEL_LAPLACE_TOL = 1e-7
KERNEL_LAPLACE_SAMPLES = 10
KERNEL_LAPLACE_RE = (0.2, 2.0)
KERNEL_LAPLACE_IM = (-3.0, 3.0)
KERNEL_LAPLACE_SEED = 20240611
KERNEL_LAPLACE_BUDGET = 30.0

# 6: continued-fraction figures
CF_OMEGA = 1.1
CF_R = 0.45
CF_N0 = 10
CF_WIDTH_TOL = 3e-6
CF_WIDTH_RANGE = (0.3, 0.4)
CF_LAMBDA_S = 0.327
CF_LAMBDA_TOL = 0.005
CF_BUDGET = 60.0

# 7: overlap constant
OVERLAP_C = -1.953
OVERLAP_TOL = 0.01
OVERLAP_N = 50
OVERLAP_BUDGET = 60.0

# 8: incomplete vs complete ionization
DICHOTOMY_T = 400.0
DICHOTOMY_H = 1e-2
DICHOTOMY_WINDOW = (300.0, 400.0)
DICHOTOMY_FLOOR = 0.01
DICHOTOMY_BAND_REL = 0.2
DICHOTOMY_OFFSET = 0.05
DICHOTOMY_BUDGET = 900.0

# 9: genericity checker
GENERICITY_LAMBDA = 0.6
GENERICITY_N = 50
GENERICITY_TOL = 1e-10
GENERICITY_HARMONIC_NS = (25, 50, 100, 200)
GENERICITY_BUDGET = 30.0

# 10: pole cancellation
POLE_R = 0.3
POLE_OMEGA = 1.3
POLE_N = 64
POLE_REL_TOL = 1e-6
POLE_BUDGET = 60.0


@dataclass
class CriterionResult:
    """Outcome of one acceptance criterion."""

    number: object
    title: str
    passed: bool
    detail: str
    runtime: float = 0.0
    budget: float = float("inf")
    measured: dict = field(default_factory=dict)

    @property
    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] criterion {self.number}: {self.title}: {self.detail} "
                f"(runtime {self.runtime:.1f}s, budget {self.budget:.0f}s)")


def timed(number, title, budget, fn):
    t0 = time.perf_counter()
    ok, detail, measured = fn()
    dt = time.perf_counter() - t0
    if dt > budget:
        ok = False
        detail += "; over runtime budget"
    return CriterionResult(number, title, bool(ok), detail, dt, budget, measured)


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- 1 ----------------------------------------------------------------------

def _unitarity(h):
    c = UNITARITY_CASE
    spec = forcing.sine_forcing(c["r"], c["omega"])
    state = volterra.bound_state(volterra.default_k_grid(spec))
    return volterra.simulate(spec, state, c["T"], h).max_unitarity_residual


def criterion1(jobs=1):
    def run():
        h = UNITARITY_CASE["h"]
        e1, e2 = _map(_unitarity, [h, h / 2], jobs)
        ratio = e1 / e2
        ok = e1 < UNITARITY_TOL and ratio >= UNITARITY_HALVING_RATIO
        return ok, (f"max residual {e1:.3e} (tol {UNITARITY_TOL:g}), "
                    f"halving ratio {ratio:.2f} (need >= {UNITARITY_HALVING_RATIO})"), \
            dict(residual=e1, residual_half=e2, ratio=ratio)
    return timed(1, "unitarity", UNITARITY_BUDGET, run)


# -- 2 ----------------------------------------------------------------------

def fermi_rate(r, omega=FERMI_OMEGA, T=FERMI_T, h=FERMI_H, window=FERMI_WINDOW):
    spec = forcing.sine_forcing(r, omega)
    Y = volterra.solve_Y(spec, volterra.bound_state(), T, h)
    theta = volterra.compute_theta(Y, 1.0)
    return volterra.fit_decay(Y.t, np.abs(theta.values) ** 2, window=window)


def criterion2(jobs=1):
    def run():
        fits = _map(fermi_rate, FERMI_R, jobs)
        ratio = fits[0].Gamma / fits[1].Gamma
        ok = abs(ratio / FERMI_EXPECTED - 1) <= FERMI_REL_TOL
        flags = [f.flagged for f in fits]
        return ok, (f"Gamma({FERMI_R[0]})={fits[0].Gamma:.5g}, Gamma({FERMI_R[1]})="
                    f"{fits[1].Gamma:.5g}, ratio {ratio:.3f} (expect {FERMI_EXPECTED:g} "
                    f"+-{FERMI_REL_TOL:.0%}), R^2 flags {flags}"), \
            dict(gammas=[f.Gamma for f in fits], ratio=ratio, r_squared=[f.r_squared for f in fits])
    return timed(2, "decay-rate scaling", FERMI_BUDGET, run)


# -- 3 ----------------------------------------------------------------------

def tail_fit(r, omega=FERMI_OMEGA, T=TAIL_T, h=TAIL_H, window=TAIL_WINDOW):
    """Envelope fit of ``log|theta - theta_inf|`` against ``log t``."""
    spec = forcing.sine_forcing(r, omega)
    Y = volterra.solve_Y(spec, volterra.bound_state(), T, h)
    theta = volterra.compute_theta(Y, 1.0)
    fit = volterra.fit_decay(Y.t, theta=theta.values, tail_window=window,
                             period=2 * np.pi / omega)
    P_end = float(abs(theta.values[-1]) ** 2)
    return fit, P_end, Y.t, theta.values


def criterion3(r=TAIL_R):
    def run():
        fit, P_end, t, theta = tail_fit(r)
        slope = fit.tail_exponent
        ok = abs(slope - TAIL_SLOPE) <= TAIL_SLOPE_TOL
        return ok, (f"r={r}: slope {slope:.3f} on t in {TAIL_WINDOW} (expect "
                    f"{TAIL_SLOPE} +- {TAIL_SLOPE_TOL}), R^2 {fit.tail_r_squared:.3f}, "
                    f"P(T)={P_end:.3g}"), dict(slope=slope, P_end=P_end, r=r, t=t,
                                            theta=theta, theta_inf=fit.theta_inf)
    label = 3 if r == TAIL_R else f"3 (supplementary, r={r})"
    return timed(label, "power-law tail", TAIL_BUDGET, run)


# -- 4 ----------------------------------------------------------------------

def criterion4():
    def run():
        c = LAPLACE_CASE
        spec = forcing.sine_forcing(c["r"], c["omega"])
        period = 2 * np.pi / c["omega"]
        Ys = [volterra.solve_Y(spec, volterra.bound_state(), c["T"], h)
              for h in (c["h"], c["h"] / 2)]
        errs = []
        for p in LAPLACE_POINTS:
            l1, l2 = (volterra.laplace_of_series(Y, p, tail_period=period)[0] for Y in Ys)
            ref = (4 * l2 - l1) / 3  # Richardson in h
            y0 = floquet.lattice_y(spec, p)
            errs.append(abs(y0 - ref) / abs(ref))
        worst = max(errs)
        return worst < LAPLACE_REL_TOL, (f"max relative error {worst:.3e} over "
                                         f"{len(errs)} points (tol {LAPLACE_REL_TOL:g})"), \
            dict(errors=errs)
    return timed(4, "Laplace cross-validation", LAPLACE_BUDGET, run)


# -- 5 ----------------------------------------------------------------------

def laplace_M_quadrature(p):
    """``int_0^inf e^{-pt} M(t) dt`` by quadrature.

    The s^{-1/2} singularity is removed on [0, 1] by ``t = v^2``;
    the remainder is integrated on [1, t_max] with t_max set by the decay
    of ``e^{-Re(p) t}``.
    """
    p = complex(p)

    def part(f, a, b, **kw):
        re = scipy.integrate.quad(lambda t: f(t).real, a, b, limit=2000, **kw)[0]
        im = scipy.integrate.quad(lambda t: f(t).imag, a, b, limit=2000, **kw)[0]
        return re + 1j * im

    # t = v^2 removes the t^(-1/2) singularity on [0, 1]
    head = part(lambda v: 2 * v * np.exp(-p * v * v) * kernel.eval_M(v * v), 0.0, 1.0,
                epsabs=1e-14, epsrel=1e-12)
    t_max = 1.0 + 40.0 / p.real
    edges = np.linspace(1.0, t_max, int(np.ceil(t_max)) + 1)
    body = sum(part(lambda t: np.exp(-p * t) * kernel.eval_M(t), a, b,
                    epsabs=1e-14, epsrel=1e-12) for a, b in zip(edges[:-1], edges[1:]))
    return head + body


def criterion5():
    def run():
        rng = np.random.default_rng(KERNEL_LAPLACE_SEED)
        ps = (rng.uniform(*KERNEL_LAPLACE_RE, KERNEL_LAPLACE_SAMPLES)
              + 1j * rng.uniform(*KERNEL_LAPLACE_IM, KERNEL_LAPLACE_SAMPLES))
        errs = [abs(kernel.laplace_M(p) - laplace_M_quadrature(p)) for p in ps]
        worst = max(errs)
        return worst < KERNEL_LAPLACE_TOL, (f"max abs error {worst:.3e} at "
                                            f"{len(ps)} points (tol {KERNEL_LAPLACE_TOL:g})"), \
            dict(errors=errs)
    return timed(5, "kernel transform identity", KERNEL_LAPLACE_BUDGET, run)


# -- 6 ----------------------------------------------------------------------

def g0_scan(omega=CF_OMEGA, r=CF_R, n0=CF_N0, s0=None, lams=None):
    """Envelope of g0 and the initial-condition curve on a lambda grid."""
    if lams is None:
        lams = np.linspace(0.02, 0.98, 481)
    s0v = nongeneric._resolve_s0(omega, r, s0)
    rows = []
    for lam in lams:
        cf = nongeneric.continued_fraction_g0(omega, r, lam, s0v, n0)
        rows.append((lam, cf.bracket[0], cf.bracket[1],
                     float(nongeneric.initial_condition_rhs(omega, r, lam, s0v)),
                     cf.monotone))
    return rows


def criterion6():
    def run():
        lams = np.linspace(CF_WIDTH_RANGE[0], CF_WIDTH_RANGE[1], 201)[1:-1]
        rows = g0_scan(lams=lams)
        width = max(hi - lo for _, lo, hi, _, _ in rows)
        roots_p = nongeneric.find_lambda_s(CF_OMEGA, CF_R, s0="sp", n0=CF_N0)
        roots_r = nongeneric.find_lambda_s(CF_OMEGA, CF_R, s0="sr", n0=CF_N0)
        lam_p = roots_p.roots[0] if roots_p.roots else float("nan")
        lam_r = roots_r.roots[0] if roots_r.roots else float("nan")
        ok_w = width < CF_WIDTH_TOL
        ok_l = abs(lam_p - CF_LAMBDA_S) <= CF_LAMBDA_TOL
        return ok_w and ok_l, (
            f"envelope width {width:.2e} (tol {CF_WIDTH_TOL:g}) "
            f"{'ok' if ok_w else 'FAIL'}; first intersection {lam_p:.4f} at s_p "
            f"({lam_r:.4f} at s_r), expected {CF_LAMBDA_S} +- {CF_LAMBDA_TOL} "
            f"{'ok' if ok_l else 'FAIL'}"), dict(width=width, lambda_sp=lam_p,
                                                  lambda_sr=lam_r)
    return timed(6, "continued-fraction figures", CF_BUDGET, run)


# -- 7 ----------------------------------------------------------------------

def overlap_result(omega=CF_OMEGA, r=CF_R, N=OVERLAP_N):
    roots = nongeneric.find_lambda_s(omega, r)
    lam = roots.lambda_s
    s_p, rel_smin = nongeneric.locate_s_p(omega, r, lam)
    res = nongeneric.overlap_c(omega, r, lam, N=N, s_p=s_p)
    return lam, s_p, rel_smin, res


def criterion7():
    def run():
        lam, s_p, _, res = overlap_result()
        c = res.c
        ok = abs(c - OVERLAP_C) <= OVERLAP_TOL and res.remainder_bound <= OVERLAP_TOL
        return ok, (f"lambda_s={lam:.6f}, s_p={s_p:.6f}, c={c.real:.4f}{c.imag:+.4f}i "
                    f"+- {res.remainder_bound:.1e} (expected {OVERLAP_C} +- {OVERLAP_TOL})"), \
            dict(c=c, remainder_bound=res.remainder_bound, lambda_s=lam, s_p=s_p)
    return timed(7, "overlap constant", OVERLAP_BUDGET, run)


# -- 8 ----------------------------------------------------------------------

def _dichotomy_run(lam):
    rep = nongeneric.verify_incomplete_ionization(CF_OMEGA, CF_R, lam, DICHOTOMY_T,
                                                  DICHOTOMY_H)
    t, P = rep.t, rep.P
    fit = volterra.fit_decay(t, theta=rep.theta, tail_window=TAIL_WINDOW,
                             period=2 * np.pi / CF_OMEGA)
    w = (t >= DICHOTOMY_WINDOW[0]) & (t <= DICHOTOMY_WINDOW[1])
    return dict(lam=lam, floor=float(P[w].min()), band_early=rep.band_early,
                band_late=rep.band_late, slope=fit.tail_exponent, P_end=float(P[-1]),
                P_half=float(P[len(P) // 2]))


def criterion8(jobs=1):
    def run():
        lam_s = nongeneric.find_lambda_s(CF_OMEGA, CF_R).lambda_s
        lams = [lam_s, lam_s - DICHOTOMY_OFFSET, lam_s + DICHOTOMY_OFFSET]
        on, *off = _map(_dichotomy_run, lams, jobs)
        band_ok = abs(on["band_late"] - on["band_early"]) <= \
            DICHOTOMY_BAND_REL * on["band_early"]
        on_ok = on["floor"] > DICHOTOMY_FLOOR and band_ok
        off_ok = [o["P_end"] < o["P_half"] and
                  abs(o["slope"] - TAIL_SLOPE) <= TAIL_SLOPE_TOL for o in off]
        parts = [f"at lambda_s={lam_s:.5f}: floor {on['floor']:.3f} "
                 f"(> {DICHOTOMY_FLOOR}), band {on['band_early']:.3f}/{on['band_late']:.3f} "
                 f"{'ok' if on_ok else 'FAIL'}"]
        for o, ok in zip(off, off_ok):
            parts.append(f"at {o['lam']:.5f}: P(T)={o['P_end']:.3g}, tail slope "
                         f"{o['slope']:.2f} {'ok' if ok else 'FAIL'}")
        return on_ok and all(off_ok), "; ".join(parts), dict(on=on, off=off)
    return timed(8, "ionization dichotomy", DICHOTOMY_BUDGET, run)


# -- 9 ----------------------------------------------------------------------

def criterion9():
    def run():
        lam = GENERICITY_LAMBDA
        geo = forcing.genericity_distance(lambda n: lam ** n, GENERICITY_N)
        ok_geo = abs(geo.distance - lam) < GENERICITY_TOL
        trig = forcing.genericity_distance(
            forcing.build_forcing("harmonic-list", 1.5, coefficients=[0.1, 0.05j, -0.02]), 10)
        ok_trig = trig.distance <= 1e-12
        ds = []
        for N in GENERICITY_HARMONIC_NS:
            ds.append(forcing.genericity_distance(lambda n: 1.0 / n, N,
                                                  length=8 * GENERICITY_HARMONIC_NS[-1]).distance)
        ok_h = all(b < a for a, b in zip(ds, ds[1:]))
        return ok_geo and ok_trig and ok_h, (
            f"geometric |d-lambda|={abs(geo.distance - lam):.1e}; trigonometric "
            f"d={trig.distance:.1e}; 1/n distances "
            + ", ".join(f"{d:.4f}" for d in ds)), dict(geometric=geo.distance,
                                                        trig=trig.distance, harmonic=ds)
    return timed(9, "genericity checker", GENERICITY_BUDGET, run)


# -- 10 ---------------------------------------------------------------------

def criterion10():
    def run():
        rep = floquet.check_pole_cancellation(forcing.sine_forcing(POLE_R, POLE_OMEGA), POLE_N)
        ok = rep.margin > 0 and rep.relative_change < POLE_REL_TOL
        return ok, (f"|S|={rep.margin:.6g}, N-doubling change {rep.relative_change:.1e} "
                    f"(tol {POLE_REL_TOL:g})"), dict(S=rep.S, change=rep.relative_change)
    return timed(10, "pole cancellation", POLE_BUDGET, run)


ALL = {
    1: criterion1, 2: criterion2, 3: criterion3, 4: criterion4, 5: criterion5,
    6: criterion6, 7: criterion7, 8: criterion8, 9: criterion9, 10: criterion10,
}
