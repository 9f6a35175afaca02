"""Laplace-domain analysis on the Floquet lattice ``{p0 + i n omega}``.

Taking the Laplace transform of the Volterra equation turns the product
with the periodic drive into shifts along the lattice. With
``y_n = y(p0 + i n omega)`` one obtains the infinite linear system

    y_n = sum_j c_j (h_{n+j} + b_{n+j} y_{n+j}),
    h(p) = -1/p,   b(p) = -(i/p) (1 + sqrt(1 - i p)),

i.e. ``(I - J) y = f``. The lattice coefficients are ``c_j = -conj(C_j)``
in terms of the Fourier coefficients ``C_j`` of eta; for an odd drive such
as ``r sin(omega t)`` the two coincide. The system is truncated to
``|n| <= N`` and solved densely.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.optimize

from .kernel import sqrt_fourth_quadrant

__all__ = [
    "LatticeSolution",
    "LatticeSystem",
    "PoleCancellationReport",
    "SingularityError",
    "SingularityReport",
    "build_lattice_system",
    "check_pole_cancellation",
    "classify_singularities",
    "inverse_laplace_line",
    "lattice_coefficients",
    "lattice_line",
    "lattice_y",
    "normalize_p0",
    "sigma_min",
    "solve_lattice",
]

log = logging.getLogger(__name__)

N_DEFAULT = 64
N_CAP = 4096
DOUBLING_RTOL = 1e-8
TAIL_RTOL = 1e-6
POLE_THRESHOLD = 1e-6


class SingularityError(ArithmeticError):
    """The truncated lattice matrix is numerically singular."""


def lattice_coefficients(spec, J=None):
    """Coefficients ``c_j = -conj(C_j)`` for ``j = -J..J`` (index ``j + J``)."""
    if J is None:
        J = spec.max_harmonic
    C = spec.coefficient_array(J)
    return -C[::-1]


def b_coeff(p):
    p = np.asarray(p, dtype=complex)
    return -(1j / p) * (1 + sqrt_fourth_quadrant(1 - 1j * p))


def h_coeff(p):
    return -1.0 / np.asarray(p, dtype=complex)


def normalize_p0(p, omega):
    """Split ``p = p0 + i n omega`` with ``Im p0`` in ``[0, omega)``."""
    p = complex(p)
    n = int(np.floor(p.imag / omega))
    p0 = complex(p.real, p.imag - n * omega)
    if p0.imag >= omega:  # rounding
        n += 1
        p0 = complex(p.real, max(0.0, p.imag - n * omega))
    return p0, n


@dataclass(frozen=True)
class LatticeSystem:
    """Truncated ``(I - J) y = f`` on indices ``-N..N``."""

    spec: object
    p0: complex
    N: int
    matrix: np.ndarray
    f: np.ndarray
    b: np.ndarray
    h: np.ndarray

    @property
    def n(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def q(self):
        """``q_n = -b_n = (1 + sqrt(1 + s0 + n omega)) / (s0 + n omega)``."""
        return -self.b


def _check_point(spec, p0, N, J):
    p0 = complex(p0)
    if p0.real < 0:
        raise ValueError("need Re p0 >= 0")
    n = np.arange(-N - J, N + J + 1)
    p = p0 + 1j * n * spec.omega
    hit = np.flatnonzero(np.abs(p) < 1e-14 * max(1.0, spec.omega))
    if hit.size:
        raise ValueError(f"lattice point n = {int(n[hit[0]])} sits on the pole p = 0")
    if p0.real == 0:
        s0 = -1j * p0
        s_r = classify_singularities(spec, scan=False).s_r
        if abs(s0.real - s_r) < 1e-14:
            raise ValueError("s0 coincides with the branch point s_r; approach it by a limit")
    return p0


def build_lattice_system(spec, p0, N):
    """Assemble the truncated lattice system around ``p0``.

    Parameters
    ----------
    spec : ForcingSpec
    p0 : complex
        Base point, ``Re p0 >= 0``. Any imaginary part is accepted; use
        :func:`normalize_p0` for the canonical strip.
    N : int
        Truncation half-width, at least the largest active harmonic + 10.

    Raises
    ------
    ValueError
        If a lattice point hits the pole ``p = 0``, if ``p0`` lies on the
        axis at the branch point, or if N is too small.
    """
    N = int(N)
    J = min(spec.max_harmonic, 2 * N)
    if N < spec.max_harmonic + 10 and not spec.is_geometric:
        raise ValueError(f"N must be at least {spec.max_harmonic + 10}")
    p0 = _check_point(spec, p0, N, J)
    omega = spec.omega
    c = lattice_coefficients(spec, J)
    n = np.arange(-N, N + 1)
    p = p0 + 1j * n * omega
    b = b_coeff(p)
    h = h_coeff(p)
    # f_n = sum_j c_j h(p0 + i (n + j) omega), all j (not truncated)
    m = np.arange(-N - J, N + J + 1)
    h_ext = h_coeff(p0 + 1j * m * omega)
    f = np.convolve(h_ext, c[::-1], mode="valid")
    # A[n, k] = delta_nk - c_{k-n} b_k
    size = 2 * N + 1
    col = np.zeros(size, dtype=complex)
    row = np.zeros(size, dtype=complex)
    L = min(J, size - 1)
    col[: L + 1] = c[J - np.arange(L + 1)]   # c_{-d}, d = n - k >= 0
    row[: L + 1] = c[J + np.arange(L + 1)]   # c_{d},  d = k - n >= 0
    A = -scipy.linalg.toeplitz(col, row) * b[None, :]
    A[np.diag_indices(size)] += 1.0
    return LatticeSystem(spec=spec, p0=p0, N=N, matrix=A, f=f, b=b, h=h)


@dataclass(frozen=True)
class LatticeSolution:
    """Solution of a truncated lattice system.

    ``y[N + n]`` holds ``y_n``. ``residual`` is the max interior residual
    relative to ``||y||``; ``tail`` is the largest ``|y_n|`` on the outer
    tenth of the window relative to ``||y||``.
    """

    p0: complex
    omega: float
    N: int
    y: np.ndarray
    f: np.ndarray
    b: np.ndarray
    h: np.ndarray
    residual: float
    tail: float
    converged: bool = True
    doubling_change: float = float("nan")
    history: tuple = field(default=())

    @property
    def q(self):
        return -self.b

    @property
    def n(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def y0(self):
        return complex(self.y[self.N])

    def value(self, n):
        return complex(self.y[self.N + int(n)])

    @property
    def tail_ok(self):
        return self.tail < TAIL_RTOL


def _solve_once(system):
    A = system.matrix
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-14 * np.abs(A).max():
        raise SingularityError(f"truncated lattice matrix is singular at p0 = {system.p0}")
    y = scipy.linalg.lu_solve((lu, piv), system.f, check_finite=False)
    ynorm = float(np.linalg.norm(y)) or 1.0
    res = float(np.max(np.abs(A @ y - system.f))) / ynorm
    edge = max(1, (2 * system.N + 1) // 10)
    tail = float(max(np.abs(y[:edge]).max(), np.abs(y[-edge:]).max())) / ynorm
    return y, res, tail


def _as_solution(system, y, res, tail, **kw):
    return LatticeSolution(p0=system.p0, omega=system.spec.omega, N=system.N, y=y,
                           f=system.f, b=system.b, h=system.h, residual=res,
                           tail=tail, **kw)


def solve_lattice(system, converge=True, rtol=DOUBLING_RTOL, n_cap=N_CAP):
    """Dense solve of a lattice system, optionally with N-doubling.

    With ``converge=True`` the half-width is doubled (up to ``n_cap``) until
    ``y_0`` changes by less than ``rtol`` relative; the result carries the
    last relative change and ``converged=False`` if the cap was reached.

    Raises
    ------
    SingularityError
        If the LU factorization finds a numerically zero pivot.
    """
    y, res, tail = _solve_once(system)
    if not converge:
        return _as_solution(system, y, res, tail)
    history = [(system.N, complex(y[system.N]))]
    current = system
    change = float("nan")
    while True:
        if 2 * current.N > n_cap:
            log.warning("lattice solve not converged at N = %d (change %.3g)",
                        current.N, change)
            return _as_solution(current, y, res, tail, converged=False,
                                doubling_change=change, history=tuple(history))
        nxt = build_lattice_system(current.spec, current.p0, 2 * current.N)
        y2, res2, tail2 = _solve_once(nxt)
        y0_old, y0_new = y[current.N], y2[nxt.N]
        change = abs(y0_new - y0_old) / max(abs(y0_new), 1e-300)
        history.append((nxt.N, complex(y0_new)))
        current, y, res, tail = nxt, y2, res2, tail2
        if change < rtol:
            return _as_solution(current, y, res, tail, converged=True,
                                doubling_change=change, history=tuple(history))


def lattice_y(spec, p, N=N_DEFAULT, converge=True):
    """``y(p)`` from a lattice solve centred at ``p`` itself."""
    system = build_lattice_system(spec, p, N)
    return solve_lattice(system, converge=converge).y0


def sigma_min(spec, p0, N):
    """Smallest singular value of the truncated ``I - J`` and ``||I - J||_2``."""
    A = build_lattice_system(spec, p0, N).matrix
    sv = scipy.linalg.svdvals(A)
    return float(sv[-1]), float(sv[0])


# -- singularities on the imaginary axis -------------------------------------

@dataclass(frozen=True)
class SingularityReport:
    """Branch point, resonance flag and numerically found pole candidates."""

    omega: float
    s_r: float
    k0: int
    resonant: bool
    pole_candidates: tuple = ()
    s_r_exact: object = None


def _branch_point(omega):
    fr = Fraction(omega).limit_denominator(10**9)
    if abs(float(fr) - omega) > 1e-15 * max(1.0, omega):
        fr = Fraction(omega)
    # 1 + s_r + k0 omega = 0 with s_r in [0, omega)
    k0 = -math.ceil(1 / fr)
    s_r = -1 - k0 * fr
    return s_r, int(k0)


def classify_singularities(spec, scan=True, N=32, n_scan=200, threshold=POLE_THRESHOLD):
    """Locate the branch point ``s_r`` and scan for pole candidates.

    ``s_r`` in ``[0, omega)`` solves ``1 + s_r + k0 omega = 0`` and is
    computed in rational arithmetic from the (rationalized) frequency.
    Pole candidates are local minima of the smallest singular value of
    ``(I - J)(i s)`` over ``s`` in ``(0, omega)``, refined by a bounded
    golden-section search and kept when below ``threshold * ||I - J||``.
    """
    omega = spec.omega
    s_r_exact, k0 = _branch_point(omega)
    s_r = float(s_r_exact)
    inv = 1.0 / omega
    resonant = abs(inv - round(inv)) < 1e-12 and round(inv) >= 1
    candidates = []
    if scan:
        eps = 1e-6 * omega
        grid = np.linspace(eps, omega - eps, n_scan)
        grid = grid[np.abs(grid - s_r) > 1e-9]
        vals = np.array([sigma_min(spec, 1j * s, N)[0] for s in grid])
        for i in range(1, len(grid) - 1):
            if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
                lo, hi = grid[i - 1], grid[i + 1]
                res = scipy.optimize.minimize_scalar(
                    lambda s: sigma_min(spec, 1j * s, N)[0], bounds=(lo, hi),
                    method="bounded", options={"xatol": 1e-12})
                smin, snorm = sigma_min(spec, 1j * res.x, N)
                if smin < threshold * snorm:
                    candidates.append(float(res.x))
    return SingularityReport(omega=omega, s_r=s_r, k0=k0, resonant=bool(resonant),
                             pole_candidates=tuple(candidates), s_r_exact=s_r_exact)


# -- pole cancellation at s0 = 0 --------------------------------------------

@dataclass(frozen=True)
class PoleCancellationReport:
    """Solution d of the regularizing system at ``s0 = 0`` and
    ``S = sum_{j != 0} c_j q_j d_j``."""

    N: int
    d: np.ndarray
    S: complex
    margin: float
    S_half: complex
    relative_change: float


def _pole_cancellation_S(spec, N, s0=0.0):
    J = spec.max_harmonic
    c = lattice_coefficients(spec, max(J, 2 * N))
    Jc = (len(c) - 1) // 2
    n = np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])
    x = 1 + s0 + n * spec.omega
    q = (1 + sqrt_fourth_quadrant(x + 0j)) / (s0 + n * spec.omega)
    # d_n + sum_{k != 0} c_{k-n} q_k d_k = -c_{-n} (1 + sqrt(1 + s0))
    diff = n[None, :] - n[:, None]
    A = np.eye(len(n), dtype=complex) + c[Jc + diff] * q[None, :]
    rhs = -c[Jc - n] * (1 + np.sqrt(1 + s0))
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularityError(
            f"I - J' is numerically singular (cond {cond:.3g}); genericity hypotheses fail")
    d = np.linalg.solve(A, rhs)
    S = complex(np.sum(c[Jc + n] * q * d))
    return n, d, S


def check_pole_cancellation(spec, N=64):
    """Solve the regularizing system for ``d`` at ``s0 = 0``.

    Returns ``S = sum_{j != 0} c_j q_j d_j`` at half-width ``N`` together
    with its value at ``N // 2``; a nonzero, N-stable S is the numerical
    signature that the pole of the coefficients at p = 0 cancels.

    Raises
    ------
    ValueError
        For a vanishing or resonant forcing.
    SingularityError
        If the truncated ``I - J'`` is numerically singular.
    """
    if spec.max_harmonic == 0:
        raise ValueError("vanishing forcing: S = 0 trivially")
    inv = 1.0 / spec.omega
    if abs(inv - round(inv)) < 1e-12:
        raise ValueError("resonant frequency (1/omega integer) is excluded")
    _, d_half, S_half = _pole_cancellation_S(spec, max(1, N // 2))
    _, d, S = _pole_cancellation_S(spec, N)
    rel = abs(S - S_half) / max(abs(S), 1e-300)
    return PoleCancellationReport(N=N, d=d, S=S, margin=abs(S), S_half=S_half,
                                  relative_change=float(rel))


# -- line sampling and Bromwich inversion -----------------------------------

def lattice_line(spec, sigma, s_max, per_period=64, N=N_DEFAULT, keep=0.5):
    """Sample ``y(sigma + i s)`` on a uniform grid ``|s| <= s_max``.

    One lattice solve at ``p0 = sigma + i s0`` yields y at every
    ``s0 + n omega``, so ``per_period`` solves cover the line with step
    ``omega / per_period``. Only the central ``keep`` fraction of each
    solve is used. N is raised as needed so that ``keep * N * omega``
    covers ``s_max``.

    Returns
    -------
    s, y : ndarray
    """
    omega = spec.omega
    n_need = int(np.ceil(s_max / omega)) + 1
    N = max(int(N), int(np.ceil(n_need / keep)), spec.max_harmonic + 10)
    ds = omega / per_period
    ks = np.arange(-n_need * per_period, n_need * per_period + 1)
    s = ks * ds
    y = np.empty(len(s), dtype=complex)
    for j in range(per_period):
        p0 = complex(sigma, j * ds)
        sol = solve_lattice(build_lattice_system(spec, p0, N), converge=False)
        sel = np.flatnonzero(np.mod(ks, per_period) == j)
        nn = (ks[sel] - j) // per_period
        y[sel] = sol.y[N + nn]
    m = np.abs(s) <= s_max + 1e-12
    return s[m], y[m]


def inverse_laplace_line(y_line, s_grid, sigma, t_grid, n_asymptotic=3, beta=1.0,
                         taper=0.1):
    """Bromwich inversion ``Y(t) = e^{sigma t}/(2 pi) int y(sigma+is) e^{ist} ds``.

    The slowly decaying part of y is removed first: a least-squares fit of
    ``sum_m a_m (p + beta)^{-e_m}`` with exponents 1, 2, 5/2 (the first
    ``n_asymptotic`` of them) on the outer half of the line is subtracted
    and inverted exactly. The remainder is summed by the trapezoid rule
    (a direct, non-uniform-output Fourier sum) with a raised-cosine taper
    on the outer ``taper`` fraction of the line.

    Raises
    ------
    ValueError
        If the sampling step is too coarse for the requested times: the
        aliased copies ``Y(t + 2 pi / ds) e^{-sigma 2 pi / ds}`` must be
        below ~1e-6, which needs ``ds <= 2 pi / (t_max + 14 / sigma)``.
    """
    from scipy.special import gamma as _gamma

    s = np.asarray(s_grid, dtype=float)
    yv = np.asarray(y_line, dtype=complex)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ds = s[1] - s[0]
    if not np.allclose(np.diff(s), ds, rtol=1e-9, atol=1e-12):
        raise ValueError("s_grid must be uniform")
    need = 2 * np.pi / (t.max() + 14.0 / sigma)
    if ds > need * (1 + 1e-9):
        raise ValueError(f"line sampled too coarsely: need ds <= {need:.4g}, got {ds:.4g}")
    p = sigma + 1j * s
    exps = [1.0, 2.0, 2.5][:n_asymptotic]
    asym_t = np.zeros(len(t), dtype=complex)
    rem = yv.copy()
    if exps:
        outer = np.abs(s) >= 0.5 * np.abs(s).max()
        B = np.stack([(p + beta) ** -e for e in exps], axis=1)
        coef, *_ = np.linalg.lstsq(B[outer], yv[outer], rcond=None)
        rem = yv - B @ coef
        for a, e in zip(coef, exps):
            asym_t += a * t ** (e - 1) * np.exp(-beta * t) / _gamma(e)
    S = np.abs(s).max()
    w = np.ones(len(s))
    edge = np.abs(s) > (1 - taper) * S
    if taper > 0:
        x = (np.abs(s[edge]) - (1 - taper) * S) / (taper * S)
        w[edge] = 0.5 * (1 + np.cos(np.pi * x))
    wts = w * ds
    wts[0] *= 0.5
    wts[-1] *= 0.5
    out = np.empty(len(t), dtype=complex)
    g = rem * wts
    for lo in range(0, len(t), 512):
        tt = t[lo:lo + 512]
        out[lo:lo + 512] = np.exp(1j * np.outer(tt, s)) @ g
    out = out * np.exp(sigma * t) / (2 * np.pi) + asym_t
    from .volterra import ComplexSeries
    dt = t[1] - t[0] if len(t) > 1 else 0.0
    return ComplexSeries(float(t[0]), float(dt), out)
