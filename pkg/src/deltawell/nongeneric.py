"""Geometric forcing family with a Floquet bound state (incomplete ionization).

The family has lattice coefficients ``c_n = -r lambda^|n|``. Writing
``y_n = r a_n z_n`` with

    a_n(s0) = (sqrt(1 + s0 + n omega) - 1) / r,

the homogeneous lattice equation becomes ``a_n z_n = sum_{j>=1}
lambda^j (z_{n+j} + z_{n-j})``. A nontrivial l2 solution needs
``z_n = 0`` for ``n < -1`` and ``(1 + a_{-1}) z_{-1} = 0``, so it can only
exist at the axis point ``s_p`` where ``1 + a_{-1}(s_p) = 0``. There the
remaining equations reduce to a three-term recurrence whose decaying
solution is fixed by the continued fraction

    g_{n-1} = G_n - 1/g_n,   G_n = lambda + (lambda^2 + a_n)/(lambda (1 + a_n)),

and a kernel exists exactly when ``g_0 = 1/G_0``.

In terms of the time-domain drive, lattice coefficients ``c_j`` belong to
``eta`` with Fourier coefficients ``-c_{-j}``, i.e. ``C_n = +r lambda^n``;
:func:`family_forcing` returns that drive.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .forcing import GEOMETRIC, build_forcing
from .kernel import sqrt_fourth_quadrant

__all__ = [
    "CFResult",
    "IonizationReport",
    "KernelVector",
    "LambdaRoots",
    "OverlapResult",
    "adjoint_kernel_residual",
    "branch_point",
    "continued_fraction_g0",
    "eval_a",
    "family_forcing",
    "find_lambda_s",
    "initial_condition_rhs",
    "kernel_residual",
    "kernel_vector",
    "locate_s_p",
    "overlap_c",
    "pole_point",
    "riccati_closed_form",
    "verify_incomplete_ionization",
]

log = logging.getLogger(__name__)

SCAN_POINTS = 400
SCAN_RANGE = (0.02, 0.98)
POLE_GUARD = 1e-3
ZERO_GUARD = 1e-14


def eval_a(omega, r, s0, n):
    """``a_n(s0) = (sqrt(1 + s0 + n omega) - 1) / r`` (fourth-quadrant root)."""
    x = 1.0 + s0 + np.asarray(n) * omega
    root = sqrt_fourth_quadrant(np.asarray(x, dtype=complex))
    out = (root - 1.0) / r
    return out[()] if np.ndim(out) == 0 else out


def pole_point(omega, r):
    """Axis point ``s_p`` in ``(0, omega)`` with ``1 + a_{-1}(s_p) = 0``.

    ``sqrt(1 + s - omega) = 1 - r`` gives ``s_p = omega - 1 + (1 - r)^2``,
    reduced into ``[0, omega)`` along the lattice.
    """
    if not 0 < r < 1:
        raise ValueError("need 0 < r < 1")
    return float(np.mod(omega - 1.0 + (1.0 - r) ** 2, omega))


def branch_point(omega):
    """``s_r`` in ``[0, omega)`` with ``1 + s_r`` a multiple of omega."""
    return float(np.mod(-1.0, omega))


def _resolve_s0(omega, r, s0):
    if s0 is None or s0 == "sp":
        return pole_point(omega, r)
    if s0 == "sr":
        return branch_point(omega)
    return float(s0)


def family_forcing(omega, r, lam):
    """Time-domain drive whose lattice coefficients are ``-r lambda^|n|``."""
    return build_forcing(GEOMETRIC, omega, r=-r, lam=lam)


def initial_condition_rhs(omega, r, lam, s0):
    """``1 / G_0 = [lambda + 1/lambda + (lambda - 1/lambda)/(1 + a_0)]^{-1}``."""
    a0 = float(np.real(eval_a(omega, r, s0, 0)))
    lam = np.asarray(lam, dtype=float)
    return 1.0 / (lam + 1.0 / lam + (lam - 1.0 / lam) / (1.0 + a0))


def _G(lam, a):
    return lam + (lam * lam + a) / (lam * (1.0 + a))


@dataclass(frozen=True)
class CFResult:
    """Backward continued-fraction evaluation at one lambda.

    ``g0`` is the midpoint of the two seeded runs, ``bracket`` their
    ordered values. ``monotone`` is False when the two runs ever straddle
    zero (the endpoint argument then no longer brackets the true value);
    ``pole_crossing`` marks a division by a g within ``1e-14`` of zero.
    ``signs`` holds the sign pattern of ``g_1 .. g_{n0}`` of the central
    run, used to detect poles of g0 between neighbouring lambdas.
    """

    lam: float
    g0: float
    bracket: tuple
    monotone: bool
    pole_crossing: bool
    n0: int
    signs: np.ndarray

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]


def _iterate(lam, a, seed):
    """Run ``g_{n-1} = G_n - 1/g_n`` from ``g_{n0} = seed``; a[k] = a_{k}."""
    n0 = len(a) - 1
    g = np.empty(n0 + 1)
    g[n0] = seed
    hit = False
    for n in range(n0, 0, -1):
        if abs(g[n]) < ZERO_GUARD:
            hit = True
            g[n] = ZERO_GUARD if g[n] >= 0 else -ZERO_GUARD
        g[n - 1] = _G(lam, a[n]) - 1.0 / g[n]
    return g, hit


def continued_fraction_g0(omega, r, lam, s0=None, n0=10, seed_mode="envelope"):
    """Evaluate ``g_0(lambda)`` by backward iteration from depth ``n0``.

    Parameters
    ----------
    seed_mode : {"envelope", "limit"}
        ``"envelope"`` seeds ``g_{n0} = 1/lambda +- (1-lambda^2)/sqrt(n0 omega)``
        and returns the two resulting values as a bracket; ``"limit"``
        seeds with ``1/lambda`` only (zero-width bracket).
    s0 : float or {"sp", "sr"}, optional
        Spectral parameter; defaults to the pole point ``s_p``.
    """
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    s0 = _resolve_s0(omega, r, s0)
    a = np.real(eval_a(omega, r, s0, np.arange(n0 + 1)))
    if seed_mode == "limit":
        g, hit = _iterate(lam, a, 1.0 / lam)
        return CFResult(lam, float(g[0]), (float(g[0]), float(g[0])), True, hit, n0,
                        np.sign(g[1:]))
    if seed_mode != "envelope":
        raise ValueError(f"unknown seed_mode {seed_mode!r}")
    w = (1.0 - lam * lam) / np.sqrt(n0 * omega)
    lo, hit_lo = _iterate(lam, a, 1.0 / lam - w)
    hi, hit_hi = _iterate(lam, a, 1.0 / lam + w)
    monotone = bool(np.all(np.sign(lo[1:]) == np.sign(hi[1:])) and np.all(lo[1:] != 0))
    b = tuple(sorted((float(lo[0]), float(hi[0]))))
    mid, _ = _iterate(lam, a, 1.0 / lam)
    return CFResult(lam, 0.5 * (b[0] + b[1]), b, monotone, hit_lo or hit_hi, n0,
                    np.sign(mid[1:]))


def riccati_closed_form(G, n0, seed, n):
    """Closed form of ``x_{n-1} = G - 1/x_n`` with constant ``G = 2 cos(phi)``.

    ``x_n = cos((n - n0) phi + theta) / cos((n + 1 - n0) phi + theta)`` with
    theta fixed by ``x_{n0} = seed``.
    """
    if not -2 < G < 2:
        raise ValueError("closed form needs |G| < 2")
    phi = np.arccos(G / 2)
    # seed = cos(theta) / cos(phi + theta)  =>  tan(theta) = (cos phi - 1/seed)/sin phi
    theta = np.arctan((np.cos(phi) - 1.0 / seed) / np.sin(phi))
    n = np.asarray(n, dtype=float)
    return np.cos((n - n0) * phi + theta) / np.cos((n + 1 - n0) * phi + theta)


@dataclass(frozen=True)
class LambdaRoots:
    """Roots of ``F(lambda) = g_0(lambda) - 1/G_0(lambda)`` on (0, 1)."""

    roots: tuple
    residuals: tuple
    poles: tuple
    s0: float
    n0: int

    @property
    def lambda_s(self):
        if not self.roots:
            raise LookupError("no root of the initial-condition matching found")
        return self.roots[0]

    @property
    def residual(self):
        return self.residuals[0]


def _F(omega, r, lam, s0, n0):
    cf = continued_fraction_g0(omega, r, lam, s0, n0, seed_mode="limit")
    return cf.g0 - float(initial_condition_rhs(omega, r, lam, s0)), cf


def find_lambda_s(omega, r, s0=None, n0=400, n_scan=SCAN_POINTS, lam_range=SCAN_RANGE,
                  max_roots=None, guard=POLE_GUARD):
    """Locate roots of the initial-condition matching ``g_0 = 1/G_0``.

    The sign of ``F`` is scanned on ``n_scan`` points; intervals in which
    any ``g_n`` with ``n >= 1`` changes sign contain a pole of ``g_0`` and
    are skipped. The remaining sign changes are refined by Brent's method
    and rejected if they lie within ``guard`` of a pole interval or if
    the residual is not small.

    With ``s0`` defaulting to the pole point the first root is the ratio
    at which the lattice operator acquires a kernel.
    """
    s0 = _resolve_s0(omega, r, s0)
    lams = np.linspace(lam_range[0], lam_range[1], n_scan)
    vals, signs = [], []
    for lam in lams:
        F, cf = _F(omega, r, lam, s0, n0)
        vals.append(F)
        signs.append(cf.signs)
    vals = np.array(vals)
    poles, roots, residuals = [], [], []
    for i in range(len(lams) - 1):
        if np.any(signs[i] != signs[i + 1]):
            poles.append(0.5 * (lams[i] + lams[i + 1]))
            continue
        if np.sign(vals[i]) == np.sign(vals[i + 1]):
            continue
        lam_root = scipy.optimize.brentq(lambda x: _F(omega, r, x, s0, n0)[0],
                                         lams[i], lams[i + 1], xtol=1e-15, rtol=1e-15)
        res = abs(_F(omega, r, lam_root, s0, n0)[0])
        if res > 1e-8:
            continue
        roots.append(float(lam_root))
        residuals.append(float(res))
        if max_roots and len(roots) >= max_roots:
            break
    # a root too close to a detected pole interval is not trusted
    keep = [k for k, lr in enumerate(roots)
            if all(abs(lr - p) > guard + 0.5 * (lams[1] - lams[0]) for p in poles)]
    return LambdaRoots(roots=tuple(roots[k] for k in keep),
                       residuals=tuple(residuals[k] for k in keep),
                       poles=tuple(poles), s0=s0, n0=n0)


@dataclass(frozen=True)
class KernelVector:
    """Decaying solution ``z_n`` (``n >= -1``) of the three-term recurrence.

    ``z[k]`` holds ``z_{k-1}``; ``V[k]`` holds ``V_{k-1}``.
    """

    lambda_s: float
    omega: float
    r: float
    s0: float
    z: np.ndarray
    V: np.ndarray
    decay_ratio: float
    recurrence_residual: float

    @property
    def n(self):
        return np.arange(-1, len(self.z) - 1)

    def redundancy_sum(self, n):
        """``sum_{k=1}^n lambda^k z_{k-2}``; tends to zero for a true kernel."""
        k = np.arange(1, n + 1)
        return float(np.sum(self.lambda_s ** k * self.z[k - 1]))

    def lattice_y(self):
        """Kernel of ``I - J`` at ``i s0``: ``y_n = r a_n z_n`` for ``n >= -1``."""
        a = np.real(eval_a(self.omega, self.r, self.s0, self.n))
        return self.r * a * self.z


def _zs_residual(lam, a, z):
    """Relative residual of the three-term recurrence for n >= 0."""
    # index k <-> n = k - 1
    out = []
    for k in range(1, len(z) - 1):
        lhs = (1 + a[k + 1]) * z[k + 1] + (1 + a[k - 1]) * z[k - 1]
        rhs = (lam * (1 + a[k]) + lam + a[k] / lam) * z[k]
        scale = max(abs(lhs), abs(rhs), abs((1 + a[k + 1]) * z[k + 1]), 1e-300)
        out.append(abs(lhs - rhs) / scale)
    return float(max(out)) if out else 0.0


def kernel_vector(omega, r, lambda_s, N=60, s0=None, depth=None):
    """Build the kernel vector from continued-fraction ratios.

    ``V_{-1} = 1`` and ``V_n = V_{n-1} / g_n``, where the ``g_n`` come from a
    backward sweep seeded with ``1/lambda`` at ``depth`` (default
    ``N + 400``). Then ``z_{-1} = 1`` and
    ``z_n = (lambda - 1/lambda)/(1 + a_n) V_{n-1}``. Forward recursion of
    the recurrence is never used: its general solution grows like
    ``lambda^-n``.

    Raises
    ------
    ArithmeticError
        If the constructed tail is not decaying.
    """
    if N < 50:
        raise ValueError("N must be >= 50")
    s0 = _resolve_s0(omega, r, s0)
    lam = float(lambda_s)
    depth = N + 400 if depth is None else int(depth)
    a = np.real(eval_a(omega, r, s0, np.arange(-1, depth + 1)))  # a[k] = a_{k-1}
    g, hit = _iterate(lam, a[1:], 1.0 / lam)   # g[n] = g_n for n = 0..depth
    if hit:
        raise ArithmeticError("continued fraction hit a pole while building the kernel")
    V = np.empty(N + 1)
    V[0] = 1.0
    for n in range(0, N):
        V[n + 1] = V[n] / g[n]
    z = np.empty(N + 2)
    z[0] = 1.0
    z[1:] = (lam - 1 / lam) / (1 + a[1:N + 2]) * V[: N + 1]
    tail = np.abs(z[N // 2:])
    ratios = tail[1:] / tail[:-1]
    decay = float(np.exp(np.polyfit(np.arange(len(tail)), np.log(tail), 1)[0]))
    if not decay < 1 or np.any(ratios > 1.0 + 1e-12):
        raise ArithmeticError("kernel tail is not decaying; lambda_s is not a root")
    res = _zs_residual(lam, a[: N + 2], z)
    return KernelVector(lambda_s=lam, omega=omega, r=r, s0=s0, z=z, V=V,
                        decay_ratio=decay, recurrence_residual=res)


def _lattice_matrix(omega, r, lam, s0, N):
    from .floquet import build_lattice_system
    return build_lattice_system(family_forcing(omega, r, lam), 1j * s0, N)


def kernel_residual(kv, N=None):
    """``||(I - J) y|| / ||y||`` on the truncated lattice at ``i s0``."""
    N = len(kv.z) - 2 if N is None else N
    system = _lattice_matrix(kv.omega, kv.r, kv.lambda_s, kv.s0, N)
    y = np.zeros(2 * N + 1, dtype=complex)
    yk = kv.lattice_y()
    y[N - 1: N - 1 + min(len(yk), N + 2)] = yk[: N + 2]
    return float(np.linalg.norm(system.matrix @ y) / np.linalg.norm(y))


def adjoint_kernel_residual(kv, N=None):
    """``||(I - J)^* z|| / ||z||``: z itself spans the adjoint kernel."""
    N = len(kv.z) - 2 if N is None else N
    system = _lattice_matrix(kv.omega, kv.r, kv.lambda_s, kv.s0, N)
    z = np.zeros(2 * N + 1, dtype=complex)
    z[N - 1: N - 1 + min(len(kv.z), N + 2)] = kv.z[: N + 2]
    return float(np.linalg.norm(system.matrix.conj().T @ z) / np.linalg.norm(z))


def locate_s_p(omega, r, lam, N=64, window=0.05):
    """Refine the axis point where ``sigma_min((I - J)(i s))`` vanishes.

    A bounded golden-section search on ``sigma_min`` around the analytic
    ``s_p``. Returns ``(s_p, sigma_min / ||I - J||)``.
    """
    from .floquet import sigma_min

    spec = family_forcing(omega, r, lam)
    s_guess = pole_point(omega, r)
    s_r = branch_point(omega)
    lo, hi = max(1e-9, s_guess - window), min(omega - 1e-9, s_guess + window)
    if lo < s_r < hi:  # keep the branch point out of the search bracket
        if s_guess > s_r:
            lo = s_r + 1e-9
        else:
            hi = s_r - 1e-9
    res = scipy.optimize.minimize_scalar(lambda s: sigma_min(spec, 1j * s, N)[0],
                                         bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-13})
    smin, snorm = sigma_min(spec, 1j * res.x, N)
    return float(res.x), smin / snorm


@dataclass(frozen=True)
class OverlapResult:
    """``c = <f, z> = sum_n f_n conj(z_n)`` and a truncation remainder bound."""

    c: complex
    remainder_bound: float
    N: int
    s_p: float
    c_half: complex


def _inhomogeneity(omega, r, lam, s0, n):
    # f_n = sum_j c_j h(i(s0 + (n + j) omega)), h(p) = -1/p, c_j = -r lambda^|j|
    spec = family_forcing(omega, r, lam)
    J = spec.max_harmonic
    j = np.arange(-J, J + 1)
    c = -r * lam ** np.abs(j).astype(float)
    c[J] = 0.0
    out = np.empty(len(n), dtype=complex)
    for i, nn in enumerate(n):
        out[i] = np.sum(c * (1j / (s0 + (nn + j) * omega)))
    return out


def overlap_c(omega, r, lambda_s, kernel=None, N=50, s_p=None, tol=None):
    """Overlap of the inhomogeneity with the adjoint kernel vector.

    ``f`` is taken at ``p0 = i s_p`` and summed against ``z_n`` for
    ``-1 <= n <= N``. The remainder beyond N is bounded by
    ``sup|f| |z_N| rho / (1 - rho)`` with ``rho`` the largest tail ratio
    ``|z_{n+1}/z_n|`` seen on the second half of the kernel.

    Raises
    ------
    ArithmeticError
        If ``tol`` is given and the remainder bound exceeds it.
    """
    if s_p is None:
        s_p, _ = locate_s_p(omega, r, lambda_s)
    if kernel is None or len(kernel.z) < N + 2:
        kernel = kernel_vector(omega, r, lambda_s, N=max(N, 50), s0=s_p)
    z = kernel.z[: N + 2]
    n = np.arange(-1, N + 1)
    f = _inhomogeneity(omega, r, lambda_s, s_p, n)
    c = complex(np.sum(f * np.conj(z)))
    half = (N + 2) // 2
    c_half = complex(np.sum(f[:half] * np.conj(z[:half])))
    tail = np.abs(kernel.z[len(kernel.z) // 2:])
    rho = float(np.max(tail[1:] / tail[:-1]))
    f_far = _inhomogeneity(omega, r, lambda_s, s_p, np.arange(N + 1, N + 200))
    fsup = float(max(np.abs(f).max(), np.abs(f_far).max()))
    bound = fsup * abs(z[-1]) * rho / (1 - rho)
    if tol is not None and bound > tol:
        raise ArithmeticError(f"remainder bound {bound:.3g} exceeds {tol:.3g}; increase N")
    return OverlapResult(c=c, remainder_bound=float(bound), N=N, s_p=float(s_p),
                         c_half=c_half)


@dataclass(frozen=True)
class IonizationReport:
    """Late-time behaviour of P(t) for the family drive."""

    lam: float
    T: float
    P_floor: float
    band: tuple
    band_early: float
    band_late: float
    t: np.ndarray
    P: np.ndarray
    theta: np.ndarray

    @property
    def band_stable(self):
        return abs(self.band_late - self.band_early) <= 0.2 * max(self.band_early, 1e-300)


def verify_incomplete_ionization(omega, r, lam, T=400.0, h=1e-2):
    """Simulate from the bound state under the family drive at ``lam``.

    Reports ``min P`` over the final quarter, the ``|theta|`` band
    ``(min, max)`` there, and the band widths over ``[T/2, 3T/4]`` and
    ``[3T/4, T]``.
    """
    from .volterra import bound_state, compute_theta, solve_Y

    spec = family_forcing(omega, r, lam)
    Y = solve_Y(spec, bound_state(), T, h)
    theta = compute_theta(Y, 1.0)
    t = Y.t
    absth = np.abs(theta.values)
    P = absth ** 2
    q3 = t >= 0.75 * T
    mid = (t >= 0.5 * T) & (t < 0.75 * T)
    band = (float(absth[q3].min()), float(absth[q3].max()))
    return IonizationReport(lam=float(lam), T=float(T), P_floor=float(P[q3].min()),
                            band=band,
                            band_early=float(absth[mid].max() - absth[mid].min()),
                            band_late=float(band[1] - band[0]), t=t, P=P,
                            theta=theta.values)
