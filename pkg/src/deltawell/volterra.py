"""Time-domain dynamics: the Volterra equation for Y(t) and its observables.

The unknown ``Y(t) = psi(0, t) eta(t) e^{it}`` solves

    Y = eta * (I + (2i + M) * Y),

where ``*`` is the causal convolution on [0, t]. From Y one recovers the
bound-state amplitude ``theta(t) = theta0 + 2i int_0^t Y`` and the
continuum amplitudes ``Theta(k, t)``.

The solver uses product integration: Y is taken piecewise linear on the
time grid and integrated exactly against the cell moments of M, so the
s^(-1/2) singularity of the kernel never meets a quadrature node.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .forcing import eval_eta
from .kernel import kernel_cell_moments

__all__ = [
    "ComplexSeries",
    "DecayFit",
    "InitialState",
    "SimulationResult",
    "StepTooLargeError",
    "bound_state",
    "compute_Theta",
    "compute_theta",
    "continuum_norm_series",
    "default_k_grid",
    "equation_residual",
    "eval_I",
    "fit_decay",
    "laplace_of_series",
    "simulate",
    "solve_Y",
]

log = logging.getLogger(__name__)


class StepTooLargeError(ValueError):
    """Raised when the implicit self-coupling of a step is not contractive."""

    def __init__(self, factor, suggested_h):
        super().__init__(
            f"contraction factor {factor:.3g} >= 1 on the first cell; "
            f"try h <= {suggested_h:.3g}")
        self.factor = factor
        self.suggested_h = suggested_h


def default_k_grid(spec=None, n_points=2048, k_max=None):
    """Uniform symmetric momentum grid.

    ``k_max = max(6, 3 sqrt(omega j_max))`` unless given, so that the
    multiphoton peaks near ``k^2 = j omega - 1`` are inside the grid.
    """
    if k_max is None:
        k_max = 6.0
        if spec is not None:
            j_max = max(1, spec.max_harmonic)
            k_max = max(6.0, 3.0 * np.sqrt(spec.omega * j_max))
    return np.linspace(-k_max, k_max, int(n_points))


@dataclass(frozen=True)
class InitialState:
    """Bound amplitude ``theta0`` and continuum amplitudes on a k-grid."""

    theta0: complex
    k_grid: np.ndarray
    Theta0: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k_grid, dtype=float)
        if len(k) < 3 or not np.allclose(k, -k[::-1], atol=1e-12 * max(1.0, k[-1])):
            raise ValueError("k_grid must be symmetric about 0")
        if not np.allclose(np.diff(k), k[1] - k[0]):
            raise ValueError("k_grid must be uniform")
        Th = np.asarray(self.Theta0, dtype=complex)
        if Th.shape != k.shape:
            raise ValueError("Theta0 must be sampled on k_grid")
        object.__setattr__(self, "k_grid", k)
        object.__setattr__(self, "Theta0", Th)
        if abs(self.normalization - 1.0) > 1e-8:
            raise ValueError(
                f"initial state not normalized: |theta0|^2 + int|Theta0|^2 = "
                f"{self.normalization:.12g}")

    @property
    def dk(self):
        return self.k_grid[1] - self.k_grid[0]

    @property
    def normalization(self):
        return abs(self.theta0) ** 2 + np.trapezoid(np.abs(self.Theta0) ** 2, dx=self.dk)

    @property
    def has_continuum(self):
        return bool(np.any(self.Theta0 != 0))


def bound_state(k_grid=None):
    """The bound state u_b: ``theta0 = 1``, no continuum part."""
    if k_grid is None:
        k_grid = default_k_grid()
    k_grid = np.asarray(k_grid, dtype=float)
    return InitialState(1.0 + 0j, k_grid, np.zeros(len(k_grid), dtype=complex))


def eval_I(state, t):
    """Inhomogeneous term I(t) of the Volterra equation.

    ``I(t) = theta0 + i/sqrt(2 pi) int_0^inf k (Theta0(k) + Theta0(-k))/(1+ik)
    exp(-i(k^2+1)t) dk`` with trapezoid quadrature on the stored grid.

    The factor k is the value of the continuum eigenfunction at the origin,
    ``u(k, 0) = i|k| / (sqrt(2 pi) (1 + i|k|))``; it is the same projection
    that appears in the equation for ``Theta(k, t)`` and is required for
    unitarity when the initial state has a continuum part.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.full(t.shape, complex(state.theta0))
    if state.has_continuum:
        k = state.k_grid
        half = k >= -1e-14 * k[-1]
        kp = k[half]
        even = state.Theta0[half] + state.Theta0[::-1][half]
        amp = even * kp / (1 + 1j * kp)
        wts = np.full(len(kp), state.dk)
        wts[0] *= 0.5
        wts[-1] *= 0.5
        amp = amp * wts
        E = kp * kp + 1.0
        for lo in range(0, len(t), 2048):
            tt = t[lo:lo + 2048]
            out[lo:lo + 2048] += (1j / np.sqrt(2 * np.pi)) * (
                np.exp(-1j * np.outer(tt, E)) @ amp)
    return out


@dataclass(frozen=True)
class ComplexSeries:
    """Samples on the uniform grid ``t0 + n dt``."""

    t0: float
    dt: float
    values: np.ndarray

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(len(self.values))

    def __len__(self):
        return len(self.values)


def solve_Y(spec, state, T, h, eta=None):
    """March the Volterra equation on ``[0, T]`` with step ``h``.

    Parameters
    ----------
    spec : ForcingSpec
    state : InitialState
    T, h : float
        Horizon and time step.
    eta : callable, optional
        Override for the drive ``t -> eta(t)`` (defaults to ``spec``).

    Returns
    -------
    ComplexSeries

    Raises
    ------
    StepTooLargeError
        If the implicit per-step coupling ``|eta| |i h + alpha_0|`` is not
        below one.
    """
    if T <= 0 or h <= 0:
        raise ValueError("need T > 0 and h > 0")
    N = int(round(T / h))
    t = h * np.arange(N + 1)
    eta_v = eval_eta(spec, t) if eta is None else np.asarray(eta(t), dtype=float)
    I_v = eval_I(state, t)

    table = kernel_cell_moments(h, N + 1)
    alpha, beta = table.product_weights()
    self_coupling = 1j * h + alpha[0]
    factor = float(np.max(np.abs(eta_v)) * abs(self_coupling))
    if factor >= 1.0:
        # alpha_0 ~ sqrt(h); shrink until the factor is about 1/2
        raise StepTooLargeError(factor, h * (0.5 / factor) ** 2)

    # w[i] multiplies Y[n-i] for 1 <= i <= n, except Y[0] which takes beta[n-1]
    w = alpha.copy()
    w[1:] += beta[:-1]
    K = len(w) - 1
    w_rev = np.ascontiguousarray(w[::-1])

    Y = np.zeros(N + 1, dtype=complex)
    Y[0] = eta_v[0] * I_v[0]
    trap = 0j  # h * (Y0/2 + Y1 + ... + Y_{n-1}/2), i.e. trapezoid up to t_{n-1}
    for n in range(1, N + 1):
        trap_half = trap + 0.5 * h * Y[n - 1]
        hist = np.dot(Y[:n], w_rev[K - n:K]) - alpha[n] * Y[0]
        rhs = I_v[n] + 2j * trap_half + hist
        Y[n] = eta_v[n] * rhs / (1.0 - eta_v[n] * self_coupling)
        trap = trap_half + 0.5 * h * Y[n]
    return ComplexSeries(0.0, h, Y)


def equation_residual(spec, state, Y):
    """Max residual of the discrete equation for a computed ``Y``.

    Re-evaluates ``eta (I + 2i trap(Y) + conv_h(M, Y)) - Y`` on every node
    with an independent full-convolution evaluation.
    """
    h = Y.dt
    y = Y.values
    N = len(y) - 1
    t = Y.t
    table = kernel_cell_moments(h, N + 1)
    alpha, beta = table.product_weights()
    trap = np.concatenate([[0], np.cumsum(0.5 * h * (y[1:] + y[:-1]))])
    conv = np.zeros(N + 1, dtype=complex)
    for n in range(1, N + 1):
        k = np.arange(n)
        conv[n] = np.sum(alpha[k] * y[n - k] + beta[k] * y[n - k - 1])
    res = eval_eta(spec, t) * (eval_I(state, t) + 2j * trap + conv) - y
    return float(np.max(np.abs(res)))


def compute_theta(Y, theta0):
    """``theta(t) = theta0 + 2i int_0^t Y`` (cumulative trapezoid)."""
    y = Y.values
    cum = np.concatenate([[0j], np.cumsum(0.5 * Y.dt * (y[1:] + y[:-1]))])
    return ComplexSeries(Y.t0, Y.dt, theta0 + 2j * cum)


def _linear_exp_weights(z):
    """Return ``(int_0^1 (1-u) e^{zu} du, int_0^1 u e^{zu} du)``."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0)
    zl = np.where(small, 1.0, z)
    # series: sum z^n / n! * [1/(n+1), 1/(n+2)]
    e0 = np.zeros_like(zs)
    e1 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for n in range(18):
        e0 = e0 + term / (n + 1)
        e1 = e1 + term / (n + 2)
        term = term * zs / (n + 1)
    ez = np.exp(zl)
    big0 = (ez - 1) / zl
    big1 = (ez * (zl - 1) + 1) / (zl * zl)
    I0 = np.where(small, e0, big0)
    I1 = np.where(small, e1, big1)
    return I0 - I1, I1


def _continuum_prefactor(k):
    ak = np.abs(k)
    return 2 * ak / (np.sqrt(2 * np.pi) * (1 - 1j * ak))


def _cell_integrals(y, h, E):
    """Exact cell integrals of piecewise-linear y against exp(iEs).

    Returns an array of shape (len(E), len(y) - 1).
    """
    A, B = _linear_exp_weights(1j * E * h)
    t = h * np.arange(len(y) - 1)
    phase = np.exp(1j * np.outer(E, t))
    return h * phase * (A[:, None] * y[None, :-1] + B[:, None] * y[None, 1:])


def compute_Theta(Y, Theta0, k_grid, chunk=256):
    """Continuum amplitudes ``Theta(k, T)`` at the final time of ``Y``.

    ``int_0^T Y(s) exp(i(1+k^2)s) ds`` is evaluated Filon-style: exact for
    the piecewise-linear interpolant of Y.
    """
    k = np.asarray(k_grid, dtype=float)
    out = np.array(Theta0, dtype=complex, copy=True) if Theta0 is not None else \
        np.zeros(len(k), dtype=complex)
    y = Y.values
    for lo in range(0, len(k), chunk):
        kk = k[lo:lo + chunk]
        E = 1.0 + kk * kk
        integral = _cell_integrals(y, Y.dt, E).sum(axis=1)
        out[lo:lo + chunk] += _continuum_prefactor(kk) * integral
    return out


def _tail_norm(Y, k_max):
    """Leading-order continuum weight outside ``|k| <= k_max``.

    For large k, ``int_0^t Y e^{iEs} ds ~ (Y(t) e^{iEt} - Y(0)) / (iE)``, so
    the weight beyond the grid is
    ``(|Y(t)|^2 + |Y(0)|^2) J - 2 Re(Y(t) conj(Y(0)) G(t))`` with
    ``G(t) = (2/pi) int_U^inf sqrt(u-1) u^-3 e^{iut} du``, ``U = 1 + k_max^2``
    and ``J = G(0)``. G is integrated exactly against a piecewise-linear
    interpolant on a geometric u-grid.
    """
    U = 1.0 + k_max * k_max
    u = U * 1.04 ** np.arange(0, 260)
    f = (2 / np.pi) * np.sqrt(u - 1) / u**3
    du = np.diff(u)
    J = float(np.sum(0.5 * du * (f[1:] + f[:-1])))
    # remainder beyond the last node, f ~ (2/pi) u^-5/2
    J += (2 / np.pi) * (2 / 3) * u[-1] ** -1.5
    y = Y.values
    out = (np.abs(y) ** 2 + abs(y[0]) ** 2) * J
    if y[0] != 0:
        t = Y.t
        G = np.zeros(len(t), dtype=complex)
        for lo in range(0, len(t), 4096):
            tt = t[lo:lo + 4096]
            A, B = _linear_exp_weights(1j * np.outer(tt, du))
            ph = np.exp(1j * np.outer(tt, u[:-1]))
            G[lo:lo + 4096] = (ph * du * (A * f[:-1] + B * f[1:])).sum(axis=1)
        out -= 2 * (y * np.conj(y[0]) * G).real
    return out


def continuum_norm_series(Y, Theta0, k_grid, chunk=64, tail=True):
    """``int |Theta(k, t)|^2 dk`` at every node of ``Y``.

    Trapezoid rule on the grid; with ``tail=True`` the leading-order
    weight outside the grid is added (see :func:`_tail_norm`).
    """
    k = np.asarray(k_grid, dtype=float)
    dk = k[1] - k[0]
    wk = np.full(len(k), dk)
    wk[0] *= 0.5
    wk[-1] *= 0.5
    Th0 = np.zeros(len(k), dtype=complex) if Theta0 is None else np.asarray(Theta0)
    y = Y.values
    total = np.zeros(len(y))
    for lo in range(0, len(k), chunk):
        kk = k[lo:lo + chunk]
        E = 1.0 + kk * kk
        cells = _cell_integrals(y, Y.dt, E)
        cum = np.concatenate([np.zeros((len(kk), 1), dtype=complex),
                              np.cumsum(cells, axis=1)], axis=1)
        Th = Th0[lo:lo + chunk, None] + _continuum_prefactor(kk)[:, None] * cum
        total += wk[lo:lo + chunk] @ (np.abs(Th) ** 2)
    if tail:
        total += _tail_norm(Y, float(k[-1]))
    return total


@dataclass(frozen=True)
class SimulationResult:
    """Output of :func:`simulate`."""

    Y: ComplexSeries
    theta: ComplexSeries
    P: np.ndarray
    k_grid: np.ndarray
    spectrum: np.ndarray
    unitarity_residual: np.ndarray

    @property
    def t(self):
        return self.Y.t

    @property
    def max_unitarity_residual(self):
        return float(np.max(np.abs(self.unitarity_residual)))


def simulate(spec, state, T, h, k_grid=None, diagnostics=True):
    """Solve for Y and reconstruct theta, P, the final spectrum and the
    unitarity residual.

    With ``diagnostics=False`` the (costly) residual time series is skipped
    and only its final value is reported.
    """
    if k_grid is None:
        k_grid = state.k_grid
    k_grid = np.asarray(k_grid, dtype=float)
    Theta0 = state.Theta0 if np.array_equal(k_grid, state.k_grid) else \
        np.interp(k_grid, state.k_grid, state.Theta0.real) + \
        1j * np.interp(k_grid, state.k_grid, state.Theta0.imag)
    Y = solve_Y(spec, state, T, h)
    theta = compute_theta(Y, state.theta0)
    P = np.abs(theta.values) ** 2
    spectrum = compute_Theta(Y, Theta0, k_grid)
    dk = k_grid[1] - k_grid[0]
    if diagnostics:
        cont = continuum_norm_series(Y, Theta0, k_grid)
        resid = P + cont - 1.0
    else:
        resid = np.array([P[-1] + np.trapezoid(np.abs(spectrum) ** 2, dx=dk) - 1.0])
    if np.max(P) > 1 + 1e-6:
        log.warning("survival probability exceeds 1 by %.3g", np.max(P) - 1)
    return SimulationResult(Y, theta, P, k_grid, spectrum, resid)


def laplace_of_series(Y, p, tail_period=None):
    """``int_0^T exp(-p t) Y(t) dt`` for the piecewise-linear interpolant.

    With ``tail_period`` the contribution of ``t > T`` is added assuming
    Y repeats its last period: ``e^{-pP} / (1 - e^{-pP})`` times the
    transform over ``[T - P, T]``.
    """
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    y = Y.values
    cells = _cell_integrals(y, Y.dt, 1j * p)
    out = cells.sum(axis=1)
    if tail_period is not None:
        m = int(round(tail_period / Y.dt))
        if m < 1 or m > len(y) - 1:
            raise ValueError("tail_period must span between one step and the whole series")
        last = cells[:, -m:].sum(axis=1)
        q = np.exp(-p * m * Y.dt)
        out = out + last * q / (1 - q)
    if Y.t0:
        out = out * np.exp(-p * Y.t0)
    return out


@dataclass(frozen=True)
class DecayFit:
    Gamma: float
    r_squared: float
    tail_exponent: float = float("nan")
    tail_r_squared: float = float("nan")
    theta_inf: complex = 0j

    @property
    def flagged(self):
        """Exponential fit quality below the 0.99 R^2 threshold."""
        return not (self.r_squared >= 0.99)


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], r2


def _window_mask(t, window):
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 10:
        raise ValueError("fit window contains fewer than 10 samples")
    return mask


def fit_decay(t, P=None, window=None, theta=None, tail_window=None, period=None):
    """Fit the exponential rate and the power-law tail.

    Parameters
    ----------
    t : array_like
        Sample times.
    P : array_like, optional
        Survival probability; ``log P`` is fitted linearly on ``window`` and
        ``Gamma`` is minus the slope.
    theta : array_like, optional
        Bound amplitude; ``log |theta - theta_inf|`` is fitted against
        ``log t`` on ``tail_window``. ``theta_inf`` is the mean of theta
        over the last 5% of the tail window, widened to whole periods when
        ``period`` is given.
    period : float, optional
        When given, the tail fit uses the maximum of ``|theta - theta_inf|``
        over consecutive windows of this length (its envelope), which keeps
        interference minima of an oscillating tail out of the fit.
    """
    t = np.asarray(t, dtype=float)
    Gamma = r2 = float("nan")
    if P is not None:
        if window is None:
            window = (t[0], t[-1])
        m = _window_mask(t, window)
        Pw = np.asarray(P, dtype=float)[m]
        if np.any(Pw <= 0):
            raise ValueError("P must be positive on the fit window")
        slope, _, r2 = _linfit(t[m], np.log(Pw))
        Gamma = -slope
    tail = tail_r2 = float("nan")
    theta_inf = 0j
    if theta is not None:
        if tail_window is None:
            tail_window = (t[0], t[-1])
        m = _window_mask(t, tail_window)
        th = np.asarray(theta, dtype=complex)[m]
        tw = t[m]
        n_last = max(1, int(round(0.05 * len(th))))
        if period is not None:
            # whole periods, so the oscillation averages out of theta_inf
            span = period * np.ceil(max(0.05 * (tw[-1] - tw[0]), period) / period)
            n_last = max(n_last, int(np.sum(tw > tw[-1] - span)))
        theta_inf = complex(np.mean(th[-n_last:])) if tail_window[1] < np.inf else 0j
        dev = np.abs(th - theta_inf)
        if period is not None:
            edges = np.arange(tw[0], tw[-1] + 1e-12, period)
            ts, ds = [], []
            for a, b in zip(edges[:-1], edges[1:]):
                sel = (tw >= a) & (tw < b)
                if sel.any():
                    i = np.argmax(dev[sel])
                    ts.append(tw[sel][i])
                    ds.append(dev[sel][i])
            tw, dev = np.array(ts), np.array(ds)
            if len(tw) < 3:
                raise ValueError("tail window shorter than three periods")
        keep = dev > 0
        tail, _, tail_r2 = _linfit(np.log(tw[keep]), np.log(dev[keep]))
    return DecayFit(Gamma=float(Gamma), r_squared=float(r2), tail_exponent=float(tail),
                    tail_r_squared=float(tail_r2), theta_inf=theta_inf)
