"""Memory kernel of the reduced Volterra equation.

The kernel is

    M(s) = (2i/pi) int_0^inf u^2/(1+u^2) exp(-is(1+u^2)) du
         = (1+i)/(2*sqrt(2*pi)) * int_s^inf exp(-i u) u^(-3/2) du

which behaves like s^(-1/2) at the origin and like s^(-3/2) at infinity.
Everything here is expressed through the complex Fresnel-type integral

    E(s) = int_0^s exp(-i u) u^(-1/2) du,

so that pointwise values, cell integrals and first cell moments all have
closed forms without evaluating M at the singular endpoint.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import fresnel

__all__ = [
    "KAPPA",
    "KernelTable",
    "eval_M",
    "fresnel_E",
    "kernel_cell_moments",
    "laplace_M",
    "sqrt_fourth_quadrant",
    "write_kernel_table",
]

#: Prefactor in front of the u^(-3/2) representation. The normalization is
#: fixed by the u^2/(1+u^2) representation, i.e. by int_0^inf M = 1/2.
KAPPA = (1 + 1j) / (2 * np.sqrt(2 * np.pi))

_E_INF = np.sqrt(np.pi) * np.exp(-0.25j * np.pi)  # E(s) as s -> infinity


def fresnel_E(s):
    """Return E(s) = int_0^s exp(-iu) u^(-1/2) du for s >= 0."""
    s = np.asarray(s, dtype=float)
    S, C = fresnel(np.sqrt(2.0 * s / np.pi))
    return np.sqrt(2.0 * np.pi) * (C - 1j * S)


def _tail_integral(s):
    """F(s) = int_s^inf exp(-iu) u^(-3/2) du (s > 0)."""
    return 2.0 * np.exp(-1j * s) / np.sqrt(s) - 2j * (_E_INF - fresnel_E(s))


def eval_M(s):
    """Evaluate the memory kernel M(s) for s > 0.

    Parameters
    ----------
    s : float or array_like
        Strictly positive times.

    Returns
    -------
    complex or ndarray of complex

    Raises
    ------
    ValueError
        If any ``s <= 0``; the kernel is singular at the origin.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("M(s) is only defined for s > 0")
    out = KAPPA * _tail_integral(s_arr)
    return out[()] if out.ndim == 0 else out


def sqrt_fourth_quadrant(w):
    """Square root with values in the closed fourth quadrant.

    The principal root is taken first and negated wherever it lands in
    the open upper half plane (or on the negative real axis). For
    ``w = 1 - i p`` with ``Re p >= 0`` this is the branch that is
    continuous from the right half plane and tends to 1 as p -> 0.
    """
    w = np.asarray(w, dtype=complex)
    root = np.sqrt(w)
    flip = (root.imag > 0) | ((root.imag == 0) & (root.real < 0))
    root = np.where(flip, -root, root)
    return root[()] if root.ndim == 0 else root


def laplace_M(p):
    """Closed-form Laplace transform of M, ``-i/p + i sqrt(1-ip)/p``.

    Valid for ``Re p > 0`` and, by continuity from the right, on the
    imaginary axis away from p = 0 and the branch point p = -i.
    """
    p = np.asarray(p, dtype=complex)
    if np.any(p == 0):
        raise ZeroDivisionError("the Laplace transform of M has a pole at p = 0")
    out = (-1j + 1j * sqrt_fourth_quadrant(1 - 1j * p)) / p
    return out[()] if out.ndim == 0 else out


def _antiderivative0(s):
    # int_0^s F(u) du = s F(s) + E(s); s F(s) written without the 1/sqrt(s)
    s = np.asarray(s, dtype=float)
    sF = 2.0 * np.sqrt(s) * np.exp(-1j * s) - 2j * s * (_E_INF - fresnel_E(s))
    return sF + fresnel_E(s)


def _antiderivative1(s):
    # int_0^s u F(u) du = s^2 F / 2 + (i/2) sqrt(s) e^{-is} - (i/4) E(s)
    s = np.asarray(s, dtype=float)
    E = fresnel_E(s)
    s2F = 2.0 * s**1.5 * np.exp(-1j * s) - 2j * s * s * (_E_INF - E)
    return 0.5 * s2F + 0.5j * np.sqrt(s) * np.exp(-1j * s) - 0.25j * E


@dataclass(frozen=True)
class KernelTable:
    """Cell integrals of M on the uniform grid ``s_k = k h``.

    ``moments[k]`` is the integral of M over ``[k h, (k+1) h]`` and
    ``first_moments[k]`` the integral of ``(s - k h) M(s)`` over the same
    cell. ``M_values[0]`` is NaN since the kernel is singular there.
    """

    h: float
    s_grid: np.ndarray
    M_values: np.ndarray
    moments: np.ndarray
    first_moments: np.ndarray

    @property
    def cells(self):
        return len(self.moments)

    def product_weights(self):
        """Weights of the piecewise-linear product rule.

        Returns ``(alpha, beta)`` such that for a function Y linear on each
        cell ``int_0^{t_n} M(t_n - t) Y(t) dt`` equals
        ``sum_k alpha[k] Y[n-k] + beta[k] Y[n-k-1]`` with k = 0..n-1.
        """
        beta = self.first_moments / self.h
        alpha = self.moments - beta
        return alpha, beta


@lru_cache(maxsize=8)
def kernel_cell_moments(h, K):
    """Build the :class:`KernelTable` for step ``h`` and ``K`` cells.

    Cell integrals come from differences of closed-form antiderivatives;
    the first cell therefore never touches the singular point s = 0.
    The result is cached per ``(h, K)``.
    """
    h = float(h)
    K = int(K)
    if h <= 0 or K < 1:
        raise ValueError("need h > 0 and K >= 1")
    s = h * np.arange(K + 1)
    P0 = _antiderivative0(s)
    P1 = _antiderivative1(s)
    m = KAPPA * np.diff(P0)
    # int (s - kh) F = [P1] - kh [P0]
    m1 = KAPPA * (np.diff(P1) - s[:-1] * np.diff(P0))
    M_vals = np.full(K + 1, np.nan + 0j)
    M_vals[1:] = eval_M(s[1:])
    for arr in (s, M_vals, m, m1):
        arr.setflags(write=False)
    return KernelTable(h=h, s_grid=s, M_values=M_vals, moments=m, first_moments=m1)


def write_kernel_table(table, path):
    """Write ``s, Re M, Im M, Re m_k, Im m_k`` rows as CSV (17 significant digits)."""
    K = table.cells
    M = table.M_values[:K]
    data = np.column_stack([table.s_grid[:K], M.real, M.imag,
                            table.moments.real, table.moments.imag])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="s,re_M,im_M,re_m,im_m",
               comments="")
