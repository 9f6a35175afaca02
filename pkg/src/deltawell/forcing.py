"""Periodic zero-mean forcing eta(t) and the shift-genericity checker.

A forcing is described by its Fourier coefficients,

    eta(t) = sum_{j != 0} C_j exp(i j omega t),   C_{-j} = conj(C_j),

either as a finite list ``C_1 .. C_J`` (a trigonometric polynomial) or as
the geometric family ``C_n = -r lambda^n`` whose sum has the closed form
``2 r lam (lam - cos wt) / (1 + lam^2 - 2 lam cos wt)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "ForcingSpec",
    "GenericityReport",
    "build_forcing",
    "eval_eta",
    "forcing_from_mapping",
    "forcing_to_mapping",
    "genericity_distance",
    "sequence_distance",
    "sine_forcing",
]

HARMONIC = "harmonic-list"
GEOMETRIC = "geometric"
_FORMS = {HARMONIC, GEOMETRIC, "harmonic"}

# geometric coefficients below this magnitude are treated as zero
_GEOMETRIC_CUTOFF = 1e-18


@dataclass(frozen=True)
class ForcingSpec:
    """Immutable description of the drive.

    Attributes
    ----------
    omega : float
        Angular frequency.
    form : str
        ``"harmonic-list"`` or ``"geometric"``.
    coefficients : tuple of complex
        ``(C_1, ..., C_J)`` for the harmonic-list form, empty otherwise.
    r, lam : float
        Strength and ratio of the geometric form. ``r`` may be negative,
        which flips the sign of the whole drive.
    """

    omega: float
    form: str = HARMONIC
    coefficients: tuple = field(default_factory=tuple)
    r: float = 0.0
    lam: float = 0.0

    @property
    def is_geometric(self):
        return self.form == GEOMETRIC

    @property
    def max_harmonic(self):
        """Largest active harmonic index (numerical cutoff for geometric)."""
        if self.is_geometric:
            if self.lam == 0.0:
                return 1
            n = np.log(_GEOMETRIC_CUTOFF / abs(self.r)) / np.log(self.lam)
            return max(1, int(np.ceil(n)))
        nz = [j + 1 for j, c in enumerate(self.coefficients) if c != 0]
        return max(nz) if nz else 0

    def coefficient(self, j):
        """Return C_j for any integer j (C_0 = 0, C_{-j} = conj C_j)."""
        j = int(j)
        if j == 0:
            return 0j
        if self.is_geometric:
            return complex(-self.r * self.lam ** abs(j))
        k = abs(j)
        c = complex(self.coefficients[k - 1]) if k <= len(self.coefficients) else 0j
        return c if j > 0 else c.conjugate()

    def coefficient_array(self, J):
        """Array of C_j for j = -J..J (index j + J)."""
        J = int(J)
        out = np.zeros(2 * J + 1, dtype=complex)
        if self.is_geometric:
            k = np.arange(1, J + 1)
            pos = -self.r * self.lam**k
            out[J + 1:] = pos
            out[:J] = pos[::-1]
            return out
        for k, c in enumerate(self.coefficients[:J], start=1):
            out[J + k] = c
            out[J - k] = np.conj(c)
        return out


def build_forcing(form, omega, coefficients=None, r=None, lam=None, c0=0.0):
    """Validate parameters and return a :class:`ForcingSpec`.

    Parameters
    ----------
    form : {"harmonic-list", "harmonic", "geometric"}
    omega : float
        Angular frequency, must be positive.
    coefficients : sequence of complex, optional
        ``C_1 .. C_J`` for the harmonic-list form.
    r, lam : float, optional
        Geometric-family strength and ratio.
    c0 : complex, optional
        Constant Fourier term. Only zero-mean drives are admissible; any
        nonzero value raises.

    Raises
    ------
    ValueError
        On a nonzero constant term, a non-positive frequency, or a geometric
        ratio outside (0, 1).
    """
    if c0 != 0:
        raise ValueError("constant Fourier term C_0 must vanish (zero-mean drive)")
    omega = float(omega)
    if not omega > 0:
        raise ValueError("omega must be positive")
    if form not in _FORMS:
        raise ValueError(f"unknown forcing form {form!r}")
    if form == GEOMETRIC:
        if r is None or lam is None:
            raise ValueError("geometric form needs r and lambda")
        lam = float(lam)
        r = float(r)
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {lam}")
        if r == 0.0:
            raise ValueError("geometric strength r must be nonzero")
        return ForcingSpec(omega=omega, form=GEOMETRIC, r=r, lam=lam)
    coeffs = tuple(complex(c) for c in (coefficients or ()))
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    return ForcingSpec(omega=omega, form=HARMONIC, coefficients=coeffs)


def sine_forcing(r, omega):
    """``r sin(omega t)``, i.e. ``C_1 = -i r / 2``."""
    return build_forcing(HARMONIC, omega, coefficients=[-0.5j * r])


def eval_eta(spec, t):
    """Evaluate eta(t); real-valued, vectorized over ``t``."""
    t = np.asarray(t, dtype=float)
    theta = spec.omega * t
    if spec.is_geometric:
        lam = spec.lam
        c = np.cos(theta)
        out = 2.0 * spec.r * lam * (lam - c) / (1.0 + lam * lam - 2.0 * lam * c)
    else:
        out = np.zeros_like(theta)
        for k, ck in enumerate(spec.coefficients, start=1):
            out = out + 2.0 * (ck * np.exp(1j * k * theta)).real
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class GenericityReport:
    """Distance of e_1 to the span of the first ``N + 1`` shifts of C."""

    N: int
    distance: float
    verdict: str
    rank: int
    ill_conditioned: bool
    history: tuple = ()


def sequence_distance(seq, N, rtol=1e-12):
    """Distance of e_1 to span{T^n seq : 0 <= n <= N}.

    ``seq`` is the sequence ``(C_1, C_2, ...)`` truncated at some length
    L > N; shift n contributes the column ``seq[n:]`` padded with zeros.
    The span is orthonormalized by a column-pivoted QR, keeping only
    directions whose diagonal entry exceeds ``rtol`` times the largest.

    Returns
    -------
    (distance, rank, ill_conditioned)
    """
    seq = np.asarray(seq, dtype=complex)
    L = len(seq)
    if N + 1 > L:
        raise ValueError("sequence too short for the requested number of shifts")
    A = np.zeros((L, N + 1), dtype=complex)
    for n in range(N + 1):
        A[: L - n, n] = seq[n:]
    if not np.any(A):
        return 1.0, 0, True
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0]))
    Qr = Q[:, :rank]
    # e_1 = first coordinate; its projection coefficients are conj(Q[0, :])
    proj_norm2 = float(np.sum(np.abs(Qr[0, :]) ** 2))
    dist = np.sqrt(max(0.0, 1.0 - proj_norm2))
    return float(dist), rank, rank < N + 1


def _coefficient_sequence(spec, length):
    if spec.is_geometric:
        return -spec.r * spec.lam ** np.arange(1, length + 1)
    out = np.zeros(length, dtype=complex)
    c = np.asarray(spec.coefficients, dtype=complex)[:length]
    out[: len(c)] = c
    return out


def genericity_distance(spec_or_seq, N, length=None, exact_tol=1e-12, fail_tol=1e-6):
    """Numerical evidence for the shift-genericity condition.

    Parameters
    ----------
    spec_or_seq : ForcingSpec or callable or array_like
        A forcing, a callable ``n -> C_n`` (n >= 1), or an explicit
        sequence ``(C_1, C_2, ...)``.
    N : int
        Number of shifts beyond the first (span of T^0 C .. T^N C).
    length : int, optional
        Truncation length of the shifted vectors. Defaults to ``8 (N + 1)``
        plus the largest harmonic for finite forcings.

    Notes
    -----
    The verdict looks at the distances over the doublings of N that end
    at N (at most three of them): ``generic-exact`` if the distance
    vanishes to ``exact_tol``; ``fails`` if it has stayed above
    ``fail_tol`` and has not moved by more than ``fail_tol`` across three
    doublings; ``generic-asymptotic`` otherwise.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if length is None:
        length = 8 * (N + 1)
        if isinstance(spec_or_seq, ForcingSpec) and not spec_or_seq.is_geometric:
            length += spec_or_seq.max_harmonic
    if isinstance(spec_or_seq, ForcingSpec):
        seq = _coefficient_sequence(spec_or_seq, length)
    elif callable(spec_or_seq):
        seq = np.array([spec_or_seq(n) for n in range(1, length + 1)], dtype=complex)
    else:
        seq = np.asarray(spec_or_seq, dtype=complex)

    Ns = [N]
    while len(Ns) < 4 and Ns[0] // 2 >= 1:
        Ns.insert(0, Ns[0] // 2)
    history = []
    for n in Ns:
        d, rank, ill = sequence_distance(seq, n)
        history.append(d)
    distance = history[-1]
    if distance <= exact_tol:
        verdict = "generic-exact"
    elif (len(history) == 4 and min(history) > fail_tol
          and max(history) - min(history) <= fail_tol):
        verdict = "fails"
    else:
        verdict = "generic-asymptotic"
    return GenericityReport(N=N, distance=distance, verdict=verdict, rank=rank,
                            ill_conditioned=ill, history=tuple(zip(Ns, history)))


# -- flat key/value serialization -------------------------------------------

def forcing_to_mapping(spec):
    """Flat ``key -> str`` mapping (``omega``, ``form``, ``r``, ``lambda``,
    ``c_re_j``, ``c_im_j``)."""
    out = {"omega": repr(spec.omega), "form": spec.form}
    if spec.is_geometric:
        out["r"] = repr(spec.r)
        out["lambda"] = repr(spec.lam)
    else:
        for j, c in enumerate(spec.coefficients, start=1):
            out[f"c_re_{j}"] = repr(c.real)
            out[f"c_im_{j}"] = repr(c.imag)
    return out


def forcing_from_mapping(values):
    """Inverse of :func:`forcing_to_mapping`; values may be str or float."""
    form = values.get("form", HARMONIC)
    omega = float(values["omega"])
    if form == GEOMETRIC:
        return build_forcing(GEOMETRIC, omega, r=float(values["r"]),
                             lam=float(values["lambda"]))
    if float(values.get("c_re_0", 0.0)) or float(values.get("c_im_0", 0.0)):
        raise ValueError("constant Fourier term C_0 must vanish (zero-mean drive)")
    idx = set()
    for key in values:
        for prefix in ("c_re_", "c_im_"):
            if key.startswith(prefix):
                idx.add(int(key[len(prefix):]))
    idx.discard(0)
    J = max(idx) if idx else 0
    coeffs = [complex(float(values.get(f"c_re_{j}", 0.0)),
                      float(values.get(f"c_im_{j}", 0.0))) for j in range(1, J + 1)]
    return build_forcing(HARMONIC, omega, coefficients=coeffs)
