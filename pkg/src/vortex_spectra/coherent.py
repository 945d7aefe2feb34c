"""Coherent-state layer.

Maps a local curvature radius to an oscillator coherent amplitude, evaluates
Poisson-weighted series over oscillator levels, and describes the Gaussian
free-particle packets whose centers sit on the evolute.  The Dawson function
used to bound the circulation series also lives here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special

from .constants import PhysicalConstants
from .errors import NumericalError, SubQuantumRadiusError

# Above this many lattice points the Poisson sum is taken on a strided
# integer lattice; the summand is smooth on the scale sqrt(lambda).
MAX_SERIES_TERMS = 200_000
SERIES_TAIL_RTOL = 1e-15
_RADIUS_RTOL = 1e-13


@dataclass(frozen=True)
class CoherentAmplitude:
    abs_beta: float
    arg_beta: float = 0.0

    @property
    def beta(self) -> complex:
        return self.abs_beta * complex(math.cos(self.arg_beta), math.sin(self.arg_beta))

    @property
    def mean_number(self) -> float:
        return self.abs_beta**2


def beta2_from_radius(R, c: PhysicalConstants, s=None):
    """``|beta|^2`` for curvature radius ``R`` (scalar or array).

    Raises :class:`SubQuantumRadiusError` if any radius lies below ``R0``.
    """
    R = np.asarray(R, dtype=float)
    b2 = ((R / c.Rf) ** 2 - 1.0) / c.sigma_ph2 - 0.5
    bad = R < c.R0 * (1.0 - _RADIUS_RTOL)
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))[0]
        R_bad = float(np.atleast_1d(R)[idx])
        s_bad = None if s is None else float(np.atleast_1d(s)[idx])
        where = "" if s_bad is None else f" at s={s_bad:.12g}"
        raise SubQuantumRadiusError(
            f"curvature radius {R_bad:.6g} is below the ground-state radius R0={c.R0:.6g}{where}",
            R=R_bad, s=s_bad)
    b2 = np.maximum(b2, 0.0)
    return b2 if b2.ndim else float(b2)


def beta_from_radius(R: float, c: PhysicalConstants, arg_beta: float = 0.0) -> CoherentAmplitude:
    return CoherentAmplitude(math.sqrt(beta2_from_radius(R, c)), arg_beta)


def radius_from_beta(beta: CoherentAmplitude, c: PhysicalConstants) -> float:
    return c.Rf * math.sqrt(1.0 + c.sigma_ph2 * (beta.abs_beta**2 + 0.5))


def number_overlap(n: int, beta: CoherentAmplitude) -> complex:
    """``<n|beta> = beta^n exp(-|beta|^2/2) / sqrt(n!)``, evaluated in log space."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if beta.abs_beta == 0.0:
        return 1.0 + 0j if n == 0 else 0j
    log_mag = n * math.log(beta.abs_beta) - 0.5 * beta.abs_beta**2 - 0.5 * math.lgamma(n + 1)
    phase = n * beta.arg_beta
    return math.exp(log_mag) * complex(math.cos(phase), math.sin(phase))


def truncation_limit(lam: float) -> int:
    """Last oscillator level kept for mean occupation ``lam``."""
    return math.ceil(lam + 12.0 * math.sqrt(lam) + 30.0)


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _stirling_error(n):
    # log(n!) - [(n + 1/2) log n - n + log(2 pi)/2]
    n = np.asarray(n, dtype=float)
    small = n <= 15
    ns = np.where(small, np.maximum(n, 1.0), 1.0)
    direct = special.gammaln(ns + 1.0) - (ns + 0.5) * np.log(ns) + ns - _HALF_LOG_2PI
    nl = np.where(small, 16.0, n)
    inv, inv2 = 1.0 / nl, 1.0 / (nl * nl)
    series = inv * (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 * (1 / 1680 - inv2 / 1188))))
    return np.where(small, direct, series)


def _deviance(n, lam):
    # n log(n/lam) + lam - n, without cancellation near n == lam
    x = (n - lam) / lam
    near = np.abs(x) < 0.1
    xs = np.where(near, x, 0.0)
    series = np.zeros_like(xs)
    term = xs * xs
    for j in range(2, 20):
        series += term / (j * (j - 1))
        term = -term * xs
    xf = np.where(near, 0.0, x)
    far = (1.0 + xf) * np.log1p(xf) - xf
    return lam * np.where(near, series, far)


def _poisson_log_weights(n, lam):
    """Log Poisson pmf, accurate to ~1e-15 absolute even for lam ~ 1e15."""
    n = np.asarray(n, dtype=float)
    if lam == 0.0:
        return np.where(n == 0, 0.0, -np.inf)
    pos = n > 0
    npos = np.where(pos, n, 1.0)
    out = -_stirling_error(npos) - _deviance(npos, lam) - 0.5 * np.log(2.0 * math.pi * npos)
    return np.where(pos, out, -lam)


def poisson_expectation(lam: float, func):
    """``exp(-lam) sum_n lam^n/n! func(n)`` for a vectorised ``func``.

    ``func`` receives a float array of levels and may return an array whose
    last axis runs over those levels; the result then has the leading shape.
    Levels more than 12 standard deviations (plus 30) from the mean are
    dropped.  Very wide windows are summed on a strided lattice, which is
    spectrally accurate because both the weights and ``func`` vary on the
    scale ``sqrt(lam)``.
    """
    lam = float(lam)
    if not (math.isfinite(lam) and lam >= 0):
        raise NumericalError(f"invalid mean occupation {lam!r}")
    hi = truncation_limit(lam)
    lo = max(0, math.floor(lam - 12.0 * math.sqrt(lam) - 30.0))
    stride = max(1, math.ceil((hi - lo + 1) / MAX_SERIES_TERMS))
    n = np.arange(lo, hi + 1, stride, dtype=float)
    w = np.exp(_poisson_log_weights(n, lam))
    vals = np.asarray(func(n), dtype=float)
    total = stride * (vals @ w if vals.ndim == 1 else np.tensordot(vals, w, axes=([-1], [0])))

    mass = stride * w.sum()
    nxt = float(hi + stride)
    w_next = math.exp(float(_poisson_log_weights(np.array([nxt]), lam)[0]))
    tail = np.abs(np.asarray(func(np.array([nxt])), dtype=float)[..., 0]) * w_next
    ok = abs(mass - 1.0) < 1e-11 and np.all(tail <= SERIES_TAIL_RTOL * np.maximum(np.abs(total), 1e-300))
    if not ok:
        return _poisson_expectation_mp(lam, func, lo, hi)
    return total


def _poisson_expectation_mp(lam, func, lo, hi):
    """Extended-precision retry of :func:`poisson_expectation`."""
    if hi - lo > 5 * MAX_SERIES_TERMS:
        raise NumericalError(f"Poisson series for lambda={lam:.6g} did not converge")
    n = np.arange(lo, hi + 1, dtype=float)
    vals = np.atleast_2d(np.asarray(func(n), dtype=float))
    with mpmath.workdps(40):
        lam_mp = mpmath.mpf(lam)
        log_lam = mpmath.log(lam_mp) if lam > 0 else None
        sums = [mpmath.mpf(0)] * vals.shape[0]
        for j, level in enumerate(range(lo, hi + 1)):
            if lam == 0:
                w = mpmath.mpf(1) if level == 0 else mpmath.mpf(0)
            else:
                w = mpmath.exp(level * log_lam - lam_mp - mpmath.loggamma(level + 1))
            for i in range(vals.shape[0]):
                sums[i] += w * vals[i, j]
        out = np.array([float(x) for x in sums])
    vals_shape = np.asarray(func(np.array([float(lo)])), dtype=float).shape[:-1]
    return out.reshape(vals_shape) if vals_shape else float(out[0])


def circulation_series(beta2: float, c: PhysicalConstants) -> float:
    """``exp(-|b|^2) sum_n |b|^{2n} / (n! [1 + sigma^2 (n + 1/2)])``."""
    s2 = c.sigma_ph2
    return float(poisson_expectation(beta2, lambda n: 1.0 / (1.0 + s2 * (n + 0.5))))


def energy_series(beta2: float, c: PhysicalConstants):
    """Poisson averages of ``(2n+1)/D_n^2`` and ``1/D_n^2``, ``D_n = 1 + sigma^2 (n + 1/2)``."""
    s2 = c.sigma_ph2

    def terms(n):
        inv_d2 = 1.0 / (1.0 + s2 * (n + 0.5)) ** 2
        return np.stack([(2.0 * n + 1.0) * inv_d2, inv_d2])

    out = poisson_expectation(beta2, terms)
    return float(out[0]), float(out[1])


def dawson(x):
    """Dawson function ``D+(x) = exp(-x^2) int_0^x exp(t^2) dt`` (odd in ``x``)."""
    return special.dawsn(x)


def dawson_bound(abs_beta, c: PhysicalConstants):
    """Upper bound ``2 D+(|beta|) / (sigma^2 |beta|)`` on :func:`circulation_series`."""
    abs_beta = np.asarray(abs_beta, dtype=float)
    return 2.0 * dawson(abs_beta) / (c.sigma_ph2 * abs_beta)


# Momentum-space packets ----------------------------------------------------

@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty packet centered at ``center_q`` with momentum ``center_p``.

    Position variance is ``epsilon**2`` per axis, momentum variance
    ``hbar**2 / (4 epsilon**2)`` per axis.
    """

    center_q: np.ndarray
    center_p: np.ndarray
    epsilon: float
    hbar: float

    @property
    def normalization(self) -> float:
        return (self.epsilon / self.hbar) ** 1.5 * (2.0 / math.pi) ** 0.75

    def momentum_wavefunction(self, p):
        dp = np.asarray(p, dtype=float) - self.center_p
        phase = -np.sum(dp * self.center_q, axis=-1) / self.hbar
        return self.normalization * np.exp(1j * phase - (self.epsilon / self.hbar) ** 2 * np.sum(dp * dp, axis=-1))

    def momentum_density(self, p):
        dp = np.asarray(p, dtype=float) - self.center_p
        return self.normalization**2 * np.exp(-2.0 * (self.epsilon / self.hbar) ** 2 * np.sum(dp * dp, axis=-1))

    def position_wavefunction(self, q):
        dq = np.asarray(q, dtype=float) - self.center_q
        norm = (2.0 * math.pi * self.epsilon**2) ** -0.75
        phase = np.sum(np.asarray(q, dtype=float) * self.center_p, axis=-1) / self.hbar
        return norm * np.exp(1j * phase - np.sum(dq * dq, axis=-1) / (4.0 * self.epsilon**2))


def gaussian_overlap(center, width: float, packet: GaussianPacket) -> complex:
    """``<g|z>`` for a real normalized Gaussian ``g`` of position spread ``width``.

    ``|g|^2`` has variance ``width**2`` per axis, like the packet with
    ``epsilon``.  The integral is done in closed form.
    """
    w2, e2 = width**2, packet.epsilon**2
    k = packet.center_p / packet.hbar
    d = np.asarray(center, dtype=float) - packet.center_q
    xm = (np.asarray(center, dtype=float) * e2 + packet.center_q * w2) / (w2 + e2)
    pref = (2.0 * width * packet.epsilon / (w2 + e2)) ** 1.5
    log_mag = -(d @ d) / (4.0 * (w2 + e2)) - (k @ k) * w2 * e2 / (w2 + e2)
    return pref * np.exp(log_mag + 1j * float(k @ xm))


def _radial_kernel(u, a):
    # exp(-(u-a)^2/2) * (1 - exp(-2ua)) / (ua); the a -> 0 limit is 2 exp(-u^2/2)
    x = u * a
    shape = np.where(x > 1e-12, -np.expm1(-2.0 * x) / np.where(x > 0, x, 1.0), 2.0 - 2.0 * x)
    return np.exp(-0.5 * (u - a) ** 2) * shape


def radial_moment(m: int, a: float, epsrel: float = 1e-11) -> float:
    """``E|X|^m`` for ``X ~ N(a e, I_3)`` by the angularly reduced radial integral."""
    a = abs(float(a))
    lo, hi = max(0.0, a - 40.0), a + 40.0
    pts = [a] if lo < a < hi else None
    f = lambda u: u ** (m + 2) * _radial_kernel(u, a)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=epsrel, limit=400)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"radial moment m={m}, a={a:.6g} failed: {exc}") from None
    return val / math.sqrt(2.0 * math.pi)


def mean_norm_closed_form(a: float) -> float:
    """``E|X|`` for ``X ~ N(a e, I_3)`` (mean of a noncentral chi with 3 dof)."""
    a = abs(float(a))
    if a < 1e-6:
        return 2.0 * math.sqrt(2.0 / math.pi) * (1.0 + a * a / 6.0)
    return math.sqrt(2.0 / math.pi) * math.exp(-0.5 * a * a) + (a + 1.0 / a) * math.erf(a / math.sqrt(2.0))


def wavenumber_moment(m: int, k0: float, epsilon: float) -> float:
    """Average of ``|k|^m`` over the packet density ``exp[-2 eps^2 (k - k0 b)^2]``.

    The density is Gaussian with standard deviation ``1/(2 eps)`` per axis.
    """
    sd = 0.5 / epsilon
    return sd**m * radial_moment(m, k0 / sd)
