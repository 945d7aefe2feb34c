"""Closed-form spectra of circular quantum vortex rings.

All three spectra share the oscillator denominator ``1 + sigma_ph**2 (n + 1/2)``.
Passing ``precise=True`` evaluates in mpmath (50 digits) and returns an
``mpmath.mpf``; use it for very large ``n`` where limits are probed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .constants import PhysicalConstants
from .errors import ValidationError

_MP_DPS = 50


@dataclass(frozen=True)
class RingQuantumNumbers:
    k: float
    n: int
    epsilon_sign: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValidationError(f"k must be a finite non-negative wavenumber, got {self.k!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 0:
            raise ValidationError(f"n must be a non-negative integer, got {self.n!r}")
        if self.epsilon_sign not in (-1, 1):
            raise ValidationError(f"epsilon_sign must be +1 or -1, got {self.epsilon_sign!r}")


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValidationError(f"oscillator quantum number must be a non-negative integer, got {n!r}")
    return int(n)


def oscillator_denominator(n, c: PhysicalConstants, precise=False):
    if precise:
        with mpmath.workdps(_MP_DPS):
            return 1 + mpmath.mpf(c.hbar) / (mpmath.mpf(c.E0) * mpmath.mpf(c.t0)) * (mpmath.mpf(n) + mpmath.mpf(1) / 2)
    return 1.0 + c.sigma_ph2 * (n + 0.5)


def radius_eigenvalue(n: int, c: PhysicalConstants, precise: bool = False):
    """Ring radius eigenvalue ``R_n = Rf sqrt(1 + sigma_ph^2 (n + 1/2))``."""
    n = _check_n(n)
    if precise:
        with mpmath.workdps(_MP_DPS):
            return mpmath.mpf(c.Rf) * mpmath.sqrt(oscillator_denominator(n, c, precise=True))
    return c.Rf * math.sqrt(oscillator_denominator(n, c))


def circulation_eigenvalue(q: RingQuantumNumbers, c: PhysicalConstants, precise: bool = False):
    """Signed circulation ``epsilon * hbar k Rf / (mutilde0 [1 + sigma^2 (n + 1/2)])``."""
    if precise:
        with mpmath.workdps(_MP_DPS):
            num = mpmath.mpf(c.hbar) * mpmath.mpf(q.k) * mpmath.mpf(c.Rf)
            den = mpmath.pi * mpmath.mpf(c.rho0) * mpmath.mpf(c.Rf) ** 3 * oscillator_denominator(q.n, c, True)
            return q.epsilon_sign * num / den
    return q.epsilon_sign * gamma_plus_value(q.k, q.n, c)


def gamma_plus_value(k, n, c: PhysicalConstants):
    """Unsigned circulation eigenvalue; vectorises over numpy ``k`` and ``n``."""
    return c.hbar * k * c.Rf / (c.mutilde0 * (1.0 + c.sigma_ph2 * (n + 0.5)))


def energy_eigenvalue(q: RingQuantumNumbers, c: PhysicalConstants, precise: bool = False):
    """Real-time energy eigenvalue ``E_n(k)``.

    The ``sigma_ph^2 (kL)^2`` term in the numerator is the scale correction;
    it is the only place ``L`` enters.
    """
    if precise:
        with mpmath.workdps(_MP_DPS):
            k = mpmath.mpf(q.k)
            hbar = mpmath.mpf(c.hbar)
            sigma2 = hbar / (mpmath.mpf(c.E0) * mpmath.mpf(c.t0))
            mut = mpmath.pi * mpmath.mpf(c.rho0) * mpmath.mpf(c.Rf) ** 3
            pref = hbar**2 * k / (8 * mpmath.pi * mut * mpmath.mpf(c.Rf))
            bracket = mpmath.mpf(c.omega) * (2 * q.n + 1) + sigma2 * (k * mpmath.mpf(c.L)) ** 2
            return pref * bracket / oscillator_denominator(q.n, c, True) ** 2
    return energy_value(q.k, q.n, c)


def energy_value(k, n, c: PhysicalConstants):
    pref = c.hbar**2 * k / (8.0 * math.pi * c.mutilde0 * c.Rf)
    bracket = c.omega * (2 * n + 1) + c.sigma_ph2 * (k * c.L) ** 2
    return pref * bracket / (1.0 + c.sigma_ph2 * (n + 0.5)) ** 2


def scale_correction_crossover(n: int, c: PhysicalConstants) -> float:
    """Wavenumber above which ``sigma^2 (kL)^2`` exceeds ``omega (2n + 1)``."""
    n = _check_n(n)
    if c.omega <= 0:
        return 0.0
    return math.sqrt(c.omega * (2 * n + 1) / c.sigma_ph2) / c.L


def spectrum_rows(ks, ns, c: PhysicalConstants):
    """Rows ``(k, n, R_n, Gamma_plus, E_n)`` for every pair in ``ks x ns``."""
    rows = []
    for k in ks:
        for n in ns:
            q = RingQuantumNumbers(float(k), int(n))
            rows.append((q.k, q.n, radius_eigenvalue(q.n, c),
                         circulation_eigenvalue(q, c), energy_eigenvalue(q, c)))
    return rows
