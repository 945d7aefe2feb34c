"""Classical ring dynamics: perturbed LIA, the exact rotating circle, and the
oscillator/momentum variables used for quantisation.

Momentum ``p0`` of the surrounding flow is taken to be zero throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import PhysicalConstants
from .errors import ValidationError


def lia_rhs(d1, d2, d3, alpha: float, omega: float):
    """Right-hand side ``alpha (r' x r'') + omega (2 r''' + 3 |r''|^2 r')``.

    ``d1, d2, d3`` are the first three derivatives of the projective vector
    in the dimensionless arc parameter; arrays broadcast over leading axes.
    """
    d1, d2, d3 = (np.asarray(x, dtype=float) for x in (d1, d2, d3))
    curv2 = np.sum(d2 * d2, axis=-1, keepdims=True)
    return alpha * np.cross(d1, d2) + omega * (2.0 * d3 + 3.0 * curv2 * d1)


def exact_solution(tau, xi, alpha, omega, phi0, q_over_R=(0.0, 0.0, 0.0)):
    """Rotating, translating unit circle and its analytic derivatives.

    Returns ``(r, dr/dtau, dr/dxi, d2r/dxi2, d3r/dxi3)``, each with shape
    ``tau.shape + (3,)`` after broadcasting ``tau`` against ``xi``.
    """
    tau, xi = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(xi, dtype=float))
    theta = xi + phi0 + omega * tau
    c, s = np.cos(theta), np.sin(theta)
    zero = np.zeros_like(theta)
    qx, qy, qz = q_over_R
    r = np.stack([qx + c, qy + s, qz + alpha * tau], axis=-1)
    r_tau = np.stack([-omega * s, omega * c, np.full_like(theta, alpha)], axis=-1)
    r1 = np.stack([-s, c, zero], axis=-1)
    r2 = np.stack([-c, -s, zero], axis=-1)
    r3 = np.stack([s, -c, zero], axis=-1)
    return r, r_tau, r1, r2, r3


def exact_solution_residual(alpha, omega, phi0, q_over_R=(0.0, 0.0, 0.0), n_tau=64, n_xi=64, tau_max=1.0):
    """Max ``|d_tau r - RHS|`` of the exact circle over an ``n_tau x n_xi`` grid."""
    tau = np.linspace(0.0, tau_max, n_tau)[:, None]
    xi = np.linspace(0.0, 2.0 * math.pi, n_xi, endpoint=False)[None, :]
    _, r_tau, r1, r2, r3 = exact_solution(tau, xi, alpha, omega, phi0, q_over_R)
    return float(np.max(np.abs(r_tau - lia_rhs(r1, r2, r3, alpha, omega))))


def dimensionless_time(t, gamma, R):
    """``tau = t Gamma / (4 pi R^2)``."""
    return t * gamma / (4.0 * math.pi * R**2)


def physical_time(tau, gamma, R):
    return tau * 4.0 * math.pi * R**2 / gamma


def dimensionless_arc(s, R):
    """``xi = s / R``."""
    return s / R


@dataclass(frozen=True)
class RingConfiguration:
    R: float
    q: tuple = (0.0, 0.0, 0.0)
    b_hat: tuple = (0.0, 0.0, 1.0)
    phi: float = 0.0
    Gamma: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.b_hat, dtype=float)
        if b.shape != (3,) or abs(np.linalg.norm(b) - 1.0) > 1e-12:
            raise ValidationError("b_hat must be a unit 3-vector")
        if len(self.q) != 3:
            raise ValidationError("q must be a 3-vector")

    def check(self, c: PhysicalConstants):
        if self.R < c.Rf:
            raise ValidationError(f"ring radius {self.R!r} is below Rf={c.Rf!r}")
        return self

    def delta_R(self, c: PhysicalConstants) -> float:
        return math.sqrt(self.R**2 - c.Rf**2)

    def oscillator(self, c: PhysicalConstants):
        """``(chi, varpi) = (Delta R / Rf) (cos phi, sin phi)``."""
        rho = self.delta_R(c) / c.Rf
        return rho * math.cos(self.phi), rho * math.sin(self.phi)

    @classmethod
    def from_oscillator(cls, chi, varpi, c: PhysicalConstants, **kw):
        R = c.Rf * math.sqrt(1.0 + chi**2 + varpi**2)
        return cls(R=R, phi=math.atan2(varpi, chi), **kw)


def momentum_from_ring(rc: RingConfiguration, c: PhysicalConstants) -> np.ndarray:
    """Vortex momentum ``p = pi rho0 R^2 Gamma b``."""
    return math.pi * c.rho0 * rc.R**2 * rc.Gamma * np.asarray(rc.b_hat, dtype=float)


def constraint_residual(rc: RingConfiguration, c: PhysicalConstants, relative: bool = True) -> float:
    """``|p^2 - pi^2 rho0^2 Rf^4 (1 + varpi^2 + chi^2)^2 Gamma^2|``, optionally over ``p^2``."""
    p = momentum_from_ring(rc, c)
    chi, varpi = rc.oscillator(c)
    p2 = float(p @ p)
    rhs = math.pi**2 * c.rho0**2 * c.Rf**4 * (1.0 + varpi**2 + chi**2) ** 2 * rc.Gamma**2
    res = abs(p2 - rhs)
    if relative:
        return res / p2 if p2 > 0 else res
    return res


def hamiltonian(p, chi, varpi, c: PhysicalConstants) -> float:
    p = np.asarray(p, dtype=float)
    return float(p @ p) / (2.0 * c.mu0) + 0.5 * c.E0 * c.omega * (varpi**2 + chi**2)


def conditional_time_flow(rc: RingConfiguration, c: PhysicalConstants, t_sharp: float, p=None) -> RingConfiguration:
    """Closed-form Hamiltonian flow over conditional time ``t_sharp``.

    The phase advances by ``omega t_sharp / t0`` (so ``(chi, varpi)`` rotate
    rigidly) and the center moves by ``-t_sharp p / mu0``.  ``R`` and
    ``Gamma`` are invariants.
    """
    p = momentum_from_ring(rc, c) if p is None else np.asarray(p, dtype=float)
    q = np.asarray(rc.q, dtype=float) - t_sharp * p / c.mu0
    return replace(rc, q=tuple(q.tolist()), phi=rc.phi + c.omega * t_sharp / c.t0)


def symplectic_euler_flow(rc: RingConfiguration, c: PhysicalConstants, t_sharp: float, steps: int, p=None):
    """First-order symplectic integration of the same flow (reference path).

    Uses the brackets ``{p_i, q_j} = delta_ij`` and ``{varpi, chi} = 1/(E0 t0)``
    with ``dF/dt = -{H, F}``.  Returns ``(q, chi, varpi)``.
    """
    p = momentum_from_ring(rc, c) if p is None else np.asarray(p, dtype=float)
    q = np.asarray(rc.q, dtype=float).copy()
    chi, varpi = rc.oscillator(c)
    h = t_sharp / steps
    rate = c.omega / c.t0
    for _ in range(steps):
        q = q - h * p / c.mu0
        chi = chi - h * rate * varpi
        varpi = varpi + h * rate * chi
    return q, chi, varpi
