"""Filament-level observables built from the coherent-state description.

A :class:`FilamentState` couples a closed curve with a weight density
``|f(s)|^2`` and a momentum profile ``k(ell)`` on the evolute.  Each point
``s`` contributes a packet centered on the evolute point ``q(s)`` with mean
momentum ``hbar k(ell(s)) b(s)`` and an oscillator coherent state fixed by
the curvature radius ``R(s)``.

Momentum integrals are reduced to one-dimensional radial quadratures (see
:func:`vortex_spectra.coherent.radial_moment`); the oscillator sums are
Poisson expectations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import interpolate

from . import coherent
from .constants import PhysicalConstants
from .errors import FlexPointError, NumericalError, SubQuantumRadiusError, ValidationError
from .geometry import ClosedCurve, find_flex_points, in_intervals

log = logging.getLogger(__name__)

PROFILE_UNITS = {
    "gamma_plus": "m^2/s",
    "gamma_signed": "m^2/s",
    "energy_density": "J",
    "vorticity_perp": "1/s",
}


# Inputs ----------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """Unnormalised ``|f(s)|^2``.

    kind ``uniform``; ``gaussian-bump`` with ``center`` and ``width`` (arc
    length, wrapped periodically); ``custom`` with samples ``s`` and
    ``values`` interpolated by a periodic cubic spline and clipped at zero.
    """

    kind: str = "uniform"
    center: float = 0.0
    width: float = 1.0
    s: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian-bump", "custom"):
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "gaussian-bump" and not self.width > 0:
            raise ValidationError("gaussian-bump width must be positive")
        if self.kind == "custom":
            if len(self.s) < 4 or len(self.s) != len(self.values):
                raise ValidationError("custom weight needs matching 's' and 'values' with at least 4 samples")
            if np.any(np.diff(self.s) <= 0):
                raise ValidationError("custom weight 's' samples must be strictly increasing")
            if np.any(np.asarray(self.values) < 0):
                raise ValidationError("custom weight values must be non-negative")

    def density(self, s, length):
        s = np.asarray(s, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(s)
        if self.kind == "gaussian-bump":
            out = np.zeros_like(s)
            wraps = int(math.ceil(8.0 * self.width / length)) + 1
            for j in range(-wraps, wraps + 1):
                out += np.exp(-0.5 * ((s - self.center + j * length) / self.width) ** 2)
            return out
        xs = np.asarray(self.s, dtype=float)
        ys = np.asarray(self.values, dtype=float)
        if xs[0] < 0 or xs[-1] > length:
            raise ValidationError("custom weight samples must lie in [0, length]")
        if xs[-1] - xs[0] < length:
            xs = np.append(xs, xs[0] + length)
            ys = np.append(ys, ys[0])
        spline = interpolate.CubicSpline(xs, ys, bc_type="periodic")
        return np.maximum(spline(xs[0] + np.mod(s - xs[0], length)), 0.0)


@dataclass(frozen=True)
class MomentumProfile:
    """``k(ell) = k0 + sum_j a_j cos(2 pi j ell/P) + b_j sin(2 pi j ell/P)``.

    ``P`` is the total evolute length; for a degenerate evolute (``P = 0``)
    the profile is evaluated at ``ell = 0``.
    """

    k0: float = 1.0
    cos: tuple = ()
    sin: tuple = ()

    def __call__(self, ell, period):
        ell = np.asarray(ell, dtype=float)
        out = np.full(ell.shape, float(self.k0))
        if period <= 0.0:
            return out + float(sum(self.cos))
        phase = 2.0 * math.pi * ell / period
        for j, a in enumerate(self.cos, start=1):
            out += a * np.cos(j * phase)
        for j, b in enumerate(self.sin, start=1):
            out += b * np.sin(j * phase)
        return out


@dataclass(frozen=True, eq=False)
class FilamentState:
    curve: ClosedCurve
    constants: PhysicalConstants
    weight: WeightSpec = field(default_factory=WeightSpec)
    momentum: MomentumProfile = field(default_factory=MomentumProfile)
    arg_beta: float = 0.0
    kappa_tol: float | None = None

    @property
    def flex_tol(self) -> float:
        return 1e-6 / self.constants.Rf if self.kappa_tol is None else self.kappa_tol

    @property
    def length(self) -> float:
        return self.curve.length

    @cached_property
    def evolute(self):
        return self.curve.evolute(self.flex_tol)

    @cached_property
    def flex_intervals(self):
        return find_flex_points(self.curve, self.flex_tol)

    def grid(self, n: int):
        """Uniform periodic arc-length grid ``s_i = i S / n``."""
        return np.arange(n) * (self.length / n)

    def weights(self, s_grid):
        """``|f(s_i)|^2`` normalised so the periodic trapezoid sum is exactly 1."""
        s_grid = np.asarray(s_grid, dtype=float)
        h = self.length / len(s_grid)
        dens = self.weight.density(s_grid, self.length)
        norm = dens.sum() * h
        if not norm > 0:
            raise ValidationError("weight density vanishes on the whole grid")
        return dens / norm

    def local(self, s):
        """Vectorised pointwise data; flex points get NaN radius and ``flex`` True."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        c = self.curve
        u = c.u_of_s(s)
        r1, _, _, sp, cr, crn = c._local(u)
        kappa = crn / sp**3
        flex = (kappa < self.flex_tol) | in_intervals(s, self.flex_intervals)
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(flex, np.nan, 1.0 / kappa)
            b_hat = cr / crn[:, None]
            q = c(u) + (R**2)[:, None] * np.cross(cr, r1) / sp[:, None] ** 4
        ell = self.evolute.ell_of_u(u)
        k = self.momentum(ell, self.evolute.total)
        return dict(s=s, u=u, R=R, flex=flex, b_hat=b_hat, q=q, ell=ell, k=k)


# Pointwise observables ---------------------------------------------------------

@lru_cache(maxsize=4096)
def _moment(m, k, epsilon):
    return coherent.wavenumber_moment(m, k, epsilon)


def _point(state: FilamentState, s: float):
    d = state.local(s)
    if d["flex"][0]:
        raise FlexPointError(f"s={s:.12g} lies at a flex point; circulation is handled by disconnect()", s=s)
    beta2 = coherent.beta2_from_radius(d["R"][0], state.constants, s=np.array([s]))
    return d, float(beta2)


def gamma_plus_from(beta2: float, k: float, c: PhysicalConstants) -> float:
    """``Gamma+`` for occupation ``|beta|^2`` and packet momentum ``hbar k``."""
    series = coherent.circulation_series(beta2, c)
    return c.Rf / c.mutilde0 * c.hbar * _moment(1, abs(float(k)), c.epsilon_pkt) * series


def energy_from(beta2: float, k: float, c: PhysicalConstants) -> float:
    s_a, s_b = coherent.energy_series(beta2, c)
    k = abs(float(k))
    pref = c.hbar**2 / (8.0 * math.pi * c.mutilde0 * c.Rf)
    return pref * (c.omega * s_a * _moment(1, k, c.epsilon_pkt)
                   + c.sigma_ph2 * c.L**2 * s_b * _moment(3, k, c.epsilon_pkt))


def gamma_plus_at(state: FilamentState, s: float) -> float:
    """Unsigned local circulation ``Gamma+(s)``."""
    d, beta2 = _point(state, s)
    return gamma_plus_from(beta2, d["k"][0], state.constants)


def energy_at(state: FilamentState, s: float) -> float:
    """Energy ``E(s)`` of the packet/coherent product state at ``s``."""
    d, beta2 = _point(state, s)
    return energy_from(beta2, d["k"][0], state.constants)


# Profiles ----------------------------------------------------------------------

@dataclass
class Profile:
    s: np.ndarray
    values: np.ndarray
    kind: str
    flags: list

    @property
    def units(self) -> str:
        return PROFILE_UNITS[self.kind]

    @property
    def ok(self):
        return np.array([not f for f in self.flags])


@dataclass
class ProfileBundle:
    """Every per-point quantity on one grid, as written to ``profile.csv``."""

    s: np.ndarray
    R: np.ndarray
    ell: np.ndarray
    beta_abs: np.ndarray
    k: np.ndarray
    gamma_plus: np.ndarray
    gamma_signed: np.ndarray
    energy_density: np.ndarray
    w_perp: np.ndarray
    weights: np.ndarray
    flags: list

    def profile(self, kind: str) -> Profile:
        values = {"gamma_plus": self.gamma_plus, "gamma_signed": self.gamma_signed,
                  "energy_density": self.energy_density, "vorticity_perp": self.w_perp}[kind]
        return Profile(self.s, values, kind, list(self.flags))


def compute_profiles(state: FilamentState, n: int = 1024) -> ProfileBundle:
    """Evaluate all profiles on the uniform ``n``-point grid.

    Points at a flex or below the ground-state radius are kept with NaN
    values and a flag (``flex`` / ``sub-quantum``) instead of raising.
    """
    if n < 8:
        raise ValidationError("profile grid needs at least 8 points")
    c = state.constants
    s = state.grid(n)
    d = state.local(s)
    flags = [[] for _ in range(n)]
    R = d["R"]
    beta2 = np.full(n, np.nan)
    for i in range(n):
        if d["flex"][i]:
            flags[i].append("flex")
            continue
        try:
            beta2[i] = coherent.beta2_from_radius(R[i], c, s=np.array([s[i]]))
        except SubQuantumRadiusError:
            flags[i].append("sub-quantum")
    gp = np.full(n, np.nan)
    en = np.full(n, np.nan)
    for i in np.flatnonzero(np.isfinite(beta2)):
        gp[i] = gamma_plus_from(beta2[i], d["k"][i], c)
        en[i] = energy_from(beta2[i], d["k"][i], c)
    sign = np.sign(d["k"])
    gs = sign * gp
    w = _vorticity(gs, sign, flags, state.length / n, c.core_a)
    return ProfileBundle(s=s, R=R, ell=d["ell"], beta_abs=np.sqrt(beta2), k=d["k"], gamma_plus=gp,
                         gamma_signed=gs, energy_density=en, w_perp=w, weights=state.weights(s),
                         flags=[";".join(f) for f in flags])


def _vorticity(gamma, sign, flags, h, core_a):
    """``|dGamma/ds| / (2 pi a)`` by fourth-order periodic central differences.

    Stencils touching a flagged sample or straddling a sign flip of ``k``
    leave a gap (NaN); flagged samples gain ``w-gap``.
    """
    n = len(gamma)
    d = (-np.roll(gamma, -2) + 8 * np.roll(gamma, -1) - 8 * np.roll(gamma, 1) + np.roll(gamma, 2)) / (12.0 * h)
    w = np.abs(d) / (2.0 * math.pi * core_a)
    bad = [bool(f) for f in flags]
    for i in range(n):
        stencil = [(i + j) % n for j in (-2, -1, 0, 1, 2)]
        if any(bad[j] for j in stencil) or len({sign[j] for j in stencil}) > 1 or not np.isfinite(w[i]):
            w[i] = np.nan
            if "w-gap" not in flags[i]:
                flags[i].append("w-gap")
    return w


def gamma_signed_profile(state: FilamentState, n: int = 1024) -> Profile:
    """``Gamma(s) = sgn[k(ell(s))] Gamma+(s)`` on the uniform grid."""
    return compute_profiles(state, n).profile("gamma_signed")


def vorticity_perp_profile(state: FilamentState, n: int = 1024) -> Profile:
    """Secondary vorticity magnitude; its direction is only known to be normal to the tangent."""
    return compute_profiles(state, n).profile("vorticity_perp")


def vorticity_from_gamma(gamma, length: float, core_a: float):
    """``w_perp`` for a sampled periodic ``Gamma`` on a uniform grid (no flags)."""
    gamma = np.asarray(gamma, dtype=float)
    n = len(gamma)
    h = length / n
    d = (-np.roll(gamma, -2) + 8 * np.roll(gamma, -1) - 8 * np.roll(gamma, 1) + np.roll(gamma, 2)) / (12.0 * h)
    return np.abs(d) / (2.0 * math.pi * core_a)


def filament_total(bundle: ProfileBundle, values, length: float) -> float:
    """``sum_i |f_i|^2 v_i h``, the same periodic trapezoid as the normalisation."""
    values = np.asarray(values, dtype=float)
    h = length / len(values)
    ok = np.isfinite(values)
    return float(np.sum(bundle.weights[ok] * values[ok]) * h)


def energy_total(state: FilamentState, n: int = 1024) -> float:
    """``E[r] = oint |f|^2 E(s) ds``; flagged samples are skipped."""
    b = compute_profiles(state, n)
    return filament_total(b, b.energy_density, state.length)


def gamma_plus_total(state: FilamentState, n: int = 1024) -> float:
    b = compute_profiles(state, n)
    return filament_total(b, b.gamma_plus, state.length)


# Transition amplitude --------------------------------------------------------

def transition_probability(g_width: float, n: int, state: FilamentState, N: int = 1,
                           g_center=(0.0, 0.0, 0.0), grid: int = 1024) -> float:
    """``min(1, N |<psi_{g,n}|Psi>|^2)`` for a Gaussian micro-vortex ``g`` in level ``n``.

    The position integral is Gaussian x Gaussian in closed form; the loop
    integral uses the periodic trapezoid on ``grid`` points.  Flex and
    sub-quantum samples contribute nothing.
    """
    if N < 1:
        raise ValidationError("N must be at least 1")
    if not g_width > 0:
        raise ValidationError("g_width must be positive")
    c = state.constants
    s = state.grid(grid)
    h = state.length / grid
    f = np.sqrt(state.weights(s))
    d = state.local(s)
    amp = 0j
    for i in range(grid):
        if d["flex"][i] or f[i] == 0.0:
            continue
        try:
            beta2 = coherent.beta2_from_radius(d["R"][i], c)
        except SubQuantumRadiusError:
            continue
        beta = coherent.CoherentAmplitude(math.sqrt(beta2), state.arg_beta)
        ovl_n = coherent.number_overlap(n, beta)
        if ovl_n == 0:
            continue
        pkt = coherent.GaussianPacket(d["q"][i], c.hbar * d["k"][i] * d["b_hat"][i], c.epsilon_pkt, c.hbar)
        amp += f[i] * coherent.gaussian_overlap(g_center, g_width, pkt) * ovl_n * h
    p = N * abs(amp) ** 2
    if p > 1.0:
        log.warning("transition probability %.6g clamped to 1", p)
        return 1.0
    return p


# Asymptotics ------------------------------------------------------------------

@dataclass
class AsymptoticFit:
    radii: np.ndarray
    gamma_plus: np.ndarray
    slope: float
    intercept: float
    slope_stderr: float
    ci95: tuple
    range_ok: bool
    widened: bool

    @property
    def const(self) -> float:
        return math.exp(self.intercept)


def asymptotic_exponent(c: PhysicalConstants, R1: float, R2: float, points: int = 40,
                        k: float = 1.0) -> AsymptoticFit:
    """Log-log slope of ``Gamma+`` against ``R`` over a family of circles.

    The asymptotic regime needs ``R1/Rf >= 100`` and ``R2/R1 >= 100``; a
    narrower range is still fitted but reported with ``widened=True``.
    """
    if points < 10:
        raise ValidationError(f"asymptotic fit needs at least 10 points, got {points}")
    if not (R2 > R1 >= c.R0):
        raise ValidationError(f"need R0 <= R1 < R2, got R1={R1!r}, R2={R2!r}")
    radii = np.geomspace(R1, R2, points)
    gp = np.empty(points)
    for i, R in enumerate(radii):
        state = FilamentState(ClosedCurve.circle(R), c, momentum=MomentumProfile(k0=k))
        gp[i] = gamma_plus_at(state, 0.0)
    if not np.all(gp > 0):
        raise NumericalError("non-positive circulation in asymptotic sweep")
    x, y = np.log(radii), np.log(gp)
    (slope, intercept), cov = np.polyfit(x, y, 1, cov=True)
    stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    from scipy import stats
    half = float(stats.t.ppf(0.975, points - 2)) * stderr
    range_ok = R1 / c.Rf >= 1e2 and R2 / R1 >= 1e2
    return AsymptoticFit(radii, gp, float(slope), float(intercept), stderr,
                         (float(slope) - half, float(slope) + half), range_ok, not range_ok)


# Monte Carlo oracle -------------------------------------------------------------

def monte_carlo_point(beta2: float, k: float, c: PhysicalConstants, n_samples: int = 10**7,
                      rng=None, chunk: int = 2_000_000):
    """Monte Carlo ``Gamma+`` and ``E`` at one point, with standard errors.

    Samples the packet momentum density directly in 3D; shares only the
    oscillator series with the deterministic path.
    """
    rng = np.random.default_rng(rng)
    sd = 0.5 / c.epsilon_pkt
    series = coherent.circulation_series(beta2, c)
    s_a, s_b = coherent.energy_series(beta2, c)
    pref_g = c.Rf / c.mutilde0 * c.hbar * series
    pref_e = c.hbar**2 / (8.0 * math.pi * c.mutilde0 * c.Rf)
    center = np.array([0.0, 0.0, abs(k)])
    sums = np.zeros(4)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        kk = np.linalg.norm(rng.normal(center, sd, size=(m, 3)), axis=1)
        g = pref_g * kk
        e = pref_e * (c.omega * s_a * kk + c.sigma_ph2 * c.L**2 * s_b * kk**3)
        sums += (g.sum(), (g * g).sum(), e.sum(), (e * e).sum())
        done += m
    mg, me = sums[0] / done, sums[2] / done
    se_g = math.sqrt(max(sums[1] / done - mg * mg, 0.0) / done)
    se_e = math.sqrt(max(sums[3] / done - me * me, 0.0) / done)
    return mg, se_g, me, se_e
