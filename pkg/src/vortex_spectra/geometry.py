"""Differential geometry of smooth closed curves in truncated Fourier form.

A curve is ``r(u) = sum_m A_m cos(m u) + B_m sin(m u)`` per axis, ``u`` in
``[0, 2 pi)``.  Derivatives in ``u`` are exact; arc-length quantities follow
by the chain rule.  Arc length itself is tabulated once by panelled
Gauss-Legendre quadrature and inverted by interpolation plus Newton steps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize

from .errors import GeometryError, ValidationError

TWO_PI = 2.0 * math.pi
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
REGULARITY_GRID = 4096
CUSP_GRID = 4096


def _gl_panel(func, a, b):
    """16-point Gauss-Legendre on every panel ``[a_i, b_i]`` (vectorised)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[..., None] + half[..., None] * _GL_NODES
    return half * (func(x) @ _GL_WEIGHTS)


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Closed curve with cosine/sine coefficient arrays of shape ``(M+1, 3)``.

    ``sin_coef[0]`` is ignored (it multiplies ``sin 0``).
    """

    cos_coef: np.ndarray
    sin_coef: np.ndarray
    n_panels: int = 256

    def __post_init__(self):
        a = np.array(self.cos_coef, dtype=float)
        b = np.array(self.sin_coef, dtype=float)
        if a.ndim != 2 or a.shape[1] != 3 or a.shape != b.shape:
            raise ValidationError("coefficient arrays must both have shape (M+1, 3)")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("curve coefficients must be finite")
        b[0] = 0.0
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "cos_coef", a)
        object.__setattr__(self, "sin_coef", b)
        self._check_regular()

    # construction helpers ------------------------------------------------
    @classmethod
    def from_arrays(cls, ax, bx, ay, by, az, bz, **kw):
        a = np.stack([np.asarray(ax, float), np.asarray(ay, float), np.asarray(az, float)], axis=1)
        b = np.stack([np.asarray(bx, float), np.asarray(by, float), np.asarray(bz, float)], axis=1)
        return cls(a, b, **kw)

    @classmethod
    def circle(cls, radius, center=(0.0, 0.0, 0.0), **kw):
        a = np.zeros((2, 3))
        b = np.zeros((2, 3))
        a[0] = center
        a[1, 0] = radius
        b[1, 1] = radius
        return cls(a, b, **kw)

    @classmethod
    def ellipse(cls, a_axis, b_axis, center=(0.0, 0.0, 0.0), **kw):
        a = np.zeros((2, 3))
        b = np.zeros((2, 3))
        a[0] = center
        a[1, 0] = a_axis
        b[1, 1] = b_axis
        return cls(a, b, **kw)

    @property
    def harmonics(self) -> int:
        return self.cos_coef.shape[0] - 1

    def to_dict(self) -> dict:
        a, b = self.cos_coef, self.sin_coef
        return {"harmonics": self.harmonics,
                "ax": a[:, 0].tolist(), "bx": b[:, 0].tolist(),
                "ay": a[:, 1].tolist(), "by": b[:, 1].tolist(),
                "az": a[:, 2].tolist(), "bz": b[:, 2].tolist()}

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0)) -> "ClosedCurve":
        """Rigidly moved copy ``r -> Q r + t``."""
        Q = np.asarray(rotation, dtype=float)
        a = self.cos_coef @ Q.T
        a[0] += np.asarray(translation, dtype=float)
        return ClosedCurve(a, self.sin_coef @ Q.T, n_panels=self.n_panels)

    # evaluation ----------------------------------------------------------
    def derivative(self, u, order: int = 0):
        """``d^order r / du^order`` at ``u``; result shape ``u.shape + (3,)``."""
        u = np.asarray(u, dtype=float)
        m = np.arange(self.harmonics + 1, dtype=float)
        mu = u[..., None] * m
        c, s = np.cos(mu), np.sin(mu)
        # d/du cycles (cos, sin) -> (-m sin, m cos)
        k = order % 4
        scale = m**order
        if k == 0:
            basis_a, basis_b = c, s
        elif k == 1:
            basis_a, basis_b = -s, c
        elif k == 2:
            basis_a, basis_b = -c, -s
        else:
            basis_a, basis_b = s, -c
        return (basis_a * scale) @ self.cos_coef + (basis_b * scale) @ self.sin_coef

    def __call__(self, u):
        return self.derivative(u, 0)

    def speed(self, u):
        return np.linalg.norm(self.derivative(u, 1), axis=-1)

    def _check_regular(self):
        u = np.linspace(0.0, TWO_PI, REGULARITY_GRID, endpoint=False)
        sp = self.speed(u)
        scale = max(np.abs(self.cos_coef[1:]).max(initial=0.0), np.abs(self.sin_coef[1:]).max(initial=0.0))
        if scale == 0.0:
            raise GeometryError("curve is a single point", u=0.0)
        i = int(np.argmin(sp))
        if sp[i] <= 1e-10 * scale:
            raise GeometryError(f"curve is not regular: |dr/du| = {sp[i]:.3g} at u={u[i]:.12g}", u=float(u[i]))

    # arc length ----------------------------------------------------------
    @cached_property
    def _arclength_table(self):
        edges = np.linspace(0.0, TWO_PI, self.n_panels + 1)
        fine = _gl_panel(self.speed, edges[:-1], edges[1:])
        coarse_mid = 0.5 * (edges[:-1] + edges[1:])
        # error estimate: halve each panel and compare
        halves = (_gl_panel(self.speed, edges[:-1], coarse_mid) + _gl_panel(self.speed, coarse_mid, edges[1:]))
        cum = np.concatenate([[0.0], np.cumsum(halves)])
        err = float(np.abs(halves - fine).sum())
        return edges, cum, err

    @property
    def length(self) -> float:
        return float(self._arclength_table[1][-1])

    @property
    def length_error_estimate(self) -> float:
        return self._arclength_table[2]

    def s_of_u(self, u):
        """Arc length from ``u = 0``; ``u`` may exceed one period."""
        u = np.asarray(u, dtype=float)
        turns = np.floor(u / TWO_PI)
        ur = u - turns * TWO_PI
        edges, cum, _ = self._arclength_table
        i = np.clip(np.searchsorted(edges, ur, side="right") - 1, 0, self.n_panels - 1)
        partial = _gl_panel(self.speed, edges[i], ur)
        return turns * self.length + cum[i] + partial

    @cached_property
    def _u_of_s_interp(self):
        edges, cum, _ = self._arclength_table
        return interpolate.PchipInterpolator(cum, edges)

    def u_of_s(self, s):
        """Inverse of :meth:`s_of_u` for ``s`` taken modulo the length."""
        s = np.asarray(s, dtype=float)
        S = self.length
        sr = np.mod(s, S)
        u = self._u_of_s_interp(sr)
        for _ in range(3):
            u = u - (self.s_of_u(u) - sr) / self.speed(u)
        return u

    # frame ---------------------------------------------------------------
    def _local(self, u):
        r1 = self.derivative(u, 1)
        r2 = self.derivative(u, 2)
        r3 = self.derivative(u, 3)
        sp = np.linalg.norm(r1, axis=-1)
        cr = np.cross(r1, r2)
        crn = np.linalg.norm(cr, axis=-1)
        return r1, r2, r3, sp, cr, crn

    def curvature_u(self, u):
        r1, _, _, sp, _, crn = self._local(u)
        return crn / sp**3

    def second_derivative_s(self, u):
        """``d^2 r / ds^2`` by the chain rule: ``(r' x r'') x r' / |r'|^4``."""
        r1, _, _, sp, cr, _ = self._local(u)
        return np.cross(cr, r1) / sp[..., None] ** 4

    def curvature_radius_derivative_u(self, u):
        """``dR/ds`` evaluated at parameter ``u``."""
        r1, r2, r3, sp, cr, crn = self._local(u)
        dcr = np.cross(r1, r3)
        dcrn = np.sum(cr * dcr, axis=-1) / crn
        dsp = np.sum(r1 * r2, axis=-1) / sp
        kappa = crn / sp**3
        dkappa_du = dcrn / sp**3 - 3.0 * crn * dsp / sp**4
        return -dkappa_du / (kappa**2 * sp)

    def torsion_u(self, u):
        r1, r2, r3, sp, cr, crn = self._local(u)
        return np.sum(cr * r3, axis=-1) / crn**2

    def evolute_speed_u(self, u):
        """``|dq/ds|``; with ``q = r + R n`` it equals ``sqrt(R'^2 + (R tau)^2)``."""
        R = 1.0 / self.curvature_u(u)
        dR = self.curvature_radius_derivative_u(u)
        tau = self.torsion_u(u)
        return np.sqrt(dR**2 + (R * tau) ** 2)

    def frame_u(self, u, kappa_tol: float = 0.0) -> "CurveFrame":
        u = float(u)
        r1, r2, r3, sp, cr, crn = self._local(np.array(u))
        kappa = float(crn / sp**3)
        t_hat = r1 / sp
        s = float(self.s_of_u(u))
        pos = self(u)
        if kappa < kappa_tol or crn == 0.0:
            return CurveFrame(s=s, u=u, r=pos, t_hat=t_hat, curvature=kappa, flex=True)
        R = 1.0 / kappa
        rss = np.cross(cr, r1) / sp**4
        b_hat = cr / crn
        return CurveFrame(s=s, u=u, r=pos, t_hat=t_hat, curvature=kappa, flex=False,
                          R=R, b_hat=b_hat, q=pos + R**2 * rss, rss=rss)

    def frame_at(self, s: float, kappa_tol: float = 0.0) -> "CurveFrame":
        """Frame at arc length ``s`` in ``[0, length)``, including ``ell(s)``."""
        if not (0.0 <= s < self.length):
            raise GeometryError(f"s={s!r} outside [0, {self.length!r})")
        u = float(self.u_of_s(s))
        fr = self.frame_u(u, kappa_tol)
        if fr.flex:
            return fr
        return replace(fr, ell=float(self.evolute(kappa_tol).ell_of_u(u)))

    def evolute(self, kappa_tol: float = 0.0) -> "EvoluteParameter":
        """Cached :func:`evolute_parameter` for this curve."""
        cache = self.__dict__.setdefault("_evolute_cache", {})
        if kappa_tol not in cache:
            cache[kappa_tol] = evolute_parameter(self, kappa_tol)
        return cache[kappa_tol]


@dataclass(frozen=True)
class CurveFrame:
    """Geometric data at one point.  ``flex`` frames carry no evolute data."""

    s: float
    u: float
    r: np.ndarray
    t_hat: np.ndarray
    curvature: float
    flex: bool
    R: float = math.inf
    b_hat: np.ndarray | None = None
    q: np.ndarray | None = None
    rss: np.ndarray | None = None
    ell: float | None = None


def load_curve(path) -> ClosedCurve:
    with open(Path(path)) as fh:
        return curve_from_dict(json.load(fh))


def curve_from_dict(data: dict) -> ClosedCurve:
    keys = ("ax", "bx", "ay", "by", "az", "bz")
    if not isinstance(data, dict) or "harmonics" not in data:
        raise ValidationError("curve file needs 'harmonics' and arrays ax, bx, ay, by, az, bz")
    M = data["harmonics"]
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        raise ValidationError(f"harmonics must be a positive integer, got {M!r}")
    arrays = {}
    for key in keys:
        if key not in data:
            raise ValidationError(f"curve file is missing {key!r}")
        arr = np.asarray(data[key], dtype=float)
        if arr.shape != (M + 1,):
            raise ValidationError(f"{key} must have length harmonics+1 = {M + 1}, got {arr.shape}")
        arrays[key] = arr
    unknown = sorted(set(data) - set(keys) - {"harmonics"})
    if unknown:
        raise ValidationError(f"unknown curve keys: {', '.join(unknown)}")
    return ClosedCurve.from_arrays(**arrays)


# Arc-length map --------------------------------------------------------------

@dataclass(frozen=True)
class ArcLengthMap:
    curve: ClosedCurve
    u_table: np.ndarray
    s_table: np.ndarray
    length: float
    error_estimate: float

    def s(self, u):
        return self.curve.s_of_u(u)

    def u(self, s):
        return self.curve.u_of_s(s)


def reparametrize_arclength(c: ClosedCurve, n_samples: int = 256) -> ArcLengthMap:
    """Tabulate ``u -> s`` on ``n_samples + 1`` points with the curve's length."""
    u = np.linspace(0.0, TWO_PI, n_samples + 1)
    s = c.s_of_u(u)
    s[-1] = c.length
    return ArcLengthMap(c, u, s, c.length, c.length_error_estimate)


def frame_at(c: ClosedCurve, s: float, kappa_tol: float = 0.0) -> CurveFrame:
    return c.frame_at(s, kappa_tol)


# Flex points -----------------------------------------------------------------

def _flex_intervals_u(c: ClosedCurve, kappa_tol: float, n_grid: int = REGULARITY_GRID):
    """Parameter intervals ``(a, b)``, ``0 <= a < 2 pi``, ``b > a``, where curvature < tol.

    ``b`` may exceed ``2 pi`` for an interval that wraps.
    """
    if kappa_tol <= 0.0:
        return []
    u = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    h = TWO_PI / n_grid
    kap = c.curvature_u(u)
    below = kap < kappa_tol
    if below.all():
        return [(0.0, TWO_PI)]
    f = lambda x: float(c.curvature_u(np.array(x))) - kappa_tol
    kap2 = lambda x: float(c.curvature_u(np.array(x)) ** 2)

    seeds = []
    # runs of consecutive below-threshold samples, walked cyclically
    idx = np.flatnonzero(below)
    if idx.size:
        starts = [j for j in idx if not below[j - 1]]
        for j in starts:
            end = j
            while below[(end + 1) % n_grid]:
                end += 1
            seeds.append((u[j], u[j] + (end - j) * h))
    # smooth squared curvature catches zeros that fall between samples
    step = np.maximum(np.abs(np.roll(kap, 1) - kap), np.abs(np.roll(kap, -1) - kap))
    locmin = (kap <= np.roll(kap, 1)) & (kap <= np.roll(kap, -1)) & ~below & (kap - kappa_tol < 2.0 * step)
    for i in np.flatnonzero(locmin):
        res = optimize.minimize_scalar(kap2, bounds=(u[i] - h, u[i] + h), method="bounded",
                                       options={"xatol": 1e-15})
        if math.sqrt(max(res.fun, 0.0)) < kappa_tol:
            seeds.append((float(res.x), float(res.x)))

    out = []
    for lo_in, hi_in in seeds:
        lo = lo_in - h
        while f(lo) < 0:
            lo -= h
        hi = hi_in + h
        while f(hi) < 0:
            hi += h
        a = optimize.brentq(f, lo, lo_in, xtol=1e-15) if lo_in > lo else lo
        b = optimize.brentq(f, hi_in, hi, xtol=1e-15)
        a0 = a % TWO_PI
        out.append((a0, a0 + (b - a)))
    out.sort()
    merged = []
    for a, b in out:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def find_flex_points(c: ClosedCurve, kappa_tol: float, n_grid: int = REGULARITY_GRID):
    """Maximal arc-length intervals ``(s_a, s_b)`` where curvature < ``kappa_tol``.

    An interval crossing ``s = 0`` is returned with ``s_a > s_b``.  The
    inequality is strict, so ``kappa_tol = 0`` always gives an empty list.
    """
    out = []
    for a, b in _flex_intervals_u(c, kappa_tol, n_grid):
        if b - a >= TWO_PI:
            return [(0.0, c.length)]
        out.append((float(c.s_of_u(a)), float(c.s_of_u(b % TWO_PI))))
    return sorted(out)


def in_intervals(s, intervals, length=None):
    """Boolean mask: which ``s`` fall in any (possibly wrapping) interval."""
    s = np.asarray(s, dtype=float)
    mask = np.zeros(s.shape, dtype=bool)
    for a, b in intervals:
        if a <= b:
            mask |= (s >= a) & (s <= b)
        else:
            mask |= (s >= a) | (s <= b)
    return mask


# Evolute parameter -----------------------------------------------------------

@dataclass(frozen=True)
class EvoluteParameter:
    """Piecewise natural parameter of the evolute, ``ell(s)``.

    ``ell = 0`` at the first breakpoint and increases with ``s``.
    Breakpoints are the cusps (extrema of ``R``) plus the ends of any masked
    flex interval; ``segment_lengths[i]`` is the evolute length from
    breakpoint ``i`` to ``i + 1`` (cyclically).  Masked flex segments and
    segments with constant ``R`` contribute zero and are listed in
    ``flagged`` as ``(s_begin, s_end, reason)``.
    """

    curve: ClosedCurve
    cusps_u: np.ndarray
    cusps_s: np.ndarray
    breaks_u: np.ndarray
    segment_lengths: np.ndarray
    total: float
    flagged: tuple
    _knots_u: np.ndarray = field(repr=False, default=None)
    _knots_ell: np.ndarray = field(repr=False, default=None)
    _masked: tuple = field(repr=False, default=())

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.total == 0.0:
            return np.zeros_like(s)
        return self.ell_of_u(self.curve.u_of_s(s))

    def ell_of_u(self, u):
        u = np.asarray(u, dtype=float)
        if self.total == 0.0:
            return np.zeros_like(u)
        u0 = self._knots_u[0]
        ur = u0 + np.mod(u - u0, TWO_PI)
        i = np.clip(np.searchsorted(self._knots_u, ur, side="right") - 1, 0, len(self._knots_u) - 2)
        rate = np.where(np.isin(i, self._masked), 0.0, 1.0)
        xi = np.where(rate > 0, ur, self._knots_u[i])
        return self._knots_ell[i] + rate * _gl_panel(self._integrand, self._knots_u[i], xi)

    def _integrand(self, x):
        with np.errstate(all="ignore"):
            return np.nan_to_num(self.curve.evolute_speed_u(x) * self.curve.speed(x))


def _find_cusps(c: ClosedCurve, masked, n_grid: int = CUSP_GRID):
    """Extrema of ``R`` from sign changes of ``dR/ds`` on unmasked samples.

    Returns ``(cusps_u, constant)``; ``constant`` means ``R`` never varies.
    """
    u = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    with np.errstate(all="ignore"):
        dR = c.curvature_radius_derivative_u(u)
        R = 1.0 / c.curvature_u(u)
    masked = masked | ~np.isfinite(dR)
    if masked.all():
        return np.array([]), False
    scale = np.abs(dR[~masked]).max()
    if not masked.any() and scale <= 1e-12 * R.max():
        return np.array([]), True
    flat = (np.abs(dR) <= 1e-12 * scale) & ~masked
    h = TWO_PI / n_grid
    f = lambda x: float(c.curvature_radius_derivative_u(np.array(x)))
    idx = np.flatnonzero(~flat & ~masked)
    cusps = []
    # walk consecutive informative samples cyclically; a sign change across a
    # flat run collapses to the run's midpoint, a masked gap is not bridged
    for j1, j2 in zip(idx, np.roll(idx, -1)):
        if np.sign(dR[j1]) == np.sign(dR[j2]):
            continue
        gap = (j2 - j1) % n_grid
        between = [(j1 + t) % n_grid for t in range(1, gap)]
        if any(masked[j] for j in between):
            continue
        if gap == 1:
            cusps.append(optimize.brentq(f, u[j1], u[j1] + h, xtol=1e-15) % TWO_PI)
        else:
            cusps.append((u[j1] + 0.5 * gap * h) % TWO_PI)
    return np.sort(np.array(cusps)), False


def _adaptive_panels(func, a, b, n_start, rtol=1e-13, max_rounds=40):
    """Split ``[a, b]`` until 16-point and two-half Gauss-Legendre agree."""
    edges = np.linspace(a, b, n_start + 1)
    for _ in range(max_rounds):
        lo, hi = edges[:-1], edges[1:]
        mid = 0.5 * (lo + hi)
        whole = _gl_panel(func, lo, hi)
        halves = _gl_panel(func, lo, mid) + _gl_panel(func, mid, hi)
        scale = max(np.abs(halves).sum(), 1e-300)
        bad = np.abs(whole - halves) > rtol * scale
        if not bad.any():
            return edges, halves
        edges = np.sort(np.concatenate([edges, mid[bad]]))
    return edges, _gl_panel(func, edges[:-1], edges[1:])


def evolute_parameter(c: ClosedCurve, kappa_tol: float = 0.0, panels_per_segment: int = 64) -> EvoluteParameter:
    """Build ``ell(s)`` with segment boundaries at the extrema of ``R(s)``.

    Flex intervals (curvature below ``kappa_tol``) are masked: their ends
    become breakpoints and they contribute no length.
    """
    flex_u = _flex_intervals_u(c, kappa_tol)
    grid = np.linspace(0.0, TWO_PI, CUSP_GRID, endpoint=False)
    masked = np.zeros(grid.shape, dtype=bool)
    for a, b in flex_u:
        masked |= ((grid - a) % TWO_PI) <= (b - a)
    cusps, constant = _find_cusps(c, masked)
    breaks = sorted([float(x) for x in cusps] + [a % TWO_PI for a, _ in flex_u] + [b % TWO_PI for _, b in flex_u])
    if constant or not breaks:
        flagged = ((0.0, c.length, "constant-radius"),) if constant else ((0.0, c.length, "flex"),)
        return EvoluteParameter(c, np.array([]), np.array([]), np.array([]), np.array([]), 0.0, flagged)

    bounds = np.array(breaks + [breaks[0] + TWO_PI])
    integrand = lambda x: c.evolute_speed_u(x) * c.speed(x)
    knots_u, knots_ell, seg, flagged, masked_panels = [], [0.0], [], [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        mid = 0.5 * (a + b)
        in_flex = any(((mid - fa) % TWO_PI) <= (fb - fa) for fa, fb in flex_u)
        if b - a <= 0.0:
            seg.append(0.0)
            continue
        if in_flex:
            masked_panels.append(len(knots_u))
            knots_u.append(a)
            knots_ell.append(knots_ell[-1])
            seg.append(0.0)
            flagged.append((float(c.s_of_u(a % TWO_PI)), float(c.s_of_u(b % TWO_PI)), "flex"))
            continue
        edges, pieces = _adaptive_panels(integrand, a, b, panels_per_segment)
        knots_u.extend(edges[:-1])
        for p in pieces:
            knots_ell.append(knots_ell[-1] + p)
        seg.append(float(pieces.sum()))
    knots_u.append(bounds[-1])
    seg = np.array(seg)
    total = float(seg.sum())
    for i, length in enumerate(seg):
        mid = 0.5 * (bounds[i] + bounds[i + 1])
        if length <= 1e-14 * max(total, 1e-300) and not any(((mid - fa) % TWO_PI) <= (fb - fa) for fa, fb in flex_u):
            flagged.append((float(c.s_of_u(bounds[i] % TWO_PI)), float(c.s_of_u(bounds[i + 1] % TWO_PI)),
                            "constant-radius"))
    return EvoluteParameter(c, cusps, c.s_of_u(cusps) if len(cusps) else np.array([]), bounds[:-1], seg, total,
                            tuple(flagged), np.array(knots_u), np.array(knots_ell), tuple(masked_panels))
