import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from vortex_spectra import coherent
from vortex_spectra.coherent import CoherentAmplitude, GaussianPacket
from vortex_spectra.constants import preset
from vortex_spectra.errors import SubQuantumRadiusError


# radius <-> amplitude --------------------------------------------------------

def test_ground_state_radius_is_vacuum(unit):
    assert coherent.beta2_from_radius(unit.R0, unit) == pytest.approx(0.0, abs=1e-15)


def test_sub_quantum_radius_raises(unit):
    with pytest.raises(SubQuantumRadiusError) as exc:
        coherent.beta2_from_radius(np.array([2.0, 1.1]), unit, s=np.array([0.5, 0.7]))
    assert exc.value.R == 1.1 and exc.value.s == 0.7


@settings(max_examples=60, deadline=None)
@given(b=st.floats(0.0, 1e6))
def test_radius_roundtrip(b):
    c = preset("unit")
    R = coherent.radius_from_beta(CoherentAmplitude(b), c)
    assert math.sqrt(coherent.beta2_from_radius(R, c)) == pytest.approx(b, rel=1e-9, abs=1e-6)


def test_number_overlap_matches_pmf():
    beta = CoherentAmplitude(2.0, 0.3)
    ov = coherent.number_overlap(4, beta)
    assert abs(ov) ** 2 == pytest.approx(math.exp(-4) * 4**4 / 24, rel=1e-14)  # 0.195366815...
    assert abs(ov) ** 2 == pytest.approx(0.195366815, rel=1e-8)
    assert np.angle(ov) == pytest.approx(1.2, rel=1e-14)
    assert coherent.number_overlap(1, CoherentAmplitude(0.0)) == 0


# Poisson sums --------------------------------------------------------------------

@pytest.mark.parametrize("lam", [0.0, 0.3, 4.0, 97.5, 2.5e3])
def test_log_weights_against_mpmath(lam):
    mpmath.mp.dps = 30
    n = np.arange(0, int(lam + 20 * math.sqrt(lam) + 40))
    ours = coherent._poisson_log_weights(n.astype(float), lam)
    if lam == 0.0:
        assert ours[0] == 0.0 and np.all(np.isneginf(ours[1:]))
        return
    log_lam = mpmath.log(lam)
    ref = np.array([float(int(k) * log_lam - lam - mpmath.loggamma(int(k) + 1)) for k in n])
    keep = ref > -600
    assert np.allclose(ours[keep], ref[keep], rtol=1e-15, atol=1e-12)


@pytest.mark.parametrize("lam", [1e6, 3.7e9, 1e13])
def test_log_weights_large_lambda_against_mpmath(lam):
    mpmath.mp.dps = 40
    n = np.array([lam - 3 * math.sqrt(lam), lam, lam + 5 * math.sqrt(lam)]).round()
    ours = coherent._poisson_log_weights(n, lam)
    for ni, oi in zip(n, ours):
        ref = mpmath.mpf(int(ni)) * mpmath.log(lam) - lam - mpmath.loggamma(int(ni) + 1)
        assert oi == pytest.approx(float(ref), abs=1e-9)


def test_poisson_expectation_mean_and_variance():
    for lam in (0.0, 1.5, 40.0, 1e7):
        m = coherent.poisson_expectation(lam, lambda n: n)
        v = coherent.poisson_expectation(lam, lambda n: (n - lam) ** 2)
        assert m == pytest.approx(lam, rel=1e-12, abs=1e-14)
        assert v == pytest.approx(lam, rel=1e-9, abs=1e-14)


def test_circulation_series_direct_sum(unit):
    lam = 6.25
    n = np.arange(200)
    ref = np.sum(stats.poisson.pmf(n, lam) / (1 + (n + 0.5)))
    assert coherent.circulation_series(lam, unit) == pytest.approx(ref, rel=1e-13)


def test_series_vacuum_term(unit):
    assert coherent.circulation_series(0.0, unit) == 1 / 1.5
    a, b = coherent.energy_series(0.0, unit)
    assert (a, b) == (pytest.approx(1 / 2.25), pytest.approx(1 / 2.25))


def test_energy_series_direct_sum(unit):
    lam = 12.0
    n = np.arange(300)
    w = stats.poisson.pmf(n, lam)
    d2 = (1 + (n + 0.5)) ** 2
    a, b = coherent.energy_series(lam, unit)
    assert a == pytest.approx(np.sum(w * (2 * n + 1) / d2), rel=1e-13)
    assert b == pytest.approx(np.sum(w / d2), rel=1e-13)


def test_extreme_occupation_is_fast_and_asymptotic(unit):
    lam = 1e14
    val = coherent.circulation_series(lam, unit)
    assert val * lam == pytest.approx(1.0, rel=1e-10)


# Dawson ----------------------------------------------------------------------------

@pytest.mark.parametrize("x,ref", [(0.9241388730, 0.5410442246), (10.0, 0.05025384716)])
def test_dawson_tabulated(x, ref):
    assert coherent.dawson(x) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("x", [1e-3, 0.2, 1.0, 3.3, 17.0, 250.0])
def test_dawson_against_quadrature(x):
    mpmath.mp.dps = 30
    ref = mpmath.exp(-x * x) * mpmath.quad(lambda t: mpmath.exp(t * t), [0, x])
    assert coherent.dawson(x) == pytest.approx(float(ref), rel=1e-14)


def test_dawson_odd():
    x = np.linspace(-5, 5, 11)
    assert np.allclose(coherent.dawson(-x), -coherent.dawson(x))


@settings(max_examples=80, deadline=None)
@given(b=st.floats(0.05, 2e3))
def test_dawson_bound_holds(b):
    c = preset("unit")
    assert coherent.circulation_series(b * b, c) < coherent.dawson_bound(b, c)


# Packets -------------------------------------------------------------------------

def _packet():
    return GaussianPacket(np.array([0.3, -0.2, 0.5]), np.array([0.4, 1.1, -0.7]), 0.8, 1.3)


def test_momentum_density_normalised():
    pk = _packet()
    # separable: integrate one axis and cube
    sd = pk.hbar / (2 * pk.epsilon)
    f = lambda p: pk.normalization ** (2 / 3) * math.exp(-2 * (pk.epsilon / pk.hbar) ** 2 * p * p)
    one, _ = integrate.quad(f, -12 * sd, 12 * sd, epsabs=1e-14)
    assert one**3 == pytest.approx(1.0, rel=1e-12)
    assert pk.momentum_density(pk.center_p) == pytest.approx(pk.normalization**2)


def test_gaussian_overlap_against_quadrature():
    pk = _packet()
    width = 0.6
    center = np.array([-0.1, 0.4, 0.2])
    # both wavefunctions factor over axes; 1D quad per axis
    total = 1.0 + 0j
    for ax in range(3):
        def g1(x):
            return (2 * math.pi * width**2) ** -0.25 * math.exp(-(x - center[ax]) ** 2 / (4 * width**2))

        def z1(x):
            return ((2 * math.pi * pk.epsilon**2) ** -0.25 * np.exp(1j * x * pk.center_p[ax] / pk.hbar
                                                                   - (x - pk.center_q[ax]) ** 2 / (4 * pk.epsilon**2)))
        re, _ = integrate.quad(lambda x: g1(x) * z1(x).real, -30, 30, epsabs=1e-15, limit=200)
        im, _ = integrate.quad(lambda x: g1(x) * z1(x).imag, -30, 30, epsabs=1e-15, limit=200)
        total *= re + 1j * im
    ov = coherent.gaussian_overlap(center, width, pk)
    assert abs(ov - total) < 1e-12
    # same wavefunction as position_wavefunction (spot check)
    q = np.array([0.1, 0.2, 0.3])
    prod = 1.0 + 0j
    for ax in range(3):
        prod *= (2 * math.pi * pk.epsilon**2) ** -0.25 * np.exp(1j * q[ax] * pk.center_p[ax] / pk.hbar
                                                                 - (q[ax] - pk.center_q[ax]) ** 2 / (4 * pk.epsilon**2))
    assert abs(pk.position_wavefunction(q) - prod) < 1e-14


def test_overlap_with_itself_is_one():
    pk = GaussianPacket(np.zeros(3), np.zeros(3), 0.5, 1.0)
    assert coherent.gaussian_overlap(np.zeros(3), 0.5, pk) == pytest.approx(1.0, rel=1e-15)


# Radial reduction -------------------------------------------------------------

@pytest.mark.parametrize("a", [0.0, 1e-4, 0.5, 2.0, 13.0, 400.0])
def test_radial_first_moment_closed_form(a):
    assert coherent.radial_moment(1, a) == pytest.approx(coherent.mean_norm_closed_form(a), rel=1e-10)


@pytest.mark.parametrize("a", [0.0, 0.7, 5.0, 60.0])
def test_radial_second_moment(a):
    assert coherent.radial_moment(2, a) == pytest.approx(3 + a * a, rel=1e-10)


@pytest.mark.parametrize("a", [0.0, 1.3, 9.0])
def test_radial_third_moment_mpmath(a):
    # E|X|^3 for a noncentral chi(3) by direct 2D (r, cos theta) quadrature in mpmath
    mpmath.mp.dps = 25
    f = lambda r, t: r**5 * mpmath.exp(-(r * r - 2 * r * a * t + a * a) / 2)
    ref = mpmath.quad(f, [0, a, a + 40], [-1, 1]) * 2 * mpmath.pi / (2 * mpmath.pi) ** 1.5
    assert coherent.radial_moment(3, a) == pytest.approx(float(ref), rel=1e-10)


def test_wavenumber_moment_scaling():
    eps, k0 = 0.25, 3.0
    sd = 0.5 / eps
    assert coherent.wavenumber_moment(1, k0, eps) == pytest.approx(sd * coherent.mean_norm_closed_form(k0 / sd), rel=1e-10)
    # narrow packet: <|k|> -> |k0|
    assert coherent.wavenumber_moment(1, k0, 1e4) == pytest.approx(k0, rel=1e-8)
