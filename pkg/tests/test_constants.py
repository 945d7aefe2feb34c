import json
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortex_spectra.constants import (FIELD_NAMES, PRESETS, PhysicalConstants, constants_from_dict,
                                      derive_scales, load_constants, preset)
from vortex_spectra.errors import ValidationError


def test_unit_preset_scales(unit):
    t0, E0, mut, sig = derive_scales(unit)
    assert (t0, E0, sig) == (1.0, 1.0, 1.0)
    assert mut == pytest.approx(math.pi, rel=1e-15)
    assert unit.R0 == pytest.approx(math.sqrt(1.5), rel=1e-15)


def test_helium_scales_against_mpmath(helium):
    mpmath.mp.dps = 40
    d = {k: mpmath.mpf(repr(v)) for k, v in PRESETS["helium-like"].items()}
    t0 = d["L"] / d["v0"]
    E0 = d["mu0"] * d["v0"] ** 2
    sig2 = d["hbar"] / (E0 * t0)
    assert helium.t0 == pytest.approx(float(t0), rel=1e-14)
    assert helium.E0 == pytest.approx(float(E0), rel=1e-14)
    assert helium.mutilde0 == pytest.approx(float(mpmath.pi * d["rho0"] * d["Rf"] ** 3), rel=1e-14)
    assert helium.sigma_ph2 == pytest.approx(float(sig2), rel=1e-14)
    assert helium.R0 == pytest.approx(float(d["Rf"] * mpmath.sqrt(1 + sig2 / 2)), rel=1e-14)


def test_derived_scales_follow_fields(unit):
    c = unit.replace(L=2.0)
    assert c.t0 == 2.0 and c.sigma_ph2 == 0.5


@pytest.mark.parametrize("field,value", [("rho0", 0.0), ("hbar", -1.0), ("L", math.inf), ("Rf", math.nan)])
def test_rejects_non_positive(unit, field, value):
    with pytest.raises(ValidationError):
        unit.replace(**{field: value})


def test_core_radius_must_be_below_fiducial(unit):
    with pytest.raises(ValidationError, match="core_a"):
        unit.replace(core_a=1.0)


def test_omega_may_be_zero_or_negative(unit):
    assert unit.replace(omega=0.0, alpha=-2.0).omega == 0.0


def test_dict_roundtrip_and_unknown_keys(unit, tmp_path):
    data = unit.to_dict()
    assert tuple(data) == FIELD_NAMES
    assert constants_from_dict(data) == unit
    with pytest.raises(ValidationError, match="unknown"):
        constants_from_dict({**data, "gamma": 1.0})
    missing = dict(data)
    del missing["v0"]
    with pytest.raises(ValidationError, match="missing"):
        constants_from_dict(missing)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    assert load_constants(path) == unit


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset("neon")


def test_frozen(unit):
    with pytest.raises(AttributeError):
        unit.rho0 = 2.0


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(1e-3, 1e3), mu=st.floats(1e-3, 1e3))
def test_sigma_scaling(lam, mu):
    # sigma^2 = hbar / (mu0 v0 L): linear in hbar, inverse in mu0
    c = PhysicalConstants(**PRESETS["unit"])
    scaled = c.replace(hbar=lam, mu0=mu)
    assert scaled.sigma_ph2 == pytest.approx(lam / mu, rel=1e-14)
    assert scaled.t0 == c.t0
