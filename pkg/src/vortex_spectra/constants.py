"""Physical constants and derived scales.

Every other module takes a :class:`PhysicalConstants` instance; nothing
else in the package hard-codes a physical number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import NamedTuple

from .errors import ValidationError


class DerivedScales(NamedTuple):
    t0: float
    E0: float
    mutilde0: float
    sigma_ph: float


_POSITIVE = ("rho0", "v0", "Rf", "mu0", "hbar", "L", "core_a", "epsilon_pkt")


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental and auxiliary constants, SI units.

    ``omega`` and ``alpha`` are the dimensionless constants of the perturbed
    local induction equation; ``core_a`` is the vortex core radius and
    ``epsilon_pkt`` the width of the free-particle wave packets.
    """

    rho0: float
    v0: float
    Rf: float
    mu0: float
    hbar: float
    L: float
    core_a: float
    omega: float
    alpha: float
    epsilon_pkt: float

    def __post_init__(self):
        for name in _POSITIVE:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be a finite positive number, got {value!r}")
        for name in ("omega", "alpha"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValidationError(f"{name} must be finite, got {value!r}")
        if not self.core_a < self.Rf:
            raise ValidationError(f"core_a must be smaller than Rf ({self.core_a!r} >= {self.Rf!r})")

    # Derived scales are recomputed on every access so they can never drift
    # from the fundamental fields.
    @property
    def t0(self) -> float:
        return self.L / self.v0

    @property
    def E0(self) -> float:
        return self.mu0 * self.v0**2

    @property
    def mutilde0(self) -> float:
        return math.pi * self.rho0 * self.Rf**3

    @property
    def sigma_ph(self) -> float:
        return math.sqrt(self.sigma_ph2)

    @property
    def sigma_ph2(self) -> float:
        return self.hbar / (self.E0 * self.t0)

    @property
    def R0(self) -> float:
        """Smallest representable radius, the ground-state ring radius."""
        return self.Rf * math.sqrt(1.0 + 0.5 * self.sigma_ph2)

    def replace(self, **changes) -> "PhysicalConstants":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return PhysicalConstants(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def derive_scales(c: PhysicalConstants) -> DerivedScales:
    """Return ``(t0, E0, mutilde0, sigma_ph)`` for the constant set ``c``."""
    return DerivedScales(c.t0, c.E0, c.mutilde0, c.sigma_ph)


FIELD_NAMES = tuple(f.name for f in fields(PhysicalConstants))

# Illustrative only. core_a must stay strictly below Rf, so the "unit" set
# uses 0.1 there.
PRESETS = {
    "unit": dict(
        rho0=1.0, v0=1.0, Rf=1.0, mu0=1.0, hbar=1.0, L=1.0,
        core_a=0.1, omega=1.0, alpha=1.0, epsilon_pkt=1.0,
    ),
    "helium-like": dict(
        rho0=145.0, v0=238.0, Rf=1e-10, mu0=1e-26, hbar=1.054571817e-34, L=1e-3,
        core_a=5e-11, omega=1.0, alpha=1.0, epsilon_pkt=1e-9,
    ),
}


def preset(name: str) -> PhysicalConstants:
    try:
        return PhysicalConstants(**PRESETS[name])
    except KeyError:
        raise ValidationError(f"unknown constants preset {name!r}; choose from {sorted(PRESETS)}") from None


def constants_from_dict(data: dict) -> PhysicalConstants:
    """Build constants from a mapping with exactly the dataclass field names."""
    if not isinstance(data, dict):
        raise ValidationError("constants must be a JSON object")
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ValidationError(f"unknown constants keys: {', '.join(unknown)}")
    missing = [name for name in FIELD_NAMES if name not in data]
    if missing:
        raise ValidationError(f"missing constants keys: {', '.join(missing)}")
    return PhysicalConstants(**data)


def load_constants(path) -> PhysicalConstants:
    with open(Path(path)) as fh:
        return constants_from_dict(json.load(fh))
