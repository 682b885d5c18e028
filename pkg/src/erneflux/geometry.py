"""Junction geometry: cross-section profiles and their effective conductance.

A junction connects the small reservoir (NE side, z = 0) to the large
reservoir (ER side, z = L). Its shape enters the transport problem only
through the cross-section area profile A(z) and, for the reduced model,
through the harmonic-mean area

    A* = L / integral_0^L dz / A(z).

Two shape variants are supported: a truncated cone (radius R at z = 0,
opening angle alpha) and a tabulated radius-vs-z profile with linear
interpolation between samples. Because the radius is piecewise linear in
both cases, every integral used here has a closed form per segment and no
numerical quadrature is needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError, InfeasibleGeometryError

HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class Reporter:
    """A diffusing luminal species: diffusivity and steric radius."""

    name: str
    D_um2_s: float
    r_um: float

    def __post_init__(self) -> None:
        if not self.D_um2_s > 0:
            raise ValueError(f"reporter {self.name!r}: D must be > 0")
        if self.r_um < 0:
            raise ValueError(f"reporter {self.name!r}: r must be >= 0")


@dataclass(frozen=True)
class Cone:
    """Truncated-cone junction: radius R + z*tan(alpha), 0 <= z <= L."""

    R_um: float
    alpha_rad: float
    L_um: float

    def __post_init__(self) -> None:
        if not self.R_um > 0:
            raise ValueError("cone radius must be > 0")
        if not self.L_um > 0:
            raise ValueError("junction length must be > 0")
        if not 0.0 <= self.alpha_rad < HALF_PI:
            raise ValueError("opening angle must satisfy 0 <= alpha < pi/2")

    def radius_at(self, z_um):
        return self.R_um + np.asarray(z_um, dtype=float) * math.tan(self.alpha_rad)

    @property
    def min_radius_um(self) -> float:
        return self.R_um  # alpha >= 0, narrowest at the NE side


@dataclass(frozen=True)
class Tabulated:
    """Measured junction profile: radius samples on a strictly increasing z grid.

    The first sample must sit at z = 0 (NE side); the last sample defines the
    junction length L. Radii are linearly interpolated between samples.
    """

    z_um: np.ndarray
    radius_um: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z_um, dtype=float)
        r = np.asarray(self.radius_um, dtype=float)
        object.__setattr__(self, "z_um", z)
        object.__setattr__(self, "radius_um", r)
        if z.ndim != 1 or r.ndim != 1 or z.size != r.size:
            raise ValueError("z and radius must be 1-D arrays of equal length")
        if z.size < 2:
            raise ValueError("a tabulated profile needs at least 2 samples")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(r))):
            raise ValueError("profile samples must be finite")
        if z[0] != 0.0:
            raise ValueError("profile must start at z = 0")
        if np.any(np.diff(z) <= 0):
            raise ValueError("z samples must be strictly increasing")
        if np.any(r <= 0):
            raise ValueError("all profile radii must be > 0")

    def radius_at(self, z_um):
        return np.interp(np.asarray(z_um, dtype=float), self.z_um, self.radius_um)

    @property
    def L_um(self) -> float:
        return float(self.z_um[-1])

    @property
    def min_radius_um(self) -> float:
        return float(self.radius_um.min())


JunctionGeometry = Union[Cone, Tabulated]
#: Same shapes with every radius already reduced by the reporter radius.
EffectiveGeometry = JunctionGeometry


def area_at(geom: JunctionGeometry, z_um):
    """Cross-section area A(z) = pi * r(z)^2 for z in [0, L] (scalar or array)."""
    z = np.asarray(z_um, dtype=float)
    if z.size and (z.min() < 0.0 or z.max() > geom.L_um * (1 + 1e-12)):
        raise ValueError(f"z outside junction [0, {geom.L_um}]")
    area = math.pi * geom.radius_at(z) ** 2
    return float(area) if np.ndim(z_um) == 0 else area


def effective_geometry(geom: JunctionGeometry, reporter: Reporter) -> EffectiveGeometry:
    """Reduce every radius by the reporter radius (steric exclusion).

    Raises InfeasibleGeometryError when the reporter cannot pass the
    narrowest point; that always signals a modeling mistake rather than a
    zero-flux regime.
    """
    if reporter.r_um >= geom.min_radius_um:
        raise InfeasibleGeometryError(
            f"reporter {reporter.name!r} (r = {reporter.r_um} um) does not fit the "
            f"junction (min radius {geom.min_radius_um} um)"
        )
    if reporter.r_um == 0.0:
        return geom
    if isinstance(geom, Cone):
        return Cone(geom.R_um - reporter.r_um, geom.alpha_rad, geom.L_um)
    return Tabulated(geom.z_um.copy(), geom.radius_um - reporter.r_um)


def _segments(geom: JunctionGeometry, z_lo: float, z_hi: float):
    """Breakpoints and radii of the piecewise-linear radius on [z_lo, z_hi]."""
    if z_lo < -1e-15 or z_hi > geom.L_um * (1 + 1e-12) or z_hi < z_lo:
        raise ValueError("integration bounds outside junction")
    if isinstance(geom, Cone):
        z = np.array([z_lo, z_hi])
    else:
        inner = geom.z_um[(geom.z_um > z_lo) & (geom.z_um < z_hi)]
        z = np.concatenate([[z_lo], inner, [z_hi]])
    return z, geom.radius_at(z)


def inverse_area_integral(geom: JunctionGeometry, z_lo: float, z_hi: float) -> float:
    """Exact integral of dz / A(z) over [z_lo, z_hi].

    Per linear-radius segment, integral dz / (pi r^2) = h / (pi r_a r_b),
    which is resolution-independent by construction.
    """
    z, r = _segments(geom, z_lo, z_hi)
    h = np.diff(z)
    return float(np.sum(h / (r[:-1] * r[1:])) / math.pi)


def area_integral(geom: JunctionGeometry, z_lo: float, z_hi: float) -> float:
    """Exact integral of A(z) dz (a frustum volume) over [z_lo, z_hi]."""
    z, r = _segments(geom, z_lo, z_hi)
    h = np.diff(z)
    ra, rb = r[:-1], r[1:]
    return float(math.pi * np.sum(h * (ra * ra + ra * rb + rb * rb)) / 3.0)


def harmonic_mean_area(geom: JunctionGeometry) -> float:
    """Harmonic-mean cross-section A* = L / integral dz/A.

    For a cone this reduces to the closed form pi * R * (R + L tan(alpha));
    tabulated profiles use the exact piecewise integral.
    """
    if isinstance(geom, Cone):
        return math.pi * geom.R_um * (geom.R_um + geom.L_um * math.tan(geom.alpha_rad))
    return geom.L_um / inverse_area_integral(geom, 0.0, geom.L_um)


def asymptotic_conductance_limit(R_um: float, alpha_rad: float) -> float:
    """Large-L limit of A*/L for a cone: pi * R * tan(alpha).

    The limit shows that the ill-defined junction length barely matters once
    L is not too small; it is 0 for a cylinder (alpha = 0).
    """
    if not R_um > 0:
        raise ValueError("radius must be > 0")
    if not 0.0 <= alpha_rad < HALF_PI:
        raise ValueError("opening angle must satisfy 0 <= alpha < pi/2")
    return math.pi * R_um * math.tan(alpha_rad)


def load_profile_csv(path: str | Path) -> Tabulated:
    """Read a `z_um,radius_um` two-column CSV profile."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["z_um", "radius_um"]:
            raise DataError(f"{path}: expected header 'z_um,radius_um'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 profile samples")
    z, radius = zip(*rows)
    return Tabulated(np.array(z), np.array(radius))
