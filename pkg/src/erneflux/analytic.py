"""Closed-form reduced transport model.

With the junction treated as quasistationary and the large reservoir as an
unlimited source, density in the small reservoir relaxes exponentially,

    rho_NE(t) = rho_ER0 * (1 - exp(-kappa t)),    kappa = k D A* / (V_NE L),

where A* is the harmonic-mean junction cross section. These formulas are the
fast path for sweeps and the oracle the PDE solver is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import EffectiveGeometry, Reporter, harmonic_mean_area
from .timeseries import TimeSeries


@dataclass(frozen=True)
class CellParams:
    """Whole-cell transport parameters: junction count and reservoir volumes."""

    k: int
    V_ER_um3: float
    V_NE_um3: float

    def __post_init__(self) -> None:
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise ValueError("junction count k must be an integer >= 1")
        if not self.V_NE_um3 > 0:
            raise ValueError("V_NE must be > 0")
        if not self.V_ER_um3 > self.V_NE_um3:
            raise ValueError("V_ER must exceed V_NE")


@dataclass(frozen=True)
class RateResult:
    """Transport rate constant together with the conductance that produced it."""

    kappa_per_s: float
    A_star_um2: float
    half_time_s: float


def rate_constant(
    cell: CellParams, geom: EffectiveGeometry, reporter: Reporter
) -> RateResult:
    """Rate constant kappa = k D A* / (V_NE L) for an effective geometry.

    `geom` must already be steric-corrected (see geometry.effective_geometry);
    the reporter supplies only its diffusivity here.
    """
    a_star = harmonic_mean_area(geom)
    kappa = cell.k * reporter.D_um2_s * a_star / (cell.V_NE_um3 * geom.L_um)
    return RateResult(kappa, a_star, math.log(2.0) / kappa)


def recovery_curve(kappa_per_s: float, rho_er0: float, times_s) -> TimeSeries:
    """Post-bleach recovery rho_ER0 * (1 - exp(-kappa t)) sampled at `times_s`."""
    if not kappa_per_s > 0:
        raise ValueError("kappa must be > 0")
    t = np.asarray(times_s, dtype=float)
    if t.size and t[0] < 0:
        raise ValueError("times must start at t >= 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return TimeSeries(t, rho_er0 * -np.expm1(-kappa_per_s * t))


def junction_flux(
    geom: EffectiveGeometry, D_um2_s: float, rho_er: float, rho_ne: float
) -> float:
    """Quasistationary flux through one junction, positive toward the NE.

    j = D A* (rho_ER - rho_NE) / L, in molecules/s per junction for densities
    in molecules/um^3 (or per-junction density-volume flux in arbitrary units).
    """
    a_star = harmonic_mean_area(geom)
    return D_um2_s * a_star * (rho_er - rho_ne) / geom.L_um
