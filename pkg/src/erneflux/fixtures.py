"""Synthetic data generators so tests and demos never need external data.

Provides noisy raw-intensity recovery traces (with background offset and a
shared photobleaching decay, exercising the full normalization pipeline),
square compartment/bleach mask pairs, and the closed-form free-diffusion
recovery of a square bleach region used as an independent oracle for the
lattice walk.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .frap2d import write_pgm
from .timeseries import TimeSeries

_ERF = np.vectorize(math.erf)


def synthetic_cells(
    out_dir: str | Path,
    n_cells: int,
    kappa_per_s: float,
    noise_sd: float,
    seed: int,
    duration_s: float = 60.0,
    frame_interval_s: float = 1.0,
    background: float = 50.0,
    amplitude: float = 1000.0,
    residual_fraction: float = 0.1,
    photobleach_per_s: float = 0.004,
) -> tuple[list[Path], Path]:
    """Write per-cell raw `t_s,intensity` CSVs plus an unbleached reference.

    Each trace is amplitude * (residual + (1-residual)(1 - exp(-kappa t)))
    plus Gaussian noise, multiplied by a common photobleaching decay shared
    with the reference, plus the background offset. Returns (cell paths,
    reference path).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    t = np.arange(0.0, duration_s + frame_interval_s / 2, frame_interval_s)
    decay = np.exp(-photobleach_per_s * t)
    paths = []
    for i in range(n_cells):
        signal = amplitude * (
            residual_fraction
            + (1.0 - residual_fraction) * -np.expm1(-kappa_per_s * t)
        )
        noisy = signal + rng.normal(0.0, noise_sd * amplitude, t.size)
        raw = noisy * decay + background
        path = out_dir / f"cell_{i:03d}.csv"
        TimeSeries(t, raw).to_csv(path)
        paths.append(path)
    reference = amplitude * decay + background
    ref_path = out_dir / "reference.csv"
    TimeSeries(t, reference).to_csv(ref_path)
    return paths, ref_path


def square_masks(
    out_dir: str | Path,
    size_px: int = 256,
    bleach_px: int = 34,
    prefix: str = "square",
) -> tuple[Path, Path]:
    """Write an all-inside compartment mask and a centered square bleach mask."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inside = np.ones((size_px, size_px), dtype=bool)
    bleach = np.zeros_like(inside)
    lo = (size_px - bleach_px) // 2
    bleach[lo : lo + bleach_px, lo : lo + bleach_px] = True
    inside_path = write_pgm(out_dir / f"{prefix}_inside.pgm", inside)
    bleach_path = write_pgm(out_dir / f"{prefix}_bleach.pgm", bleach)
    return inside_path, bleach_path


def free_square_recovery(
    times_s,
    bleach_edge_um: float,
    d_um2_s: float,
    equilibrium_fraction: float,
) -> TimeSeries:
    """Free-diffusion recovery of a square bleach region (heat-kernel oracle).

    For an initially uniform unbleached pool outside a w x w square, the
    surviving bleached mass factorizes per axis as

        q(t) = erf(w/s) - s/(w sqrt(pi)) (1 - exp(-(w/s)^2)),  s = 2 sqrt(D t),

    and the normalized bleach-region recovery is (1 - q^2) / (1 - f) with
    f = |bleach|/|inside|. Valid while diffusion has not yet felt the
    compartment boundary.
    """
    t = np.asarray(times_s, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be >= 0")
    q = np.ones_like(t)
    pos = t > 0
    s = 2.0 * np.sqrt(d_um2_s * t[pos])
    x = bleach_edge_um / s
    q[pos] = _ERF(x) - (1.0 - np.exp(-x * x)) / (x * math.sqrt(math.pi))
    recovery = (1.0 - q * q) / (1.0 - equilibrium_fraction)
    return TimeSeries(t, recovery)
