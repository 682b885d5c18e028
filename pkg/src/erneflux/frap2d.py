"""Masked 2-D lattice random walk for in-compartment diffusion estimation.

Post-bleach recovery is simulated by blind 4-neighbor walkers confined to a
pixel mask (moves leaving the compartment are rejected, i.e. reflecting
boundaries), starting uniformly on the unbleached pool. The recorded curve is
the walker fraction inside the bleach region normalized by its equilibrium
value |bleach|/|inside|. A blind 2-D walk has MSD = 1 pixel^2 per step, so
the lattice diffusivity is exactly 1/4 px^2/step and lattice time maps to
physical time via t = steps * pixel^2 / (4 D). The diffusion coefficient of
an observed recovery is estimated by least-squares over that single time
scaling.

Walkers are partitioned into fixed-size chunks, each with its own
counter-based RNG stream derived from the seed; per-step bleach counts are
integers, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DataError
from .timeseries import TimeSeries

CHUNK_SIZE = 65536  # fixed so that RNG streams do not depend on worker count
_OFFSETS_R = np.array([1, -1, 0, 0], dtype=np.int64)
_OFFSETS_C = np.array([0, 0, 1, -1], dtype=np.int64)
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)  # 4-connectivity


@dataclass(frozen=True)
class LatticeMask:
    """Compartment and bleach-region masks on a pixel grid."""

    inside: np.ndarray
    bleach: np.ndarray
    pixel_size_um: float

    def __post_init__(self) -> None:
        inside = np.asarray(self.inside, dtype=bool)
        bleach = np.asarray(self.bleach, dtype=bool)
        object.__setattr__(self, "inside", inside)
        object.__setattr__(self, "bleach", bleach)
        if inside.ndim != 2 or inside.shape != bleach.shape:
            raise ValueError("inside and bleach must be 2-D arrays of equal shape")
        if not self.pixel_size_um > 0:
            raise ValueError("pixel size must be > 0")
        if not inside.any():
            raise ValueError("compartment mask is empty")
        if np.any(bleach & ~inside):
            raise ValueError("bleach region must lie inside the compartment")
        if bleach.any():
            labels, _ = ndimage.label(inside, structure=_CROSS)
            bleach_labels = np.unique(labels[bleach])
            if bleach_labels.size > 1:
                raise ValueError("bleach region spans disconnected compartment parts")

    @property
    def height(self) -> int:
        return int(self.inside.shape[0])

    @property
    def width(self) -> int:
        return int(self.inside.shape[1])

    @property
    def equilibrium_fraction(self) -> float:
        return float(self.bleach.sum() / self.inside.sum())


@dataclass(frozen=True)
class WalkConfig:
    """Walker count, step count and the explicit RNG seed.

    Use n_particles >= 1e4 for quantitative runs; `jobs` only distributes
    fixed chunks over threads and never changes the result.
    """

    n_particles: int
    n_steps: int
    seed: int
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _chunk_sizes(total: int) -> list[int]:
    sizes = [CHUNK_SIZE] * (total // CHUNK_SIZE)
    if total % CHUNK_SIZE:
        sizes.append(total % CHUNK_SIZE)
    return sizes


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _walk_chunk(
    inside_pad: np.ndarray,
    bleach_pad: np.ndarray,
    pool: np.ndarray,
    width: int,
    n: int,
    n_steps: int,
    seed: int,
    index: int,
) -> np.ndarray:
    rng = _chunk_rng(seed, index)
    start = pool[rng.integers(0, pool.size, n)]
    rows = start // width + 1  # +1: padded border
    cols = start % width + 1
    counts = np.empty(n_steps + 1, dtype=np.int64)
    counts[0] = int(bleach_pad[rows, cols].sum())
    for step_i in range(1, n_steps + 1):
        direction = rng.integers(0, 4, n)
        trial_r = rows + _OFFSETS_R[direction]
        trial_c = cols + _OFFSETS_C[direction]
        accept = inside_pad[trial_r, trial_c]
        rows = np.where(accept, trial_r, rows)
        cols = np.where(accept, trial_c, cols)
        counts[step_i] = int(bleach_pad[rows, cols].sum())
    return counts


def simulate_recovery(mask: LatticeMask, cfg: WalkConfig) -> TimeSeries:
    """Normalized bleach-region recovery in lattice time units (steps).

    Walkers start uniformly on inside-minus-bleach; the curve is the bleach
    occupancy fraction divided by its equilibrium value, so it rises from 0
    toward 1 (plus Monte Carlo noise of order n_particles^-1/2).
    """
    pool_mask = mask.inside & ~mask.bleach
    if not pool_mask.any():
        raise DataError("no unbleached pool: bleach region covers the compartment")
    inside_pad = np.zeros((mask.height + 2, mask.width + 2), dtype=bool)
    inside_pad[1:-1, 1:-1] = mask.inside
    bleach_pad = np.zeros_like(inside_pad)
    bleach_pad[1:-1, 1:-1] = mask.bleach
    pool = np.flatnonzero(pool_mask.ravel())

    sizes = _chunk_sizes(cfg.n_particles)
    tasks = [
        (inside_pad, bleach_pad, pool, mask.width, n, cfg.n_steps, cfg.seed, i)
        for i, n in enumerate(sizes)
    ]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool_exec:
            partials = list(pool_exec.map(lambda a: _walk_chunk(*a), tasks))
    else:
        partials = [_walk_chunk(*a) for a in tasks]
    counts = np.sum(partials, axis=0)

    fraction = counts / cfg.n_particles
    recovery = fraction / mask.equilibrium_fraction
    return TimeSeries(np.arange(cfg.n_steps + 1, dtype=float), recovery)


def _msd_chunk(n: int, n_steps: int, seed: int, index: int, wall: bool) -> np.ndarray:
    rng = _chunk_rng(seed, index)
    x = np.zeros(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.int64)
    sums = np.empty(n_steps + 1, dtype=np.int64)
    sums[0] = 0
    for step_i in range(1, n_steps + 1):
        direction = rng.integers(0, 4, n)
        tx = x + _OFFSETS_R[direction]
        ty = y + _OFFSETS_C[direction]
        if wall:
            accept = tx >= 0  # reflecting wall at x = 0
            x = np.where(accept, tx, x)
            y = np.where(accept, ty, y)
        else:
            x, y = tx, ty
        sums[step_i] = int((x * x + y * y).sum())
    return sums


def msd_check(cfg: WalkConfig, reflecting_wall: bool = False) -> float:
    """Fitted MSD-vs-steps slope of the unconfined walk (expected: 1).

    Each move displaces exactly one pixel, so MSD(n) = n and the lattice
    diffusivity is 1/4 px^2/step. With `reflecting_wall`, walkers start on a
    wall at x = 0 and the slope drops below 1.
    """
    sizes = _chunk_sizes(cfg.n_particles)
    partials = [
        _msd_chunk(n, cfg.n_steps, cfg.seed, i, reflecting_wall)
        for i, n in enumerate(sizes)
    ]
    msd = np.sum(partials, axis=0) / cfg.n_particles
    steps = np.arange(cfg.n_steps + 1, dtype=float)
    return float((steps @ msd) / (steps @ steps))


@dataclass(frozen=True)
class DiffusionEstimate:
    D_um2_s: float
    rmse: float
    ok: bool


def lattice_time_to_seconds(steps, pixel_size_um: float, d_um2_s: float):
    return np.asarray(steps, dtype=float) * pixel_size_um**2 / (4.0 * d_um2_s)


def estimate_D(
    observed: TimeSeries, mask: LatticeMask, cfg: WalkConfig
) -> DiffusionEstimate:
    """Diffusion coefficient that best maps the simulated recovery onto the
    observed one.

    Parameters
    ----------
    observed:
        Normalized recovery (frapfit conventions), times in seconds.
    mask, cfg:
        Compartment geometry and walk settings; the walk runs once, only the
        time scaling t = steps px^2 / (4D) is fitted (coarse log-spaced scan
        refined by golden-section search).

    The fit uses the transient window of the observed curve (up to its first
    crossing of 97% of the plateau estimate): past that point the curve
    carries no time-scale information and correlated plateau noise would
    bias the estimate. Observed times beyond the simulated span are matched
    against the final simulated value, so size n_steps to cover the
    recovery. Returns ok = False when the dynamic ranges of the two curves
    do not overlap.
    """
    sim = simulate_recovery(mask, cfg)
    if min(sim.y.max(), observed.y.max()) <= max(sim.y.min(), observed.y.min()):
        return DiffusionEstimate(math.nan, math.nan, ok=False)
    px2 = mask.pixel_size_um**2

    tail = max(1, observed.y.size // 10)
    plateau = float(np.mean(observed.y[-tail:]))
    crossed = np.nonzero(observed.y >= 0.97 * plateau)[0]
    cut = int(crossed[0]) if crossed.size else observed.y.size - 1
    cut = min(max(cut, 10), observed.y.size - 1)
    t_fit = observed.t[: cut + 1]
    y_fit = observed.y[: cut + 1]

    def rmse_at(d_um2_s: float) -> float:
        steps = 4.0 * d_um2_s * t_fit / px2
        model = np.interp(steps, sim.t, sim.y)  # clamps at the plateau end
        return float(np.sqrt(np.mean((model - y_fit) ** 2)))

    # bracket around the D that maps the full walk onto the fit window
    d_mid = cfg.n_steps * px2 / (4.0 * t_fit[-1])
    grid = d_mid * np.logspace(-2.0, 2.0, 81)
    best = int(np.argmin([rmse_at(d) for d in grid]))
    lo = math.log(grid[max(best - 1, 0)])
    hi = math.log(grid[min(best + 1, grid.size - 1)])
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = rmse_at(math.exp(c)), rmse_at(math.exp(d))
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = rmse_at(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = rmse_at(math.exp(d))
    d_hat = math.exp((a + b) / 2.0)
    return DiffusionEstimate(d_hat, rmse_at(d_hat), ok=True)


def read_pgm(path: str | Path) -> np.ndarray:
    """Binary (P5) PGM -> boolean mask (non-zero pixels are True)."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        # skip whitespace and '#' comment lines in the header
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise DataError(f"{path}: 16-bit PGM not supported")
    pos += 1  # single whitespace after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raster.reshape(height, width) > 0


def write_pgm(path: str | Path, mask: np.ndarray) -> Path:
    path = Path(path)
    mask = np.asarray(mask, dtype=bool)
    header = f"P5\n{mask.shape[1]} {mask.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write((mask.astype(np.uint8) * 255).tobytes())
    return path


def read_mask_csv(path: str | Path) -> np.ndarray:
    """CSV of 0/1 values (no header) -> boolean mask."""
    grid = np.loadtxt(path, delimiter=",", dtype=float)
    if grid.ndim == 1:
        grid = grid[None, :]
    return grid > 0


def load_mask(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_mask_csv(path)
