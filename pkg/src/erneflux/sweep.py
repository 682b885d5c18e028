"""Parameter sweeps over junction length, angle, reporter and radius.

Each grid point yields the transport rate (closed form, or fitted from a
full PDE run), the timescale-separation diagnostics, and optionally an
RMSE against supplied experimental curves. Points where a reporter cannot
pass the junction are reported as infeasible rows rather than dropped.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analytic import CellParams, rate_constant, recovery_curve
from .errors import InfeasibleGeometryError
from .frapfit import compare_model_data, fit_one_phase
from .geometry import Cone, Reporter, effective_geometry, harmonic_mean_area
from .solver import SimConfig, simulate
from .timeseries import TimeSeries

SUMMARY_HEADER = [
    "L_um", "alpha_deg", "reporter", "R_um",
    "kappa_per_s", "half_time_s", "delta1", "delta2", "rmse",
]


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep axes over cone-junction parameters.

    data maps reporter names to normalized experimental recovery curves;
    mode "analytic" uses the closed-form rate, "full-pde" runs the solver
    and fits the resulting curve.
    """

    cell: CellParams
    L_values_um: Sequence[float]
    alpha_values_rad: Sequence[float]
    reporters: Sequence[Reporter]
    R_values_um: Sequence[float] = (11e-3,)
    mode: str = "analytic"
    data: Optional[dict[str, TimeSeries]] = None
    n_cells: int = 64
    dt_s: float = 1e-3

    def __post_init__(self) -> None:
        for name, axis in [
            ("L_values_um", self.L_values_um),
            ("alpha_values_rad", self.alpha_values_rad),
            ("reporters", self.reporters),
            ("R_values_um", self.R_values_um),
        ]:
            if len(axis) == 0:
                raise ValueError(f"sweep axis {name} is empty")
        if self.mode not in ("analytic", "full-pde"):
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        for L in self.L_values_um:
            Cone(R_um=min(self.R_values_um), alpha_rad=max(self.alpha_values_rad), L_um=L)

    def n_points(self) -> int:
        return (len(self.L_values_um) * len(self.alpha_values_rad)
                * len(self.reporters) * len(self.R_values_um))


@dataclass(frozen=True)
class SweepRow:
    L_um: float
    alpha_rad: float
    reporter: str
    R_um: float
    feasible: bool
    kappa_per_s: float = math.nan
    half_time_s: float = math.nan
    A_star_um2: float = math.nan
    delta1: float = math.nan
    delta2: float = math.nan
    rmse: Optional[float] = None


def _evaluate_point(
    spec: SweepSpec, L: float, alpha: float, reporter: Reporter, R: float
) -> SweepRow:
    geom = Cone(R_um=R, alpha_rad=alpha, L_um=L)
    try:
        eff = effective_geometry(geom, reporter)
    except InfeasibleGeometryError:
        return SweepRow(L, alpha, reporter.name, R, feasible=False)

    a_star = harmonic_mean_area(eff)
    delta1 = spec.cell.k * L * a_star / spec.cell.V_NE_um3
    delta2 = spec.cell.V_NE_um3 / spec.cell.V_ER_um3
    series = None
    if spec.mode == "analytic":
        rate = rate_constant(spec.cell, eff, reporter)
        kappa, half_time = rate.kappa_per_s, rate.half_time_s
    else:
        kappa_est = rate_constant(spec.cell, eff, reporter).kappa_per_s
        t_end = 5.0 / kappa_est
        # resolve the recovery, but cap the per-point step count so slow
        # points do not dominate the sweep (kappa*dt stays <= 2.5e-4)
        dt = max(min(spec.dt_s, 0.05 / kappa_est), t_end / 20_000)
        cfg = SimConfig(
            cell=spec.cell, geom=eff, reporter=reporter, n_cells=spec.n_cells,
            dt_s=dt, t_end_s=t_end,
        )
        result = simulate(cfg)
        series = result.ne_series()
        fit = fit_one_phase(series)
        kappa, half_time = fit.kappa_per_s, math.log(2.0) / fit.kappa_per_s

    rmse = None
    if spec.data is not None and reporter.name in spec.data:
        observed = spec.data[reporter.name]
        if series is None:
            series = recovery_curve(kappa, 1.0, observed.t)
        rmse = compare_model_data(observed, series).rmse
    return SweepRow(L, alpha, reporter.name, R, True, kappa, half_time,
                    a_star, delta1, delta2, rmse)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SweepRow]:
    """Evaluate the full Cartesian grid, rows in lexicographic axis order
    (L, alpha, reporter, R). Output is independent of the worker count."""
    points = list(itertools.product(
        spec.L_values_um, spec.alpha_values_rad, spec.reporters, spec.R_values_um
    ))
    if jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda p: _evaluate_point(spec, *p), points))
    else:
        rows = [_evaluate_point(spec, *p) for p in points]
    return rows


def write_summary_csv(rows: Sequence[SweepRow], path: str | Path) -> Path:
    """Summary table; infeasible rows keep their axis values and leave the
    derived columns empty."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            if row.feasible:
                derived = [f"{row.kappa_per_s:.10g}", f"{row.half_time_s:.10g}",
                           f"{row.delta1:.10g}", f"{row.delta2:.10g}",
                           "" if row.rmse is None else f"{row.rmse:.10g}"]
            else:
                derived = ["", "", "", "", ""]
            writer.writerow([
                f"{row.L_um:.10g}", f"{math.degrees(row.alpha_rad):.10g}",
                row.reporter, f"{row.R_um:.10g}", *derived,
            ])
    return path


def emit_figure_data(
    rows: Sequence[SweepRow],
    times_s: Sequence[float],
    out_dir: str | Path,
    data: Optional[dict[str, TimeSeries]] = None,
) -> list[Path]:
    """One plot-ready CSV per sweep row: `t_s,model` (+ `data` when curves
    are supplied, in which case the data's own time grid is used).

    Infeasible rows and empty time grids produce header-only files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    times = np.asarray(times_s, dtype=float)
    paths = []
    for i, row in enumerate(rows):
        observed = None if data is None else data.get(row.reporter)
        name = (f"curve_{i:03d}_{row.reporter}_L{row.L_um * 1e3:g}nm"
                f"_a{math.degrees(row.alpha_rad):g}deg.csv")
        path = out_dir / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t_s", "model"] + (["data"] if observed is not None else [])
            writer.writerow(header)
            if not row.feasible:
                paths.append(path)
                continue
            grid = observed.t if observed is not None else times
            if grid.size == 0:
                paths.append(path)
                continue
            model = 1.0 - np.exp(-row.kappa_per_s * grid)
            for j, t in enumerate(grid):
                cells = [f"{t:.10g}", f"{model[j]:.10g}"]
                if observed is not None:
                    cells.append(f"{observed.y[j]:.10g}")
                writer.writerow(cells)
        paths.append(path)
    return paths
