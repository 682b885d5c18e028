"""Command-line interface.

Subcommands: kappa, simulate, sweep, fit, frap2d, check. One config file
drives everything; flags override config keys (flag > file > default). Every
output directory gets a manifest recording the resolved config hash, the
seed, and the package version, and all outputs are byte-deterministic for a
fixed config + seed regardless of --jobs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import rate_constant, recovery_curve
from .config import RunConfig, load_config
from .errors import DataError
from .frap2d import (
    DiffusionEstimate,
    LatticeMask,
    WalkConfig,
    estimate_D,
    load_mask,
    simulate_recovery,
)
from .frapfit import fit_one_phase, normalize_recovery
from .geometry import harmonic_mean_area
from .solver import dimensionless_numbers, equilibrium_density, simulate
from .sweep import emit_figure_data, run_sweep, write_summary_csv
from .timeseries import TimeSeries


def _write_manifest(out_dir: Path, cfg: RunConfig, command: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "config_sha256": cfg.config_hash(),
        "seed": cfg.seed,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    mapping = {
        "L_um": "junction.L_um",
        "alpha_deg": "junction.alpha_deg",
        "R_um": "junction.R_um",
        "reporter": "reporter.name",
        "n_cells": "solver.n_cells",
        "dt_s": "solver.dt_s",
        "t_end_s": "solver.t_end_s",
        "mode": "solver.mode",
        "output_dir": "io.output_dir",
        "seed": "io.seed",
    }
    overrides: dict[str, str] = {}
    for attr, dotted in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[dotted] = str(value)
    for item in getattr(args, "set", None) or []:
        dotted, sep, value = item.partition("=")
        if not sep:
            raise DataError(f"--set expects section.key=value, got {item!r}")
        overrides[dotted.strip()] = value.strip()
    return overrides


def cmd_kappa(cfg: RunConfig, args: argparse.Namespace) -> int:
    rate = rate_constant(cfg.cell, cfg.effective(), cfg.reporter)
    nums = dimensionless_numbers(cfg.sim_config())
    print(f"kappa_per_s = {rate.kappa_per_s:.6g}")
    print(f"A_star_um2 = {rate.A_star_um2:.6g}")
    print(f"half_time_s = {rate.half_time_s:.6g}")
    print(f"t_63pct_s = {1.0 / rate.kappa_per_s:.6g}")
    print(f"delta1 = {nums.delta1:.6g}")
    print(f"delta2 = {nums.delta2:.6g}")
    if nums.delta2 >= 0.1:
        print(f"note: delta2 = {nums.delta2:.3g} is not << 1; "
              "the large reservoir depletes visibly (plateau gap ~ delta2/(1+delta2))")
    if nums.warn:
        print("warning: timescale separation is weak; reduced-model results "
              "are unreliable for these volumes")
    return 0


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    result = simulate(cfg.sim_config(), record_junction=args.dump_junction)
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    ts_path = out_dir / "timeseries.csv"
    with open(ts_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "rho_NE", "rho_ER"])
        for t, ne, er in zip(result.t_s, result.rho_ne, result.rho_er):
            writer.writerow([f"{t:.10g}", f"{ne:.10g}", f"{er:.10g}"])
    if args.dump_junction:
        jn_path = out_dir / "junction.csv"
        with open(jn_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s"] + [f"z_{z:.6g}" for z in result.grid.z_centers])
            for t, row in zip(result.t_s, result.junction):
                writer.writerow([f"{t:.10g}"] + [f"{v:.10g}" for v in row])
    _write_manifest(out_dir, cfg, "simulate")
    print(f"wrote {ts_path} ({len(result.t_s)} samples)")
    return 0


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    data = None
    if args.data_dir is not None:
        data = {}
        for path in sorted(Path(args.data_dir).glob("*.csv")):
            data[path.stem] = TimeSeries.from_csv(path)
        if not data:
            raise DataError(f"no CSV curves found in {args.data_dir}")
    spec = cfg.sweep_spec(data=data)
    rows = run_sweep(spec, jobs=args.jobs)
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = write_summary_csv(rows, out_dir / "summary.csv")
    kappas = [r.kappa_per_s for r in rows if r.feasible]
    times = np.linspace(0.0, 3.0 / min(kappas), 200) if kappas else np.array([])
    emit_figure_data(rows, times, out_dir / "curves", data=data)
    _write_manifest(out_dir, cfg, "sweep")
    print(f"wrote {summary} ({len(rows)} rows)")
    return 0


def cmd_fit(cfg: RunConfig, args: argparse.Namespace) -> int:
    cell_paths = sorted(Path(args.cells_dir).glob("*.csv"))
    ref_path = Path(args.reference)
    cell_paths = [p for p in cell_paths if p.resolve() != ref_path.resolve()]
    if not cell_paths:
        raise DataError(f"no cell CSVs found in {args.cells_dir}")
    reference = TimeSeries.from_csv(ref_path)
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    def fit_file(path: Path):
        raw = TimeSeries.from_csv(path)
        normalized = normalize_recovery(raw, args.background, reference)
        return fit_one_phase(normalized)

    if args.jobs > 1 and len(cell_paths) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            fits = list(pool.map(fit_file, cell_paths))  # order preserved
    else:
        fits = [fit_file(p) for p in cell_paths]

    results_path = out_dir / "fit_results.csv"
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "kappa_per_s", "plateau", "y0", "rss", "converged"])
        for path, fit in zip(cell_paths, fits):
            writer.writerow([
                path.name, f"{fit.kappa_per_s:.10g}", f"{fit.plateau:.10g}",
                f"{fit.y0:.10g}", f"{fit.rss:.10g}", str(fit.converged).lower(),
            ])
    _write_manifest(out_dir, cfg, "fit")
    print(f"wrote {results_path} ({len(cell_paths)} cells)")
    return 0


def cmd_frap2d(cfg: RunConfig, args: argparse.Namespace) -> int:
    inside = load_mask(args.mask)
    bleach = load_mask(args.bleach)
    mask = LatticeMask(inside=inside, bleach=bleach, pixel_size_um=args.pixel_um)
    observed = TimeSeries.from_csv(args.observed)
    walk = WalkConfig(
        n_particles=args.particles, n_steps=args.steps, seed=cfg.seed, jobs=args.jobs
    )
    estimate: DiffusionEstimate = estimate_D(observed, mask, walk)
    if not estimate.ok:
        print("error: observed and simulated dynamic ranges do not overlap",
              file=sys.stderr)
        return 1
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    curve = simulate_recovery(mask, walk)
    t_phys = curve.t * mask.pixel_size_um**2 / (4.0 * estimate.D_um2_s)
    curve_path = out_dir / "frap2d_curve.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "recovery"])
        for t, y in zip(t_phys, curve.y):
            writer.writerow([f"{t:.10g}", f"{y:.10g}"])
    _write_manifest(out_dir, cfg, "frap2d")
    print(f"D_um2_s = {estimate.D_um2_s:.6g}")
    print(f"rmse = {estimate.rmse:.6g}")
    print(f"wrote {curve_path}")
    return 0


def cmd_check(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Built-in verification: cone closed form, conservation, reduced-vs-full."""
    import scipy.integrate

    from .geometry import Cone, area_at
    from .solver import SimConfig

    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1

    geom = cfg.effective()
    if isinstance(geom, Cone):
        quad, _ = scipy.integrate.quad(lambda z: 1.0 / area_at(geom, z), 0, geom.L_um)
        closed = harmonic_mean_area(geom)
        rel = abs(geom.L_um / quad - closed) / closed
        report("cone_conductance_closed_form", rel < 1e-6, f"rel err {rel:.3e}")

    sim_cfg = cfg.sim_config()
    full_cfg = SimConfig(
        cell=sim_cfg.cell, geom=sim_cfg.geom, reporter=sim_cfg.reporter,
        n_cells=sim_cfg.n_cells, dt_s=sim_cfg.dt_s, t_end_s=2.0, mode="full",
        sample_every=10**6,
    )
    result = simulate(full_cfg)
    drift = abs(result.mass[-1] - result.mass[0]) / result.mass[0]
    report("mass_conservation_2000_steps", drift < 1e-10, f"relative drift {drift:.3e}")

    rate = rate_constant(cfg.cell, geom, cfg.reporter)
    t_end = 3.0 / rate.kappa_per_s
    full = simulate(SimConfig(
        cell=sim_cfg.cell, geom=sim_cfg.geom, reporter=sim_cfg.reporter,
        n_cells=sim_cfg.n_cells, dt_s=sim_cfg.dt_s, t_end_s=t_end, mode="full",
    ))
    exact = recovery_curve(rate.kappa_per_s, 1.0, full.t_s)
    rmse = float(np.sqrt(np.mean((full.rho_ne - exact.y) ** 2)))
    delta2 = dimensionless_numbers(sim_cfg).delta2
    tol = max(0.02, 0.55 * delta2)
    report("reduced_vs_full_agreement", rmse < tol,
           f"rmse {rmse:.4f} vs tol {tol:.4f} (delta2 = {delta2:.3g})")

    frozen = simulate(SimConfig(
        cell=sim_cfg.cell, geom=sim_cfg.geom, reporter=sim_cfg.reporter,
        n_cells=sim_cfg.n_cells, dt_s=sim_cfg.dt_s, t_end_s=t_end,
        mode="frozen_er+quasistationary",
    ))
    exact_f = recovery_curve(rate.kappa_per_s, 1.0, frozen.t_s)
    max_rel = float(np.max(np.abs(frozen.rho_ne[1:] - exact_f.y[1:]) / exact_f.y[1:]))
    report("reduced_mode_exactness", max_rel < 1e-10, f"max rel err {max_rel:.3e}")

    eq = equilibrium_density(full_cfg)
    gap_pred = delta2 / (1.0 + delta2)
    gap = 1.0 - eq
    report("plateau_gap_formula", abs(gap - gap_pred) < 0.01 * gap_pred + 1e-9,
           f"gap {gap:.5f} vs delta2/(1+delta2) {gap_pred:.5f}")

    print("check:", "ok" if failures == 0 else f"{failures} failure(s)")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erneflux",
        description="Junction-limited reservoir-to-reservoir diffusion: "
                    "rate prediction, PDE simulation, and FRAP fitting.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-c", "--config", default=None, help="INI config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--seed", type=int, default=None)

    p_kappa = sub.add_parser("kappa", help="closed-form transport rate")
    add_common(p_kappa)
    for flag in ("--L-um", "--alpha-deg", "--R-um"):
        p_kappa.add_argument(flag, type=float, default=None)
    p_kappa.add_argument("--reporter", default=None)
    p_kappa.set_defaults(func=cmd_kappa)

    p_sim = sub.add_parser("simulate", help="run the time-dependent model")
    add_common(p_sim)
    for flag in ("--L-um", "--alpha-deg", "--R-um", "--dt-s", "--t-end-s"):
        p_sim.add_argument(flag, type=float, default=None)
    p_sim.add_argument("--n-cells", type=int, default=None)
    p_sim.add_argument("--reporter", default=None)
    p_sim.add_argument("--mode", default=None)
    p_sim.add_argument("--dump-junction", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="parameter sweep over the axes")
    add_common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--data-dir", default=None,
                         help="directory of <reporter>.csv observed curves")
    p_sweep.set_defaults(func=cmd_sweep)

    p_fit = sub.add_parser("fit", help="normalize + fit a directory of cell CSVs")
    add_common(p_fit)
    p_fit.add_argument("--cells-dir", required=True)
    p_fit.add_argument("--reference", required=True, help="unbleached-cell CSV")
    p_fit.add_argument("--background", type=float, default=0.0)
    p_fit.add_argument("--jobs", type=int, default=1)
    p_fit.set_defaults(func=cmd_fit)

    p_frap = sub.add_parser("frap2d", help="lattice-walk diffusion estimate")
    add_common(p_frap)
    p_frap.add_argument("--mask", required=True, help="compartment PGM/CSV mask")
    p_frap.add_argument("--bleach", required=True, help="bleach-region PGM/CSV mask")
    p_frap.add_argument("--pixel-um", type=float, required=True)
    p_frap.add_argument("--observed", required=True, help="normalized recovery CSV")
    p_frap.add_argument("--particles", type=int, default=200_000)
    p_frap.add_argument("--steps", type=int, default=4096)
    p_frap.add_argument("--jobs", type=int, default=1)
    p_frap.set_defaults(func=cmd_frap2d)

    p_check = sub.add_parser("check", help="built-in verification suite")
    add_common(p_check)
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, overrides=_collect_overrides(args))
        return args.func(cfg, args)
    except Exception as exc:  # single-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
