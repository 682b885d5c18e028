"""Run configuration: INI-style file with strict validation and defaults.

Sections and keys (all optional; omitted keys fall back to the measured
default parameter set, units embedded in key names, angles in degrees):

    [cell]      k, V_ER_um3, V_NE_um3
    [junction]  kind (cone|tabulated), R_um, alpha_deg, L_um, profile_csv
    [reporter]  name (small|large|custom), D_um2_s, r_um
    [solver]    n_cells, dt_s, t_end_s (or "auto"), mode, time_scheme,
                sample_every
    [sweep]     L_um, alpha_deg, reporters, R_um, mode   (comma lists)
    [io]        output_dir, seed

Unknown sections or keys are rejected. Command-line flags override file
values, which override defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import defaults
from .analytic import CellParams
from .errors import ConfigError
from .geometry import (
    Cone,
    JunctionGeometry,
    Reporter,
    effective_geometry,
    load_profile_csv,
)
from .solver import SimConfig
from .sweep import SweepSpec
from .timeseries import TimeSeries

_SCHEMA: dict[str, set[str]] = {
    "cell": {"k", "V_ER_um3", "V_NE_um3"},
    "junction": {"kind", "R_um", "alpha_deg", "L_um", "profile_csv"},
    "reporter": {"name", "D_um2_s", "r_um"},
    "solver": {"n_cells", "dt_s", "t_end_s", "mode", "time_scheme", "sample_every"},
    "sweep": {"L_um", "alpha_deg", "reporters", "R_um", "mode"},
    "io": {"output_dir", "seed"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for every subcommand."""

    cell: CellParams
    junction: JunctionGeometry
    reporter: Reporter
    n_cells: int
    dt_s: float
    t_end_s: Optional[float]
    mode: str
    time_scheme: str
    sample_every: int
    sweep_L_um: tuple[float, ...]
    sweep_alpha_rad: tuple[float, ...]
    sweep_reporters: tuple[Reporter, ...]
    sweep_R_um: tuple[float, ...]
    sweep_mode: str
    output_dir: Path
    seed: int

    def effective(self) -> JunctionGeometry:
        return effective_geometry(self.junction, self.reporter)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            cell=self.cell,
            geom=self.effective(),
            reporter=self.reporter,
            n_cells=self.n_cells,
            dt_s=self.dt_s,
            t_end_s=self.t_end_s,
            mode=self.mode,
            time_scheme=self.time_scheme,
            sample_every=self.sample_every,
        )

    def sweep_spec(self, data: Optional[dict[str, TimeSeries]] = None) -> SweepSpec:
        return SweepSpec(
            cell=self.cell,
            L_values_um=self.sweep_L_um,
            alpha_values_rad=self.sweep_alpha_rad,
            reporters=self.sweep_reporters,
            R_values_um=self.sweep_R_um,
            mode=self.sweep_mode,
            data=data,
            n_cells=self.n_cells,
            dt_s=self.dt_s,
        )

    def to_dict(self) -> dict:
        junction: dict[str, object]
        if isinstance(self.junction, Cone):
            junction = {
                "kind": "cone",
                "R_um": self.junction.R_um,
                "alpha_deg": math.degrees(self.junction.alpha_rad),
                "L_um": self.junction.L_um,
            }
        else:
            junction = {
                "kind": "tabulated",
                "z_um": list(self.junction.z_um),
                "radius_um": list(self.junction.radius_um),
            }
        return {
            "cell": {
                "k": self.cell.k,
                "V_ER_um3": self.cell.V_ER_um3,
                "V_NE_um3": self.cell.V_NE_um3,
            },
            "junction": junction,
            "reporter": {
                "name": self.reporter.name,
                "D_um2_s": self.reporter.D_um2_s,
                "r_um": self.reporter.r_um,
            },
            "solver": {
                "n_cells": self.n_cells,
                "dt_s": self.dt_s,
                "t_end_s": self.t_end_s,
                "mode": self.mode,
                "time_scheme": self.time_scheme,
                "sample_every": self.sample_every,
            },
            "sweep": {
                "L_um": list(self.sweep_L_um),
                "alpha_deg": [math.degrees(a) for a in self.sweep_alpha_rad],
                "reporters": [r.name for r in self.sweep_reporters],
                "R_um": list(self.sweep_R_um),
                "mode": self.sweep_mode,
            },
            "io": {"output_dir": str(self.output_dir), "seed": self.seed},
        }

    def config_hash(self) -> str:
        """Hash of the scientific configuration; output routing ([io]) is
        excluded so the same run written elsewhere keeps the same identity."""
        payload = {k: v for k, v in self.to_dict().items() if k != "io"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _coerce(section: str, key: str, value: str, kind: str):
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "float_list":
            return tuple(float(v) for v in value.split(","))
        if kind == "str_list":
            return tuple(v.strip() for v in value.split(",") if v.strip())
        return value.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _lookup_reporter(name: str, d: Optional[float], r: Optional[float]) -> Reporter:
    if "@" in name:
        # "<base>@<r_um>": a registry reporter with a modified steric radius,
        # e.g. "large@0.006" to explore the large reporter's plausible range
        base_name, _, r_raw = name.partition("@")
        if base_name not in defaults.REPORTERS:
            raise ConfigError(f"unknown reporter base {base_name!r} in {name!r}")
        try:
            r_mod = float(r_raw)
        except ValueError:
            raise ConfigError(f"bad radius in reporter spec {name!r}") from None
        base = defaults.REPORTERS[base_name]
        return Reporter(name=f"{base_name}_r{r_raw}", D_um2_s=base.D_um2_s, r_um=r_mod)
    if name in defaults.REPORTERS:
        base = defaults.REPORTERS[name]
        return Reporter(
            name=name,
            D_um2_s=base.D_um2_s if d is None else d,
            r_um=base.r_um if r is None else r,
        )
    if d is None or r is None:
        raise ConfigError(
            f"[reporter] custom reporter {name!r} needs both D_um2_s and r_um"
        )
    return Reporter(name=name, D_um2_s=d, r_um=r)


def load_config(
    path: str | Path | None = None, overrides: Optional[dict[str, str]] = None
) -> RunConfig:
    """Parse, merge with overrides ("section.key" -> raw string) and validate.

    An absent path (or empty file) yields the full default parameter set.
    Violations raise ConfigError naming the offending key; an oversized
    reporter raises InfeasibleGeometryError already at load time.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (unit suffixes)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None

    values: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key [{section}] {key}")
            values.setdefault(section, {})[key] = value
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown override {dotted!r}")
        values.setdefault(section, {})[key] = value

    def get(section: str, key: str, kind: str, default=None):
        raw = values.get(section, {}).get(key)
        if raw is None:
            return default
        return _coerce(section, key, raw, kind)

    cell = CellParams(
        k=get("cell", "k", "int", defaults.JUNCTION_COUNT),
        V_ER_um3=get("cell", "V_ER_um3", "float", defaults.V_ER_UM3),
        V_NE_um3=get("cell", "V_NE_um3", "float", defaults.V_NE_UM3),
    )

    kind = get("junction", "kind", "str", "cone")
    profile_csv = get("junction", "profile_csv", "str")
    if kind == "tabulated":
        if not profile_csv:
            raise ConfigError("[junction] tabulated kind requires profile_csv")
        junction: JunctionGeometry = load_profile_csv(profile_csv)
    elif kind == "cone":
        alpha_deg = get("junction", "alpha_deg", "float", defaults.OPENING_ANGLE_DEG)
        if not 0.0 <= alpha_deg < 90.0:
            raise ConfigError("[junction] alpha_deg must satisfy 0 <= alpha < 90")
        junction = Cone(
            R_um=get("junction", "R_um", "float", defaults.JUNCTION_RADIUS_UM),
            alpha_rad=math.radians(alpha_deg),
            L_um=get("junction", "L_um", "float", defaults.JUNCTION_LENGTH_UM),
        )
    else:
        raise ConfigError(f"[junction] kind must be cone or tabulated, got {kind!r}")

    reporter = _lookup_reporter(
        get("reporter", "name", "str", "small"),
        get("reporter", "D_um2_s", "float"),
        get("reporter", "r_um", "float"),
    )

    t_end_raw = values.get("solver", {}).get("t_end_s")
    t_end_s = None
    if t_end_raw is not None and t_end_raw.strip().lower() != "auto":
        t_end_s = _coerce("solver", "t_end_s", t_end_raw, "float")

    sweep_alpha_deg = get("sweep", "alpha_deg", "float_list", defaults.SWEEP_ALPHA_DEG)
    for a in sweep_alpha_deg:
        if not 0.0 <= a < 90.0:
            raise ConfigError("[sweep] alpha_deg entries must satisfy 0 <= alpha < 90")
    sweep_reporter_names = get("sweep", "reporters", "str_list", ("small", "large"))
    sweep_reporters = tuple(
        reporter if name == reporter.name else _lookup_reporter(name, None, None)
        for name in sweep_reporter_names
    )

    cfg = RunConfig(
        cell=cell,
        junction=junction,
        reporter=reporter,
        n_cells=get("solver", "n_cells", "int", defaults.N_CELLS),
        dt_s=get("solver", "dt_s", "float", defaults.DT_S),
        t_end_s=t_end_s,
        mode=get("solver", "mode", "str", "full"),
        time_scheme=get("solver", "time_scheme", "str", "implicit_euler"),
        sample_every=get("solver", "sample_every", "int", 1),
        sweep_L_um=tuple(get("sweep", "L_um", "float_list", defaults.SWEEP_L_UM)),
        sweep_alpha_rad=tuple(math.radians(a) for a in sweep_alpha_deg),
        sweep_reporters=sweep_reporters,
        sweep_R_um=tuple(
            get("sweep", "R_um", "float_list", (defaults.JUNCTION_RADIUS_UM,))
        ),
        sweep_mode=get("sweep", "mode", "str", "analytic"),
        output_dir=Path(get("io", "output_dir", "str", "out")),
        seed=get("io", "seed", "int", 7),
    )
    # surface invariant violations (incl. infeasible reporter/junction pairs) now
    cfg.sim_config()
    cfg.sweep_spec()
    return cfg
