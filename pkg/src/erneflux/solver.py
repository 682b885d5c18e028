"""Time-dependent transport model coupling the junction PDE to both reservoirs.

The junction interior satisfies A(z) drho/dt = d/dz (D A(z) drho/dz) with
Dirichlet ends rho(0) = rho_NE, rho(L) = rho_ER, while the reservoirs evolve
by the (k-fold) boundary fluxes. Discretization is a conservative finite
volume scheme on a uniform z grid: face fluxes -D A_face (rho_R - rho_L)/dz,
half-cell coupling D A(0) (rho_1 - rho_NE)/(dz/2) at the reservoir ends, and
exact per-cell volumes. The reservoir densities join the junction unknowns in
one symmetric tridiagonal system solved implicitly each step, which makes the
scheme unconditionally stable and exactly mass-conserving.

The junction equilibrates on the timescale L^2/D (~3e-8 s for the measured
geometry), many orders faster than the reservoirs, so implicit Euler is the
default; Crank-Nicolson is available for time-accuracy studies.

Reduced modes replace the junction PDE by its quasistationary flux and are
advanced by the exact exponential update, so `frozen_er+quasistationary`
reproduces the closed-form recovery curve to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded, solveh_banded

from .analytic import CellParams, rate_constant
from .geometry import (
    EffectiveGeometry,
    Reporter,
    area_at,
    area_integral,
    harmonic_mean_area,
    inverse_area_integral,
)
from .timeseries import TimeSeries

TIME_SCHEMES = {"implicit_euler": 1.0, "crank_nicolson": 0.5}
_MODE_TOKENS = {"full", "quasistationary", "frozen_er"}


def parse_mode(mode: str) -> tuple[bool, bool]:
    """Mode string -> (quasistationary, frozen_er) flags.

    Accepts "full", "quasistationary", "frozen_er" and the combination
    "frozen_er+quasistationary" (order-insensitive).
    """
    tokens = {tok.strip() for tok in mode.split("+") if tok.strip()}
    if not tokens or not tokens <= _MODE_TOKENS:
        raise ValueError(f"unknown mode {mode!r}")
    if "full" in tokens and len(tokens) > 1:
        raise ValueError("'full' cannot be combined with reduced-mode tokens")
    return "quasistationary" in tokens, "frozen_er" in tokens


@dataclass(frozen=True)
class Grid:
    """Uniform finite-volume grid along the junction axis (NE side at z = 0)."""

    z_faces: np.ndarray
    z_centers: np.ndarray
    face_areas_um2: np.ndarray
    cell_volumes_um3: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.z_centers.size)

    @property
    def dz_um(self) -> float:
        return float(self.z_faces[1] - self.z_faces[0])

    @property
    def L_um(self) -> float:
        return float(self.z_faces[-1])


def build_grid(geom: EffectiveGeometry, n_cells: int) -> Grid:
    """Grid with exact cell volumes v_i = integral of A over the cell."""
    if n_cells < 4:
        raise ValueError("n_cells must be >= 4")
    z_faces = np.linspace(0.0, geom.L_um, n_cells + 1)
    z_centers = 0.5 * (z_faces[:-1] + z_faces[1:])
    face_areas = np.asarray(area_at(geom, z_faces), dtype=float)
    volumes = np.array(
        [area_integral(geom, z_faces[i], z_faces[i + 1]) for i in range(n_cells)]
    )
    return Grid(z_faces, z_centers, face_areas, volumes)


@dataclass(frozen=True)
class SimState:
    """Densities at one instant: junction cells plus the two reservoirs."""

    t_s: float
    rho_j: np.ndarray
    rho_er: float
    rho_ne: float

    def __post_init__(self) -> None:
        rho_j = np.asarray(self.rho_j, dtype=float)
        object.__setattr__(self, "rho_j", rho_j)
        values = np.concatenate([[self.rho_ne, self.rho_er], rho_j])
        if not np.all(np.isfinite(values)):
            raise ValueError("densities must be finite")
        if np.any(values < 0):
            raise ValueError("densities must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to run one simulation.

    t_end_s = None means five e-folds of the analytic rate estimate. The
    initial junction profile defaults to the linear ramp between the
    reservoir values; it relaxes within one step anyway given the junction
    stiffness, so the choice is immaterial.
    """

    cell: CellParams
    geom: EffectiveGeometry
    reporter: Reporter
    n_cells: int = 64
    dt_s: float = 1e-3
    t_end_s: Optional[float] = None
    mode: str = "full"
    time_scheme: str = "implicit_euler"
    rho_er0: float = 1.0
    rho_ne0: float = 0.0
    sample_every: int = 1

    def __post_init__(self) -> None:
        if not self.dt_s > 0:
            raise ValueError("dt must be > 0")
        if self.n_cells < 4:
            raise ValueError("n_cells must be >= 4")
        if self.t_end_s is not None and self.t_end_s < 0:
            raise ValueError("t_end must be >= 0")
        if self.time_scheme not in TIME_SCHEMES:
            raise ValueError(f"unknown time scheme {self.time_scheme!r}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        if self.rho_er0 < 0 or self.rho_ne0 < 0:
            raise ValueError("initial densities must be >= 0")
        parse_mode(self.mode)

    def resolved_t_end_s(self) -> float:
        if self.t_end_s is not None:
            return float(self.t_end_s)
        return 5.0 / rate_constant(self.cell, self.geom, self.reporter).kappa_per_s

    def initial_state(self, grid: Grid) -> SimState:
        ramp = self.rho_ne0 + (self.rho_er0 - self.rho_ne0) * grid.z_centers / grid.L_um
        return SimState(0.0, ramp, self.rho_er0, self.rho_ne0)


@dataclass(frozen=True)
class DimensionlessNumbers:
    """Volume ratios governing the timescale separation."""

    delta1: float  # total junction volume (L A*) over V_NE
    delta2: float  # V_NE over V_ER
    warn: bool  # set when either ratio is too large for the reduced model


def dimensionless_numbers(cfg: SimConfig) -> DimensionlessNumbers:
    a_star = harmonic_mean_area(cfg.geom)
    delta1 = cfg.cell.k * cfg.geom.L_um * a_star / cfg.cell.V_NE_um3
    delta2 = cfg.cell.V_NE_um3 / cfg.cell.V_ER_um3
    return DimensionlessNumbers(delta1, delta2, warn=(delta1 > 0.2 or delta2 > 0.2))


class _PdeStepper:
    """Prefactored theta-scheme step of the coupled linear system.

    Unknown ordering: [rho_NE, rho_J(0..n-1), rho_ER]. The weighted mass
    w . u with w = [V_NE, k v_i, V_ER] is invariant because every edge
    conductance enters the matrix antisymmetrically (full mode).
    """

    def __init__(self, cfg: SimConfig, grid: Grid, dt_s: float):
        _, self.frozen_er = parse_mode(cfg.mode)
        self.theta = TIME_SCHEMES[cfg.time_scheme]
        n = grid.n_cells
        dz = grid.dz_um
        k, d = cfg.cell.k, cfg.reporter.D_um2_s
        # edge conductances between consecutive unknowns (mass units / s)
        gamma = np.empty(n + 1)
        gamma[0] = k * d * grid.face_areas_um2[0] / (dz / 2.0)
        gamma[1:-1] = k * d * grid.face_areas_um2[1:-1] / dz
        gamma[-1] = k * d * grid.face_areas_um2[-1] / (dz / 2.0)
        w = np.concatenate([[cfg.cell.V_NE_um3], k * grid.cell_volumes_um3,
                            [cfg.cell.V_ER_um3]])
        self.gamma, self.w, self.dt_s = gamma, w, dt_s
        gl = np.concatenate([[0.0], gamma])   # edge to the left of each unknown
        gr = np.concatenate([gamma, [0.0]])   # edge to the right
        diag = w + self.theta * dt_s * (gl + gr)
        upper = -self.theta * dt_s * gamma
        if not self.frozen_er:
            ab = np.zeros((2, n + 2))
            ab[1] = diag
            ab[0, 1:] = upper
            self._ab, self._banded = ab, True
        else:
            # pin rho_ER: replace its row by identity (general banded solve)
            ab = np.zeros((3, n + 2))
            ab[1] = diag
            ab[0, 1:] = upper
            ab[2, :-1] = upper
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
            self._ab, self._banded = ab, False

    def _explicit_part(self, u: np.ndarray) -> np.ndarray:
        """w*u - (1-theta) dt L u, the right-hand side of the theta scheme."""
        rhs = self.w * u
        if self.theta < 1.0:
            flow = self.gamma * np.diff(u)  # edge flows toward higher index
            div = np.concatenate([[flow[0]], np.diff(flow), [-flow[-1]]])
            rhs += (1.0 - self.theta) * self.dt_s * div
        return rhs

    def step_vector(self, u: np.ndarray) -> np.ndarray:
        rhs = self._explicit_part(u)
        if self._banded:
            return solveh_banded(self._ab, rhs)
        rhs[-1] = u[-1]
        return solve_banded((1, 1), self._ab, rhs)

    def mass(self, u: np.ndarray) -> float:
        return float(self.w @ u)


class _ReducedStepper:
    """Exact update of the quasistationary two-reservoir system.

    The junction holds no dynamic mass; its density is the steady profile
    between the instantaneous reservoir values. With the ER frozen the NE
    relaxes as rho_ER0 (1 - exp(-kappa t)) exactly.
    """

    def __init__(self, cfg: SimConfig, grid: Grid, dt_s: float):
        _, self.frozen_er = parse_mode(cfg.mode)
        self.kappa = rate_constant(cfg.cell, cfg.geom, cfg.reporter).kappa_per_s
        self.v_ne = cfg.cell.V_NE_um3
        self.v_er = cfg.cell.V_ER_um3
        rate = self.kappa if self.frozen_er else self.kappa * (1.0 + self.v_ne / self.v_er)
        self.decay = math.exp(-rate * dt_s)
        # steady junction profile: resistance fraction from the NE end
        res = np.array([inverse_area_integral(cfg.geom, 0.0, zc) for zc in grid.z_centers])
        self.res_frac = res / inverse_area_integral(cfg.geom, 0.0, grid.L_um)

    def step_pair(self, rho_ne: float, rho_er: float) -> tuple[float, float]:
        diff = (rho_er - rho_ne) * self.decay
        if self.frozen_er:
            return rho_er - diff, rho_er
        total = self.v_er * rho_er + self.v_ne * rho_ne
        rho_ne_new = (total - self.v_er * diff) / (self.v_er + self.v_ne)
        return rho_ne_new, rho_ne_new + diff

    def profile(self, rho_ne: float, rho_er: float) -> np.ndarray:
        return rho_ne + (rho_er - rho_ne) * self.res_frac

    def mass(self, u: np.ndarray) -> float:
        return float(self.v_ne * u[0] + self.v_er * u[-1])


def _make_stepper(cfg: SimConfig, grid: Grid, dt_s: float):
    quasistationary, _ = parse_mode(cfg.mode)
    if quasistationary:
        return _ReducedStepper(cfg, grid, dt_s)
    return _PdeStepper(cfg, grid, dt_s)


def step(state: SimState, cfg: SimConfig, grid: Grid, dt_s: float) -> SimState:
    """Advance one time step (implicit theta scheme, or exact reduced update)."""
    stepper = _make_stepper(cfg, grid, dt_s)
    if isinstance(stepper, _ReducedStepper):
        rho_ne, rho_er = stepper.step_pair(state.rho_ne, state.rho_er)
        rho_j = stepper.profile(rho_ne, rho_er)
    else:
        u = np.concatenate([[state.rho_ne], state.rho_j, [state.rho_er]])
        u = stepper.step_vector(u)
        rho_ne, rho_j, rho_er = u[0], u[1:-1], u[-1]
    return SimState(state.t_s + dt_s, rho_j, float(rho_er), float(rho_ne))


@dataclass(frozen=True)
class SimResult:
    """Sampled reservoir densities, the conserved-mass track, and optionally
    per-cell junction snapshots (rows aligned with t_s)."""

    t_s: np.ndarray
    rho_ne: np.ndarray
    rho_er: np.ndarray
    mass: np.ndarray
    junction: Optional[np.ndarray]
    grid: Grid
    cfg: SimConfig

    def ne_series(self) -> TimeSeries:
        return TimeSeries(self.t_s, self.rho_ne)

    def er_series(self) -> TimeSeries:
        return TimeSeries(self.t_s, self.rho_er)


def simulate(cfg: SimConfig, record_junction: bool = False) -> SimResult:
    """Run the configured model to t_end.

    Output is sampled every `cfg.sample_every` steps (always including the
    initial and final states). A trailing partial step lands exactly on
    t_end when t_end is not a multiple of dt. Sample times are exact
    multiples of dt to keep comparisons against closed forms clean.

    In the quasistationary modes the recorded mass excludes the (static)
    junction content, matching the reduced model's bookkeeping.
    """
    grid = build_grid(cfg.geom, cfg.n_cells)
    t_end = cfg.resolved_t_end_s()
    state0 = cfg.initial_state(grid)
    quasistationary, _ = parse_mode(cfg.mode)

    n_full = int(math.floor(t_end / cfg.dt_s + 1e-9))
    tail = t_end - n_full * cfg.dt_s
    if tail < cfg.dt_s * 1e-9:
        tail = 0.0

    u = np.concatenate([[state0.rho_ne], state0.rho_j, [state0.rho_er]])
    stepper = _make_stepper(cfg, grid, cfg.dt_s)

    times = [0.0]
    samples = [u.copy()]
    masses = [stepper.mass(u)]

    def record(t_s: float) -> None:
        times.append(t_s)
        samples.append(u.copy())
        masses.append(stepper.mass(u))

    for i in range(1, n_full + 1):
        if quasistationary:
            ne, er = stepper.step_pair(u[0], u[-1])
            u[0], u[-1] = ne, er
            u[1:-1] = stepper.profile(ne, er)
        else:
            u = stepper.step_vector(u)
        if i % cfg.sample_every == 0 or (i == n_full and tail == 0.0):
            record(i * cfg.dt_s)

    if tail > 0.0:
        tail_stepper = _make_stepper(cfg, grid, tail)
        if quasistationary:
            ne, er = tail_stepper.step_pair(u[0], u[-1])
            u[0], u[-1] = ne, er
            u[1:-1] = tail_stepper.profile(ne, er)
        else:
            u = tail_stepper.step_vector(u)
        record(t_end)

    t_arr = np.array(times)
    stack = np.vstack(samples)
    # drop a duplicate sample if the last full step was also recorded twice
    keep = np.concatenate([[True], np.diff(t_arr) > 0])
    t_arr, stack = t_arr[keep], stack[keep]
    mass_arr = np.array(masses)[keep]
    return SimResult(
        t_s=t_arr,
        rho_ne=stack[:, 0],
        rho_er=stack[:, -1],
        mass=mass_arr,
        junction=stack[:, 1:-1] if record_junction else None,
        grid=grid,
        cfg=cfg,
    )


def equilibrium_density(cfg: SimConfig) -> float:
    """Conserved-mass equilibrium of the full model (all densities equal)."""
    grid = build_grid(cfg.geom, cfg.n_cells)
    state = cfg.initial_state(grid)
    w_j = cfg.cell.k * grid.cell_volumes_um3
    mass = (cfg.cell.V_NE_um3 * state.rho_ne + cfg.cell.V_ER_um3 * state.rho_er
            + float(w_j @ state.rho_j))
    return mass / (cfg.cell.V_NE_um3 + cfg.cell.V_ER_um3 + float(w_j.sum()))


@dataclass(frozen=True)
class ConvergenceRow:
    n_cells: int
    dt_s: float
    rho_ne_end: float
    error: float


def convergence_study(
    cfg: SimConfig, n_cells_list: Sequence[int], dt_list: Sequence[float]
) -> list[ConvergenceRow]:
    """Error of rho_NE(t_end) on a refinement grid, against the finest level.

    The reference level is (max n_cells, min dt); rows at min dt isolate the
    spatial error and rows at max n_cells isolate the temporal error.
    """
    if len(n_cells_list) * len(dt_list) < 2:
        raise ValueError("need at least 2 refinement levels")
    t_end = cfg.resolved_t_end_s()

    def end_value(n: int, dt: float) -> float:
        run_cfg = replace(cfg, n_cells=n, dt_s=dt, t_end_s=t_end, sample_every=10**9)
        return float(simulate(run_cfg).rho_ne[-1])

    ref = end_value(max(n_cells_list), min(dt_list))
    rows = []
    for n in n_cells_list:
        for dt in dt_list:
            val = end_value(n, dt)
            rows.append(ConvergenceRow(n, dt, val, abs(val - ref)))
    return rows


def observed_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) vs log(spacing)."""
    h = np.log(np.asarray(spacings, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    if h.size < 2:
        raise ValueError("need at least 2 levels")
    return float(np.polyfit(h, e, 1)[0])
