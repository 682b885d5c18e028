"""Recovery-curve pipeline: bleach correction, normalization, exponential fit.

Measured NE intensities are corrected against an unbleached reference cell
(ratio after background subtraction), shifted so the first post-bleach point
is zero, and scaled so the fitted plateau is one. The fit model is the
one-phase association y0 + (plateau - y0)(1 - exp(-kappa (t - t0))), solved
by damped Gauss-Newton (Levenberg-Marquardt) iteration with an analytic
Jacobian. The same machinery fits model output, closing the loop between
simulated and measured transport rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, DegenerateFitError
from .timeseries import TimeSeries, align_and_average

__all__ = [
    "TimeSeries",
    "FitResult",
    "ComparisonMetrics",
    "fit_one_phase",
    "normalize_recovery",
    "compare_model_data",
    "align_and_average",
]

_STEP_TOL = 1e-10
_MAX_ITER = 200


@dataclass(frozen=True)
class FitResult:
    """One-phase association fit outcome. kappa is meaningful only when
    converged is set; otherwise the fields hold the best parameters seen."""

    kappa_per_s: float
    plateau: float
    y0: float
    rss: float
    converged: bool
    n_iter: int = 0


def _model(t: np.ndarray, y0: float, plateau: float, kappa: float, t0: float):
    return y0 + (plateau - y0) * -np.expm1(-kappa * (t - t0))


def _initial_guesses(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """plateau from the last-decile mean, y0 from the first sample, kappa from
    the time to reach 63% of the plateau; robust for monotone recoveries."""
    y0 = float(y[0])
    tail = max(1, y.size // 10)
    plateau = float(np.mean(y[-tail:]))
    kappa = None
    if plateau != y0:
        target = y0 + 0.632 * (plateau - y0)
        crossed = np.nonzero(np.sign(plateau - y0) * (y - target) >= 0)[0]
        crossed = crossed[crossed > 0]
        if crossed.size:
            kappa = 1.0 / (t[crossed[0]] - t[0])
    if kappa is None or not np.isfinite(kappa) or kappa <= 0:
        kappa = 1.0 / (t[-1] - t[0])
    return y0, plateau, kappa


def fit_one_phase(
    series: TimeSeries, init: Optional[tuple[float, float, float]] = None
) -> FitResult:
    """Least-squares one-phase association fit of a recovery curve.

    Parameters
    ----------
    series:
        At least 5 samples; t0 is pinned to the first sample time.
    init:
        Optional (y0, plateau, kappa) starting point; otherwise guessed from
        the data.

    The iteration stops when the relative parameter step drops below 1e-10
    or after 200 iterations; a fit that ends early, or lands on a
    non-positive rate, is reported with converged=False and the best
    parameters found so far.
    """
    t, y = series.t, series.y
    if t.size < 5:
        raise ValueError("need at least 5 points to fit")
    t0 = float(t[0])
    tau = t - t0

    if np.ptp(y) == 0.0:  # no dynamics: kappa unidentifiable
        y0, plateau, kappa = _initial_guesses(t, y)
        return FitResult(kappa, plateau, y0, 0.0, converged=False)

    p = np.array(init if init is not None else _initial_guesses(t, y), dtype=float)

    def residuals(params: np.ndarray) -> np.ndarray:
        return _model(t, params[0], params[1], params[2], t0) - y

    r = residuals(p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    n_iter = 0
    for n_iter in range(1, _MAX_ITER + 1):
        decay = np.exp(-p[2] * tau)
        jac = np.column_stack([decay, 1.0 - decay, (p[1] - p[0]) * tau * decay])
        grad = jac.T @ r
        normal = jac.T @ jac
        damping = np.diag(normal).copy()
        damping[damping <= 0] = 1e-30
        try:
            delta = np.linalg.solve(normal + lam * np.diag(damping), -grad)
        except np.linalg.LinAlgError:
            lam = min(lam * 10.0, 1e14)
            continue
        trial = p + delta
        r_trial = residuals(trial)
        cost_trial = float(r_trial @ r_trial)
        if cost_trial <= cost:
            step = float(np.linalg.norm(delta) / (np.linalg.norm(p) + 1e-300))
            p, r, cost = trial, r_trial, cost_trial
            lam = max(lam / 3.0, 1e-14)
            if step < _STEP_TOL:
                converged = True
                break
        else:
            lam = min(lam * 10.0, 1e14)

    if not p[2] > 0:
        converged = False
    # an amplitude indistinguishable from the residual noise means the rate
    # is not identified (constant or structureless input)
    noise_scale = math.sqrt(cost / max(t.size - 3, 1))
    if abs(p[1] - p[0]) < 2.0 * noise_scale:
        converged = False
    return FitResult(float(p[2]), float(p[1]), float(p[0]), cost, converged, n_iter)


def normalize_recovery(
    raw: TimeSeries, background: float, reference: TimeSeries
) -> TimeSeries:
    """Background-subtract, bleach-correct against the reference, and rescale.

    The reference (an unbleached cell) must cover the raw time span; the
    corrected curve is shifted so the first post-bleach point is 0 and scaled
    so the fitted plateau is 1. A common multiplicative photobleaching factor
    cancels in the ratio.
    """
    if not reference.covers(raw):
        raise DataError("reference does not cover the raw time span")
    ref_vals = reference.interp_at(raw.t)
    if np.any(ref_vals <= background):
        raise DataError("reference intensity must exceed background everywhere")
    corrected = (raw.y - background) / (ref_vals - background)
    shifted = corrected - corrected[0]
    fit = fit_one_phase(TimeSeries(raw.t, shifted))
    if not fit.converged:
        raise DegenerateFitError("plateau scaling failed: no recovery dynamics")
    if fit.plateau <= 0:
        raise DegenerateFitError("plateau scaling failed: non-positive plateau")
    return TimeSeries(raw.t, shifted / fit.plateau)


@dataclass(frozen=True)
class ComparisonMetrics:
    rmse: float
    max_abs_error: float
    n_points: int


def compare_model_data(data: TimeSeries, model: TimeSeries) -> ComparisonMetrics:
    """Point-wise error metrics on the time overlap (model interpolated to
    the data grid)."""
    lo = max(data.t[0], model.t[0])
    hi = min(data.t[-1], model.t[-1])
    inside = (data.t >= lo) & (data.t <= hi)
    if hi <= lo or not np.any(inside):
        raise ValueError("data and model time ranges do not overlap")
    diff = model.interp_at(data.t[inside]) - data.y[inside]
    return ComparisonMetrics(
        rmse=float(np.sqrt(np.mean(diff**2))),
        max_abs_error=float(np.max(np.abs(diff))),
        n_points=int(diff.size),
    )
