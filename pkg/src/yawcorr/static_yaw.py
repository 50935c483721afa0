"""Cosine-law exponent and static yaw error estimation.

Both fits are one-dimensional least-squares problems on

    sum_t [P0(t) - P(t) / cos(theta_s + theta_d(t)) ** alpha] ** 2

with either ``alpha`` (benchmarking data, ``theta_s`` known) or ``theta_s``
(per wind-speed bin, ``alpha`` known) as the free parameter.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .errors import FitError, InsufficientDataError, InvalidInputError, UndefinedMetricError
from .power import PowerCurve, bin_index, fit_power_curve, reference_power
from .preprocess import moving_average
from .scada import Telemetry

log = logging.getLogger(__name__)

ALPHA_BOUNDS = (1e-6, 6.0)
THETA_BOUNDS = (-45.0, 45.0)


def _grid_then_bounded(f, lo, hi, n_grid, xatol):
    """Global grid scan followed by bounded Brent refinement around the best node.

    The static-yaw objective is nearly even in theta_s, so a pure local
    search can settle on the mirror-image minimum.
    """
    grid = np.linspace(lo, hi, n_grid)
    values = np.array([f(x) for x in grid])
    if not np.any(np.isfinite(values)):
        raise FitError("objective is not finite anywhere in the search interval")
    k = int(np.nanargmin(np.where(np.isfinite(values), values, np.inf)))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_grid - 1)]
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": xatol})
    if not res.success:
        raise FitError("bounded line search did not converge", {"message": res.message, "x": res.x})
    x, fx = float(res.x), float(res.fun)
    if values[k] < fx:
        x, fx = float(grid[k]), float(values[k])
    return x, fx


def yaw_objective(theta_s, alpha, p0, p, theta_d) -> float:
    c = np.cos(np.deg2rad(theta_s + theta_d))
    if np.any(c <= 0):
        return math.inf
    r = p0 - p / c**alpha
    return float(r @ r)


@dataclass(frozen=True)
class ExponentEstimate:
    alpha: float
    ci95: tuple[float, float]
    per_case_alphas: tuple[float, ...]
    objective_value: float

    def snapped(self) -> float:
        return float(round(self.alpha))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "ci95": list(self.ci95),
            "per_case_alphas": list(self.per_case_alphas),
            "objective_value": self.objective_value,
        }

    @classmethod
    def from_dict(cls, d) -> "ExponentEstimate":
        return cls(
            alpha=float(d["alpha"]),
            ci95=tuple(d["ci95"]),
            per_case_alphas=tuple(d["per_case_alphas"]),
            objective_value=float(d["objective_value"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ExponentEstimate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _power_terms(tel: Telemetry, curve: PowerCurve):
    return reference_power(curve, tel.wind_speed, tel.air_density), tel.power, tel.dynamic_yaw


def estimate_alpha(
    datasets: Sequence[tuple[Telemetry, float]],
    curve: PowerCurve,
    *,
    bounds: tuple[float, float] = ALPHA_BOUNDS,
    xatol: float = 1e-6,
    confidence: float = 0.95,
) -> ExponentEstimate:
    """Fit the cosine exponent on benchmarking datasets with known static offsets.

    Each dataset gets its own minimizer; the estimate is their mean with a
    Student-t confidence interval.
    """
    if not datasets:
        raise InsufficientDataError("need at least one benchmarking dataset")
    alphas, objectives = [], []
    for i, (tel, theta_s) in enumerate(datasets):
        if len(tel) == 0:
            raise InsufficientDataError(f"dataset {i} is empty")
        p0, p, theta_d = _power_terms(tel, curve)
        c = np.cos(np.deg2rad(theta_s + theta_d))
        if np.any(c <= 0):
            raise InvalidInputError(f"dataset {i}: cos(theta_s + theta_d) <= 0 for some samples")
        if np.max(np.abs(1.0 - c)) < 1e-12:
            log.warning("dataset %d: zero total yaw, exponent is unidentifiable; skipped", i)
            continue
        log_c = np.log(c)

        def f(a):
            r = p0 - p * np.exp(-a * log_c)
            return float(r @ r)

        a, fa = _grid_then_bounded(f, bounds[0], bounds[1], 121, xatol)
        alphas.append(a)
        objectives.append(fa)
    if not alphas:
        raise FitError("cosine exponent is unidentifiable: no dataset has nonzero total yaw")
    arr = np.array(alphas)
    mean = float(arr.mean())
    if arr.size > 1:
        half = stats.t.ppf(0.5 + confidence / 2, arr.size - 1) * arr.std(ddof=1) / math.sqrt(arr.size)
        ci = (mean - float(half), mean + float(half))
    else:
        ci = (mean, mean)
    return ExponentEstimate(mean, ci, tuple(alphas), float(sum(objectives)))


def benchmark_exponent(
    baseline: Telemetry,
    datasets: Sequence[tuple[Telemetry, float]],
    *,
    degree: int = 9,
    speed_range: tuple[float, float] | None = None,
    standard_density: float = 1.225,
    rated_power: float | None = None,
    iterations: int = 4,
    max_abs_dynamic_yaw: float = 3.0,
) -> tuple[PowerCurve, ExponentEstimate]:
    """Baseline curve and cosine exponent, refined jointly.

    The first curve uses only near-aligned baseline samples. Each further
    round refits on all baseline samples with their dynamic-yaw loss divided
    out at the current exponent, then re-estimates the exponent.
    """
    if iterations < 1:
        raise InvalidInputError("iterations must be >= 1")
    kw = dict(degree=degree, speed_range=speed_range, standard_density=standard_density, rated_power=rated_power)
    curve = fit_power_curve(baseline, max_abs_dynamic_yaw=max_abs_dynamic_yaw, **kw)
    est = estimate_alpha(datasets, curve)
    for _ in range(iterations - 1):
        curve = fit_power_curve(baseline, max_abs_dynamic_yaw=None, yaw_exponent=est.alpha, **kw)
        est = estimate_alpha(datasets, curve)
    return curve, est


@dataclass(frozen=True)
class BinEstimate:
    bin_range: tuple[float, float]
    theta_hat: float
    count: int
    objective_value: float
    at_boundary: bool = False


@dataclass(frozen=True)
class StaticYawEstimate:
    per_bin: tuple[BinEstimate, ...]
    theta_hat_mean: float
    bin_width: float
    alpha: float = float("nan")
    skipped_bins: tuple[tuple[float, float], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "theta_hat_mean": self.theta_hat_mean,
            "bin_width": self.bin_width,
            "alpha": self.alpha,
            "per_bin": [
                {
                    "bin_range": list(b.bin_range),
                    "theta_hat": b.theta_hat,
                    "count": b.count,
                    "objective_value": b.objective_value,
                    "at_boundary": b.at_boundary,
                }
                for b in self.per_bin
            ],
            "skipped_bins": [list(r) for r in self.skipped_bins],
        }

    @classmethod
    def from_dict(cls, d) -> "StaticYawEstimate":
        bins = tuple(
            BinEstimate(tuple(b["bin_range"]), b["theta_hat"], b["count"], b["objective_value"], b["at_boundary"])
            for b in d["per_bin"]
        )
        return cls(bins, d["theta_hat_mean"], d["bin_width"], d.get("alpha", float("nan")),
                   tuple(tuple(r) for r in d.get("skipped_bins", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "StaticYawEstimate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def smooth_for_static(tel: Telemetry, window: float = 3600.0) -> Telemetry:
    """Centered moving averages of the channels entering the static fit."""
    t = tel.timestamp
    return tel.replace(
        wind_speed=moving_average(t, tel.wind_speed, window),
        power=moving_average(t, tel.power, window),
        air_density=moving_average(t, tel.air_density, window),
        nacelle_direction=np.zeros(len(tel)) if len(tel) else tel.nacelle_direction,
        wind_direction=np.mod(moving_average(t, tel.dynamic_yaw, window, angular=True), 360.0),
    )


def estimate_static_yaw(
    tel: Telemetry,
    curve: PowerCurve,
    alpha: float,
    *,
    bin_width: float = 0.5,
    min_bin_count: int = 20,
    bounds: tuple[float, float] = THETA_BOUNDS,
    speed_range: tuple[float, float] | None = None,
    xatol: float = 1e-6,
) -> StaticYawEstimate:
    """Per wind-speed bin static yaw fit, aggregated by the arithmetic mean.

    ``speed_range`` optionally restricts the fit (e.g. to central Region II).
    """
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    if bin_width <= 0:
        raise InvalidInputError("bin_width must be positive")
    if speed_range is not None:
        tel = tel.select((tel.wind_speed >= speed_range[0]) & (tel.wind_speed <= speed_range[1]))
    if len(tel) == 0:
        raise InsufficientDataError("no records to fit")
    p0, p, theta_d = _power_terms(tel, curve)
    keep = np.abs(theta_d) <= 90.0
    idx = bin_index(tel.wind_speed, bin_width)
    grid_n = int(round((bounds[1] - bounds[0]) / 0.5)) + 1

    results, skipped = [], []
    for k in np.unique(idx):
        sel = (idx == k) & keep
        rng = (float(k * bin_width), float((k + 1) * bin_width))
        n = int(sel.sum())
        if n < min_bin_count:
            skipped.append(rng)
            continue
        bp0, bp, btd = p0[sel], p[sel], theta_d[sel]
        theta, fval = _grid_then_bounded(
            lambda th: yaw_objective(th, alpha, bp0, bp, btd), bounds[0], bounds[1], grid_n, xatol
        )
        at_edge = min(theta - bounds[0], bounds[1] - theta) < 1e-3
        if at_edge:
            log.warning("bin %s: static yaw minimizer at search boundary (%.3f deg)", rng, theta)
        results.append(BinEstimate(rng, theta, n, fval, at_edge))
    if not results:
        raise InsufficientDataError(f"no wind-speed bin has >= {min_bin_count} samples")
    mean = float(np.mean([b.theta_hat for b in results]))
    return StaticYawEstimate(tuple(results), mean, float(bin_width), float(alpha), tuple(skipped))


def rmae(theta_hat: float, theta_true: float) -> float:
    """Signed relative error in percent; take ``abs`` for summaries."""
    if theta_true == 0:
        raise UndefinedMetricError("relative error is undefined for a zero true offset")
    return (theta_hat - theta_true) / theta_true * 100.0


def yaw_corrected_power(tel: Telemetry, theta_s: float, alpha: float, standard_density: float = 1.225):
    """Density-normalized power divided by cos(total yaw) ** alpha."""
    c = np.cos(np.deg2rad(theta_s + tel.dynamic_yaw))
    return tel.power * standard_density / tel.air_density / c**alpha


def collapse_deviation(
    datasets: Sequence[tuple[Telemetry, float]],
    curve: PowerCurve,
    alpha: float,
    *,
    speed_range: tuple[float, float] = (6.9, 9.2),
    bin_width: float = 1.0,
) -> float:
    """Mean relative gap between binned yaw-corrected power and the zero-yaw curve."""
    gaps = []
    for tel, theta_s in datasets:
        sel = (tel.wind_speed >= speed_range[0]) & (tel.wind_speed <= speed_range[1])
        sub = tel.select(sel)
        corrected = yaw_corrected_power(sub, theta_s, alpha, curve.standard_density)
        idx = bin_index(sub.wind_speed, bin_width)
        for k in np.unique(idx):
            m = idx == k
            ref = float(np.mean(curve(sub.wind_speed[m])))
            gaps.append(abs(float(np.mean(corrected[m])) - ref) / ref)
    if not gaps:
        raise InsufficientDataError("no samples in the requested speed range")
    return float(np.mean(gaps))
