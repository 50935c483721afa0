"""Total-yaw correction streams and their scoring with the correction factor CF_ye."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, UndefinedMetricError
from .forecast.features import FeatureSet, build_features
from .forecast.models import ForecastModel, predict
from .scada import Telemetry, wrap_360, wrap_angle


def total_yaw(static_hat, dynamic_hat):
    """Wrapped sum of static and dynamic yaw estimates."""
    return wrap_angle(np.add(static_hat, dynamic_hat))


def correction_factor(estimates, truths) -> float:
    """CF_ye in percent: 100 * (1 - |est - truth| / |truth|) with Euclidean norms."""
    e = np.asarray(estimates, dtype=float)
    t = np.asarray(truths, dtype=float)
    if e.shape != t.shape:
        raise InvalidInputError("estimates and truths differ in length")
    denom = math.sqrt(float(np.sum(t * t)))
    if denom == 0:
        raise UndefinedMetricError("correction factor is undefined for an all-zero truth series")
    return (1.0 - math.sqrt(float(np.sum((e - t) ** 2))) / denom) * 100.0


@dataclass(frozen=True, eq=False)
class CorrectionReport:
    timestamp: np.ndarray
    measured_nacelle: np.ndarray
    real_wind_direction: np.ndarray  # NaN when the static offset is unknown
    theta_ye_true: np.ndarray  # NaN when the static offset is unknown
    static_hat: float
    theta_ye_hat: dict = field(default_factory=dict)  # model -> estimates
    corrected_nacelle: dict = field(default_factory=dict)
    residual_error: dict = field(default_factory=dict)
    cf_ye: dict = field(default_factory=dict)  # empty without ground truth
    wait: int = 0
    deadband: float = 0.0

    @property
    def models(self) -> tuple[str, ...]:
        return tuple(self.theta_ye_hat)

    @property
    def has_truth(self) -> bool:
        return bool(self.theta_ye_true.size) and not np.isnan(self.theta_ye_true).any()

    def summary(self) -> dict:
        return {
            "n": int(self.timestamp.size),
            "static_hat": self.static_hat,
            "wait_minutes": self.wait,
            "deadband": self.deadband,
            "cf_ye": {k: self.cf_ye[k] for k in self.models if k in self.cf_ye},
        }

    def to_csv(self) -> str:
        header = ["timestamp", "real_wind_direction", "measured_nacelle", "theta_ye_true"]
        for k in self.models:
            header += [f"theta_ye_hat_{k}", f"corrected_nacelle_{k}", f"residual_error_{k}"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for i in range(self.timestamp.size):
            row = [str(int(self.timestamp[i])), repr(float(self.real_wind_direction[i])),
                   repr(float(self.measured_nacelle[i])), repr(float(self.theta_ye_true[i]))]
            for k in self.models:
                row += [repr(float(self.theta_ye_hat[k][i])), repr(float(self.corrected_nacelle[k][i])),
                        repr(float(self.residual_error[k][i]))]
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


Predictor = ForecastModel | Callable[[FeatureSet], np.ndarray]


def _with_estimates(base: CorrectionReport, estimates: dict) -> CorrectionReport:
    corrected, residual, cf = {}, {}, {}
    for k, est in estimates.items():
        corrected[k] = wrap_360(base.measured_nacelle + est)
        residual[k] = wrap_angle(base.real_wind_direction - corrected[k]) if base.has_truth \
            else np.full(est.size, np.nan)
        if base.has_truth:
            cf[k] = correction_factor(est, base.theta_ye_true)
    return replace(base, theta_ye_hat=dict(estimates), corrected_nacelle=corrected, residual_error=residual, cf_ye=cf)


def apply_correction(
    tel: Telemetry,
    static_hat: float,
    models: Mapping[str, Predictor],
    theta_s_true: float | None = None,
    features: FeatureSet | None = None,
) -> CorrectionReport:
    """Corrected nacelle direction theta_ND + theta_d_hat + theta_s_hat at every t+1.

    ``models`` maps a label to a ForecastModel or to a callable taking the
    FeatureSet. With ``theta_s_true`` the true misalignment theta_s + theta_d
    is known and CF_ye is computed; without it only corrections are emitted.
    """
    if not math.isfinite(static_hat):
        raise InvalidInputError("static_hat must be finite")
    fs = build_features(tel) if features is None else features
    if len(fs) == 0:
        raise InsufficientDataError("no valid feature windows to correct")
    rows = fs.target_index
    nacelle = tel.nacelle_direction[rows]
    if theta_s_true is None:
        real = np.full(rows.size, np.nan)
        truth = np.full(rows.size, np.nan)
    else:
        real = wrap_360(tel.wind_direction[rows] + theta_s_true)
        truth = total_yaw(theta_s_true, tel.dynamic_yaw[rows])
    base = CorrectionReport(fs.target_timestamp.copy(), nacelle, real, truth, float(static_hat))
    estimates = {}
    for name, m in models.items():
        d_hat = predict(m, fs) if isinstance(m, ForecastModel) else np.asarray(m(fs), dtype=float)
        estimates[name] = total_yaw(static_hat, d_hat)
    return _with_estimates(base, estimates)


def hold_corrections(values, timestamp, deadband: float, wait: int, step: int = 60) -> np.ndarray:
    """Controller-applied correction under a deadband and wait time.

    A change of at least ``deadband`` from the applied value is taken at once;
    a smaller change is taken only after a pending change has persisted for
    ``wait`` minutes. Each gap in ``timestamp`` starts a fresh run.
    """
    v = np.asarray(values, dtype=float)
    out = v.copy()
    if wait <= 0 or deadband <= 0 or v.size == 0:
        return out
    pending = 0
    for i in range(1, v.size):
        if timestamp[i] - timestamp[i - 1] != step:
            pending = 0
            continue
        change = abs(wrap_angle(v[i] - out[i - 1]))
        if change >= deadband:
            pending = 0
        elif change > 0 and pending + 1 <= wait:
            pending += 1
            out[i] = out[i - 1]
        else:
            pending = 0
    return out


def wait_time_overlay(report: CorrectionReport, deadband: float = 6.0, wait: int = 1) -> CorrectionReport:
    """Re-score a report as if the yaw controller enforced deadband and wait time."""
    if deadband < 0 or wait < 0:
        raise InvalidInputError("deadband and wait must be >= 0")
    if wait == 0 or deadband == 0:
        return replace(report, wait=int(wait), deadband=float(deadband))
    held = {k: hold_corrections(v, report.timestamp, deadband, wait) for k, v in report.theta_ye_hat.items()}
    out = _with_estimates(report, held)
    return replace(out, wait=int(wait), deadband=float(deadband))
