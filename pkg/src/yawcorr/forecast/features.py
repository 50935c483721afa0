"""Lagged feature windows for one-step-ahead dynamic yaw forecasting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..scada import Telemetry

N_LAGS = 5  # theta_d(t) .. theta_d(t-4)
PM10_SPAN = 10
FEATURE_NAMES = (
    "theta_d_t",
    "theta_d_t-1",
    "theta_d_t-2",
    "theta_d_t-3",
    "theta_d_t-4",
    "power",
    "wind_direction",
    "wind_speed",
)
MAX_ABS_THETA_D = 90.0


@dataclass(frozen=True, eq=False)
class FeatureSet:
    X: np.ndarray  # (m, 8), columns as FEATURE_NAMES
    y: np.ndarray  # theta_d(t + 1)
    timestamp: np.ndarray  # t
    target_timestamp: np.ndarray  # t + step
    target_index: np.ndarray  # row of the target minute in the source telemetry
    history: np.ndarray  # (m, 10) theta_d(t-1) .. theta_d(t-10), NaN where the run is shorter
    step: int = 60

    def __len__(self):
        return self.y.size

    def select(self, idx) -> "FeatureSet":
        return FeatureSet(self.X[idx], self.y[idx], self.timestamp[idx], self.target_timestamp[idx],
                          self.target_index[idx], self.history[idx], self.step)

    @property
    def short_history(self) -> np.ndarray:
        """Rows whose PM10 window has fewer than 10 minutes available."""
        return np.isnan(self.history).any(axis=1)

    @classmethod
    def concat(cls, parts) -> "FeatureSet":
        parts = list(parts)
        if not parts:
            return empty_features()
        steps = {p.step for p in parts}
        if len(steps) != 1:
            raise InvalidInputError("feature sets use different time steps")
        return cls(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.timestamp for p in parts]),
            np.concatenate([p.target_timestamp for p in parts]),
            np.concatenate([p.target_index for p in parts]),
            np.concatenate([p.history for p in parts]),
            parts[0].step,
        )


def empty_features(step: int = 60) -> FeatureSet:
    return FeatureSet(np.empty((0, len(FEATURE_NAMES))), np.empty(0), np.empty(0, dtype=np.int64),
                      np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                      np.empty((0, PM10_SPAN)), step)


def run_position(timestamp, step: int = 60) -> np.ndarray:
    """Number of consecutive predecessors of each row (0 at the start of a run)."""
    t = np.asarray(timestamp)
    pos = np.zeros(t.size, dtype=np.int64)
    for i in range(1, t.size):
        if t[i] - t[i - 1] == step:
            pos[i] = pos[i - 1] + 1
    return pos


def build_features(tel: Telemetry, step: int = 60) -> FeatureSet:
    """One sample per minute t with 5 consecutive lags and a consecutive t+1 target.

    Gaps break the lag chain; minutes with |theta_d| > 90 deg count as gaps.
    """
    n = len(tel)
    if n == 0:
        return empty_features(step)
    theta_d = tel.dynamic_yaw
    valid = np.abs(theta_d) <= MAX_ABS_THETA_D
    t = tel.timestamp
    # break chains at invalid minutes by giving them a position that cannot be reached
    pos = np.zeros(n, dtype=np.int64)
    for i in range(n):
        if not valid[i]:
            pos[i] = -1
        elif i > 0 and pos[i - 1] >= 0 and t[i] - t[i - 1] == step:
            pos[i] = pos[i - 1] + 1
    # target at i+1 must directly follow a window ending at i
    rows = np.flatnonzero((pos[:-1] >= N_LAGS - 1) & (pos[1:] >= 1) & (pos[1:] == pos[:-1] + 1))
    if rows.size == 0:
        return empty_features(step)
    lags = np.column_stack([theta_d[rows - k] for k in range(N_LAGS)])
    X = np.column_stack([lags, tel.power[rows], tel.wind_direction[rows], tel.wind_speed[rows]])
    history = np.full((rows.size, PM10_SPAN), np.nan)
    for k in range(1, PM10_SPAN + 1):
        ok = pos[rows] >= k
        history[ok, k - 1] = theta_d[rows[ok] - k]
    return FeatureSet(X, theta_d[rows + 1], t[rows].astype(np.int64), t[rows + 1].astype(np.int64),
                      rows + 1, history, step)


def chronological_split(fs: FeatureSet, ratio: float = 0.8) -> tuple[FeatureSet, FeatureSet]:
    """First ``ratio`` of samples train; later samples test.

    Test samples whose lag window reaches back to a training target minute are
    dropped, so no test input was ever a training label.
    """
    if not 0 < ratio < 1:
        raise InvalidInputError("split ratio must be in (0, 1)")
    m = len(fs)
    n_train = int(np.floor(ratio * m))
    train = fs.select(np.arange(n_train))
    rest = np.arange(n_train, m)
    if n_train and rest.size:
        last_target = train.target_timestamp.max()
        window_start = fs.timestamp[rest] - (N_LAGS - 1) * fs.step
        rest = rest[window_start > last_target]
    return train, fs.select(rest)


def leak_free(train: FeatureSet, test: FeatureSet) -> bool:
    """True if every test sample's lag window lies strictly after all training targets
    and every training timestamp precedes every test timestamp."""
    if len(train) == 0 or len(test) == 0:
        return True
    window_start = test.timestamp - (N_LAGS - 1) * test.step
    return bool(window_start.min() > train.target_timestamp.max() and train.timestamp.max() < test.timestamp.min())
