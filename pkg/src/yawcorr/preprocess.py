"""Data-clean pipeline: averaging, fault/curtailment/IQR/Region-II filters, smoothing.

Every filter returns a row subset of its input. :func:`clean` chains them in
the fixed order fault -> curtailment -> IQR -> region and keeps an audit
trail in a :class:`CleaningReport`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, OrderingError
from .scada import DIRECTION_FIELDS, FIELDS, Telemetry, TurbineConfig, wrap_360, wrap_angle

DEFAULT_IQR_CHANNELS = ("power_residual", "dynamic_yaw")


@dataclass(frozen=True)
class CleaningReport:
    input_count: int
    removed_fault: int
    removed_curtailment: int
    removed_iqr: int
    removed_region: int
    output_count: int

    def __post_init__(self):
        removed = self.removed_fault + self.removed_curtailment + self.removed_iqr + self.removed_region
        if self.output_count != self.input_count - removed:
            raise InvalidInputError("cleaning counts do not reconcile")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CleaningParams:
    curtailment_threshold: float = 0.10
    max_pitch: float = 2.0
    iqr_multiplier: float = 1.5
    iqr_channels: tuple[str, ...] = DEFAULT_IQR_CHANNELS
    residual_bin_width: float = 0.5
    residual_kind: str = "relative"

    @classmethod
    def from_dict(cls, d) -> "CleaningParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown cleaning keys: {sorted(unknown)}")
        kw = dict(d)
        if "iqr_channels" in kw:
            kw["iqr_channels"] = tuple(kw["iqr_channels"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class CleaningResult:
    telemetry: Telemetry
    report: CleaningReport
    # timestamps removed by each stage, in stage order
    removed: dict = field(default_factory=dict)


def _check_sorted(t: np.ndarray) -> None:
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise OrderingError("records are not time-sorted")


def circular_mean(degrees, axis=None):
    rad = np.deg2rad(degrees)
    return np.rad2deg(np.arctan2(np.mean(np.sin(rad), axis=axis), np.mean(np.cos(rad), axis=axis)))


def block_average(tel: Telemetry, window: int = 60) -> Telemetry:
    """Average fixed, epoch-aligned windows of ``window`` seconds.

    Direction channels use the circular mean, the fault code the window
    maximum. Output timestamps are window starts; empty windows are absent.
    """
    if window <= 0:
        raise InvalidInputError("window must be positive")
    _check_sorted(tel.timestamp)
    if len(tel) == 0:
        return tel
    keys = tel.timestamp // int(window)
    uniq, inverse = np.unique(keys, return_inverse=True)
    counts = np.bincount(inverse).astype(float)
    first = np.searchsorted(keys, uniq)

    def mean(x):
        # shifted by each window's first value so constant windows come back exact
        base = x[first]
        return base + np.bincount(inverse, weights=x - base[inverse]) / counts

    out = {"timestamp": uniq * int(window)}
    for name in FIELDS:
        if name in ("timestamp", "fault_code"):
            continue
        x = getattr(tel, name)
        if name in DIRECTION_FIELDS:
            rad = np.deg2rad(x)
            ang = np.rad2deg(np.arctan2(mean(np.sin(rad)), mean(np.cos(rad))))
            out[name] = wrap_360(ang)
        else:
            out[name] = mean(x)
    fault = np.zeros(uniq.size, dtype=np.int64)
    np.maximum.at(fault, inverse, tel.fault_code)
    out["fault_code"] = fault
    out["extras"] = {k: mean(v) for k, v in tel.extras.items()}
    return Telemetry(**out)


# --- keep masks ----------------------------------------------------------------

def fault_mask(tel: Telemetry) -> np.ndarray:
    return tel.fault_code == 0


def curtailment_mask(tel: Telemetry, threshold: float = 0.10) -> np.ndarray:
    if np.any(tel.power_limit <= 0):
        bad = int(np.argmax(tel.power_limit <= 0))
        raise InvalidInputError(f"record {bad}: power_limit must be positive")
    ratio = np.abs(tel.power - tel.power_limit) / tel.power_limit
    return ratio >= threshold


def binned_power_residual(tel: Telemetry, bin_width: float = 0.5, kind: str = "relative") -> np.ndarray:
    """Power residual against the mean power of its wind-speed bin.

    ``kind="relative"`` divides by the bin mean (zero where the mean is not
    positive), so one pair of fences suits every bin; ``"absolute"`` is the
    plain difference.
    """
    if kind not in ("relative", "absolute"):
        raise InvalidInputError(f"unknown residual kind {kind!r}")
    if len(tel) == 0:
        return np.empty(0)
    b = np.floor(tel.wind_speed / bin_width).astype(np.int64)
    uniq, inv = np.unique(b, return_inverse=True)
    means = (np.bincount(inv, weights=tel.power) / np.bincount(inv))[inv]
    if kind == "absolute":
        return tel.power - means
    pos = means > 0
    return np.where(pos, tel.power / np.where(pos, means, 1.0) - 1.0, 0.0)


def iqr_mask(
    tel: Telemetry,
    channels=DEFAULT_IQR_CHANNELS,
    multiplier: float = 1.5,
    residual_bin_width: float = 0.5,
    residual_kind: str = "relative",
) -> np.ndarray:
    if len(tel) < 4:
        raise InsufficientDataError(f"IQR filter needs >= 4 records, got {len(tel)}")
    keep = np.ones(len(tel), dtype=bool)
    for name in channels:
        if name == "power_residual":
            x = binned_power_residual(tel, residual_bin_width, residual_kind)
        else:
            x = tel.channel(name)
        q1, q3 = np.percentile(x, [25.0, 75.0])
        spread = multiplier * (q3 - q1)
        keep &= (x >= q1 - spread) & (x <= q3 + spread)
    return keep


def region2_mask(tel: Telemetry, cfg: TurbineConfig, max_pitch: float = 2.0) -> np.ndarray:
    lo, hi = cfg.region2_range
    v = tel.wind_speed
    return (v >= lo) & (v <= hi) & (tel.pitch_angle < max_pitch)


# --- filters -----------------------------------------------------------------------

def filter_fault(tel: Telemetry) -> Telemetry:
    return tel.select(fault_mask(tel))


def filter_curtailment(tel: Telemetry, threshold: float = 0.10) -> Telemetry:
    return tel.select(curtailment_mask(tel, threshold))


def filter_iqr(tel: Telemetry, channels=DEFAULT_IQR_CHANNELS, multiplier: float = 1.5) -> Telemetry:
    return tel.select(iqr_mask(tel, channels, multiplier))


def filter_region2(tel: Telemetry, cfg: TurbineConfig, max_pitch: float = 2.0) -> Telemetry:
    return tel.select(region2_mask(tel, cfg, max_pitch))


def clean(tel: Telemetry, cfg: TurbineConfig, params: CleaningParams | None = None) -> CleaningResult:
    """Run fault -> curtailment -> IQR -> Region-II filtering."""
    params = params or CleaningParams()
    n0 = len(tel)
    removed = {}

    def stage(name, current, keep):
        removed[name] = current.timestamp[~keep].copy()
        return current.select(keep)

    cur = stage("fault", tel, fault_mask(tel))
    cur = stage("curtailment", cur, curtailment_mask(cur, params.curtailment_threshold))
    if len(cur) >= 4:
        keep = iqr_mask(
            cur, params.iqr_channels, params.iqr_multiplier, params.residual_bin_width, params.residual_kind
        )
    else:
        keep = np.ones(len(cur), dtype=bool)
    cur = stage("iqr", cur, keep)
    cur = stage("region", cur, region2_mask(cur, cfg, params.max_pitch))
    report = CleaningReport(
        input_count=n0,
        removed_fault=removed["fault"].size,
        removed_curtailment=removed["curtailment"].size,
        removed_iqr=removed["iqr"].size,
        removed_region=removed["region"].size,
        output_count=len(cur),
    )
    return CleaningResult(cur, report, removed)


def moving_average(times, values, window: float, angular: bool = False) -> np.ndarray:
    """Centered moving mean over ``window`` seconds.

    The averaging interval around each sample is ``t +/- window/2``, shrunk
    symmetrically near either end so the output keeps the input length (the
    first and last samples are returned unchanged). With ``angular=True``
    values are degrees, averaged on the circle and returned in [-180, 180).
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.shape != x.shape:
        raise InvalidInputError("times and values differ in length")
    _check_sorted(t)
    if x.size == 0:
        return x.copy()
    half = np.minimum(window / 2.0, np.minimum(t - t[0], t[-1] - t))
    lo = np.searchsorted(t, t - half, side="left")
    hi = np.searchsorted(t, t + half, side="right")
    count = hi - lo

    def windowed_mean(v):
        c = np.concatenate(([0.0], np.cumsum(v)))
        return (c[hi] - c[lo]) / count

    if angular:
        rad = np.deg2rad(x)
        return wrap_angle(np.rad2deg(np.arctan2(windowed_mean(np.sin(rad)), windowed_mean(np.cos(rad)))))
    return windowed_mean(x)
