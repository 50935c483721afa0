"""Synthetic 1-min SCADA with known cosine exponent, static offset and dynamic yaw.

Wind speed, wind direction and air density follow AR(1) processes. A
nacelle controller with deadband, wait time and finite yaw rate tracks the
*measured* wind direction, which reads ``theta_s`` low because of the vane
offset. Power follows ``P0(V) * rho/rho* * cos(theta_s + theta_d) ** alpha``
with multiplicative noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .preprocess import CleaningParams, clean
from .scada import STANDARD_DENSITY, Telemetry, TurbineConfig, wrap_360, wrap_angle

BENCHMARK_CASES = (
    ("01", 5.0, "Modeling"),
    ("02", 10.0, "Modeling"),
    ("03", -8.0, "Modeling"),
    ("04", -10.0, "Modeling"),
    ("05", 8.0, "Transferability"),
    ("06", -6.0, "Transferability"),
)
CLEANED_MINUTES = 4500
START_TIME = 1_500_000_000


@dataclass(frozen=True)
class AR1:
    mean: float
    persistence: float
    noise_std: float

    def __post_init__(self):
        if not 0.0 <= self.persistence < 1.0:
            raise InvalidInputError("AR(1) persistence must be in [0, 1)")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be >= 0")

    @property
    def stationary_std(self) -> float:
        return self.noise_std / math.sqrt(1.0 - self.persistence**2)

    def simulate(self, n: int, rng: np.random.Generator) -> np.ndarray:
        e = rng.standard_normal(n)
        x = np.empty(n)
        prev = self.mean + self.stationary_std * e[0]
        x[0] = prev
        for i in range(1, n):
            prev = self.mean + self.persistence * (prev - self.mean) + self.noise_std * e[i]
            x[i] = prev
        return x


@dataclass(frozen=True)
class NacelleController:
    deadband: float = 6.0  # degrees
    wait: int = 1  # minutes the error must persist beyond the first
    yaw_rate: float = 0.5  # deg/s; math.inf for instantaneous


@dataclass(frozen=True)
class SynthConfig:
    alpha_true: float = 3.0
    theta_s_true: float = 0.0
    duration: int = 6000  # minutes
    wind: AR1 = field(default_factory=lambda: AR1(7.5, 0.97, 0.45))
    direction: AR1 = field(default_factory=lambda: AR1(180.0, 0.97, 1.5))
    # minute-scale turbulent direction fluctuation the controller cannot follow
    direction_fast_std: float = 2.5
    nacelle: NacelleController = field(default_factory=NacelleController)
    power_noise: float = 0.02  # fraction, truncated at +-3 sigma
    # exponent offsets reached at the outer ends of the transition regions
    # (cut-in side, rated side); zero keeps a pure cosine law everywhere
    transition_alpha: tuple[float, float] = (0.0, 0.0)
    density: AR1 = field(default_factory=lambda: AR1(1.2, 0.99, 0.003))
    fault_rate: float = 0.0  # episode starts per minute
    curtailment_rate: float = 0.0
    episode_minutes: tuple[int, int] = (3, 30)
    seed: int = 0
    start_time: int = START_TIME

    def __post_init__(self):
        if self.duration < 10:
            raise InvalidInputError("duration must be >= 10 minutes")
        if not 0 < self.alpha_true <= 6:
            raise InvalidInputError("alpha_true must be in (0, 6]")
        if self.power_noise < 0:
            raise InvalidInputError("power_noise must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["episode_minutes"] = list(self.episode_minutes)
        d["transition_alpha"] = list(self.transition_alpha)
        if math.isinf(self.nacelle.yaw_rate):
            d["nacelle"]["yaw_rate"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d) -> "SynthConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown synth keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("wind", "direction", "density"):
            if key in kw:
                kw[key] = AR1(**kw[key])
        if "nacelle" in kw:
            nd = dict(kw["nacelle"])
            if nd.get("yaw_rate") == "inf":
                nd["yaw_rate"] = math.inf
            kw["nacelle"] = NacelleController(**nd)
        for key in ("episode_minutes", "transition_alpha"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


CENTRAL_REGION = (6.9, 9.2)


def effective_alpha(v, cfg: SynthConfig, turbine: TurbineConfig | None = None):
    """Cosine exponent per sample: ``alpha_true`` in central Region II, ramping
    linearly by ``transition_alpha`` towards cut-in and towards the Region II end."""
    turbine = turbine or TurbineConfig()
    v = np.asarray(v, dtype=float)
    lo_gap, hi_gap = cfg.transition_alpha
    c_lo, c_hi = CENTRAL_REGION
    r_lo, r_hi = turbine.region2_range
    down = np.clip((c_lo - v) / (c_lo - r_lo), 0.0, 1.0)
    up = np.clip((v - c_hi) / (r_hi - c_hi), 0.0, 1.0)
    return cfg.alpha_true + lo_gap * down + hi_gap * up


def analytic_reference_power(v, turbine: TurbineConfig | None = None):
    """Cubic below rated speed, flat at rated power up to cut-out, zero elsewhere."""
    turbine = turbine or TurbineConfig()
    v = np.asarray(v, dtype=float)
    k = turbine.rated_power / turbine.rated_speed**3
    p = np.where(v < turbine.cut_in_speed, 0.0, k * v**3)
    p = np.where(v > turbine.rated_speed, turbine.rated_power, p)
    return np.where(v > turbine.cut_out_speed, 0.0, p)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    timestamp: np.ndarray
    theta_s: float
    theta_d: np.ndarray
    theta_ye: np.ndarray
    injected_fault: np.ndarray
    injected_curtailment: np.ndarray

    def select(self, mask) -> "GroundTruth":
        return GroundTruth(self.timestamp[mask], self.theta_s, self.theta_d[mask], self.theta_ye[mask],
                           self.injected_fault[mask], self.injected_curtailment[mask])

    def lookup(self, timestamps) -> "GroundTruth":
        idx = np.searchsorted(self.timestamp, timestamps)
        if np.any(idx >= self.timestamp.size) or np.any(self.timestamp[np.minimum(idx, self.timestamp.size - 1)] != timestamps):
            raise InvalidInputError("timestamps not covered by ground truth")
        return self.select(idx)


@dataclass(frozen=True, eq=False)
class SynthResult:
    telemetry: Telemetry
    truth: GroundTruth
    config: SynthConfig


def _episodes(n: int, rate: float, lengths: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if rate <= 0:
        return mask
    starts = np.flatnonzero(rng.random(n) < rate)
    durations = rng.integers(lengths[0], lengths[1] + 1, size=starts.size)
    for s, d in zip(starts, durations):
        mask[s:s + d] = True
    return mask


def _track(measured: np.ndarray, ctl: NacelleController) -> np.ndarray:
    """Minute-average nacelle direction under deadband/wait/rate control."""
    n = measured.size
    avg = np.empty(n)
    position = measured[0]
    pending = 0
    max_step = ctl.yaw_rate * 60.0
    for t in range(n):
        err = wrap_angle(measured[t] - position)
        move = 0.0
        if abs(err) > ctl.deadband:
            pending += 1
            if pending > ctl.wait:
                move = max(-max_step, min(max_step, err))
                pending = 0
        else:
            pending = 0
        if move != 0.0:
            # linear ramp from the start of the minute; instantaneous at infinite rate
            ramp = abs(move) / ctl.yaw_rate if math.isfinite(ctl.yaw_rate) else 0.0
            frac = 1.0 - ramp / 120.0
            avg[t] = position + frac * move
            position = position + move
        else:
            avg[t] = position
    return avg


def generate(
    cfg: SynthConfig,
    curve: Callable | None = None,
    turbine: TurbineConfig | None = None,
) -> SynthResult:
    """Simulate ``cfg.duration`` one-minute SCADA records. Deterministic per seed."""
    turbine = turbine or TurbineConfig()
    p0_fn = curve if curve is not None else (lambda v: analytic_reference_power(v, turbine))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.duration

    speed = np.maximum(cfg.wind.simulate(n, rng), 0.0)
    true_dir = cfg.direction.simulate(n, rng) + cfg.direction_fast_std * rng.standard_normal(n)
    rho = cfg.density.simulate(n, rng)
    noise = np.clip(rng.standard_normal(n), -3.0, 3.0) * cfg.power_noise
    pitch_jitter = np.abs(rng.standard_normal(n)) * 0.1
    temp_noise = rng.standard_normal(n) * 0.3
    fault = _episodes(n, cfg.fault_rate, cfg.episode_minutes, rng)
    curtail = _episodes(n, cfg.curtailment_rate, cfg.episode_minutes, rng)
    limit_frac = rng.uniform(0.5, 0.9, size=n)
    pinned = rng.uniform(-0.05, 0.05, size=n)

    measured_dir = true_dir - cfg.theta_s_true
    nacelle = _track(measured_dir, cfg.nacelle)
    theta_d = wrap_angle(measured_dir - nacelle)
    theta_ye = wrap_angle(cfg.theta_s_true + theta_d)

    cos_ye = np.cos(np.deg2rad(theta_ye))
    alpha = cfg.alpha_true if cfg.transition_alpha == (0.0, 0.0) else effective_alpha(speed, cfg, turbine)
    available = p0_fn(speed) * rho / STANDARD_DENSITY * np.where(cos_ye > 0, np.abs(cos_ye) ** alpha, 0.0)
    power = np.minimum(available, turbine.rated_power) * (1.0 + noise)
    power_limit = np.full(n, turbine.rated_power)
    # curtailment pins output to a lowered limit
    power_limit = np.where(curtail, np.maximum(available * limit_frac, 50.0), power_limit)
    power = np.where(curtail, power_limit * (1.0 + pinned), power)
    power = np.where(fault, 0.0, power)

    pitch = np.where(speed <= turbine.rated_speed, 0.3 + pitch_jitter,
                     2.0 + 2.0 * (speed - turbine.rated_speed) + pitch_jitter)
    minutes = np.arange(n)
    temperature = 25.0 + 8.0 * np.sin(2 * np.pi * minutes / 1440.0) + temp_noise
    timestamps = cfg.start_time + 60 * minutes

    tel = Telemetry(
        timestamp=timestamps,
        wind_speed=speed,
        wind_direction=wrap_360(measured_dir),
        nacelle_direction=wrap_360(nacelle),
        power=power,
        power_limit=power_limit,
        pitch_angle=pitch,
        air_density=rho,
        fault_code=fault.astype(np.int64),
        extras={"nacelle_temperature": temperature},
    )
    truth = GroundTruth(timestamps, float(cfg.theta_s_true), theta_d, theta_ye, fault, curtail & ~fault)
    return SynthResult(tel, truth, cfg)


@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    case_id: str
    theta_s: float
    purpose: str
    raw: SynthResult  # full run; cleaned is clean(raw) cut to its first n_clean records
    cleaned: Telemetry

    @property
    def truth(self) -> GroundTruth:
        return self.raw.truth.lookup(self.cleaned.timestamp)


def cleaned_case(
    cfg: SynthConfig,
    n_clean: int = CLEANED_MINUTES,
    turbine: TurbineConfig | None = None,
    params: CleaningParams | None = None,
    curve: Callable | None = None,
) -> tuple[SynthResult, Telemetry]:
    """Generate until cleaning leaves ``n_clean`` minutes; keep the first ``n_clean``."""
    turbine = turbine or TurbineConfig()
    duration = max(cfg.duration, int(n_clean * 1.5))
    while True:
        res = generate(replace(cfg, duration=duration), curve, turbine)
        cleaned = clean(res.telemetry, turbine, params).telemetry
        if len(cleaned) >= n_clean:
            break
        duration *= 2
    return res, cleaned.select(np.arange(n_clean))


def standard_benchmark(
    seed: int = 0,
    base: SynthConfig | None = None,
    n_clean: int = CLEANED_MINUTES,
    turbine: TurbineConfig | None = None,
) -> list[BenchmarkCase]:
    """Six cases mirroring the benchmarking campaign: four modeling, two transfer."""
    base = base or SynthConfig()
    cases = []
    for i, (case_id, theta_s, purpose) in enumerate(BENCHMARK_CASES):
        cfg = replace(base, theta_s_true=theta_s, seed=seed * 1000 + i + 1,
                      start_time=base.start_time + i * 10_000_000)
        raw, cleaned = cleaned_case(cfg, n_clean, turbine)
        cases.append(BenchmarkCase(case_id, theta_s, purpose, raw, cleaned))
    return cases


def baseline_dataset(seed: int = 0, base: SynthConfig | None = None, n_clean: int = CLEANED_MINUTES,
                     turbine: TurbineConfig | None = None) -> tuple[SynthResult, Telemetry]:
    """Zero-offset normal-operation run used to fit the baseline power curve."""
    base = base or SynthConfig()
    cfg = replace(base, theta_s_true=0.0, seed=seed * 1000, start_time=base.start_time - 10_000_000)
    return cleaned_case(cfg, n_clean, turbine)


def format_truth_csv(truth: GroundTruth) -> str:
    lines = ["timestamp,theta_s,theta_d,theta_ye,injected_fault,injected_curtailment\n"]
    for i in range(truth.timestamp.size):
        lines.append(f"{int(truth.timestamp[i])},{truth.theta_s!r},{float(truth.theta_d[i])!r},"
                     f"{float(truth.theta_ye[i])!r},{int(truth.injected_fault[i])},"
                     f"{int(truth.injected_curtailment[i])}\n")
    return "".join(lines)


def write_truth_csv(path, truth: GroundTruth) -> None:
    Path(path).write_text(format_truth_csv(truth), encoding="utf-8")


def read_truth_csv(path) -> GroundTruth:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    data = np.atleast_1d(data)
    theta_s = float(data["theta_s"][0]) if data.size else 0.0
    return GroundTruth(
        data["timestamp"].astype(np.int64), theta_s,
        data["theta_d"].astype(float), data["theta_ye"].astype(float),
        data["injected_fault"].astype(bool), data["injected_curtailment"].astype(bool),
    )


def save_config(path, cfg: SynthConfig) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
