"""Power-curve fitting, density-corrected reference power and operating regions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FitError, InsufficientDataError, InvalidInputError, OutOfRangeError
from .scada import STANDARD_DENSITY, Telemetry, TurbineConfig


@dataclass(frozen=True, eq=False)
class PowerCurve:
    """Polynomial power curve at standard density.

    The polynomial is in the rescaled speed ``u = (2V - (lo + hi)) / (hi - lo)``
    so that ``fit_speed_range`` maps onto [-1, 1]; ``coefficients[i]``
    multiplies ``u**i``.
    """

    coefficients: tuple[float, ...]
    fit_speed_range: tuple[float, float]
    rated_power: float
    standard_density: float = STANDARD_DENSITY
    residual_rms: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def affine_map(self) -> tuple[float, float]:
        """(scale, offset) with u = scale * V + offset."""
        lo, hi = self.fit_speed_range
        return 2.0 / (hi - lo), -(hi + lo) / (hi - lo)

    def rescale(self, v):
        scale, offset = self.affine_map
        return scale * np.asarray(v, dtype=float) + offset

    def __call__(self, v):
        """Reference power at standard density."""
        v = np.asarray(v, dtype=float)
        lo, hi = self.fit_speed_range
        if np.any((v < lo) | (v > hi)) or not np.all(np.isfinite(v)):
            raise OutOfRangeError(f"wind speed outside fitted range [{lo}, {hi}] m/s")
        return np.polynomial.polynomial.polyval(self.rescale(v), self.coefficients)

    def to_dict(self) -> dict:
        scale, offset = self.affine_map
        return {
            "kind": "polynomial",
            "degree": self.degree,
            "coefficients": list(self.coefficients),
            "basis": "rescaled",
            "affine_map": {"scale": scale, "offset": offset},
            "fit_speed_range": list(self.fit_speed_range),
            "rated_power": self.rated_power,
            "standard_density": self.standard_density,
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_dict(cls, d) -> "PowerCurve":
        if d.get("kind", "polynomial") != "polynomial":
            raise InvalidInputError(f"unsupported curve kind {d.get('kind')!r}")
        return cls(
            coefficients=tuple(float(c) for c in d["coefficients"]),
            fit_speed_range=tuple(float(v) for v in d["fit_speed_range"]),
            rated_power=float(d["rated_power"]),
            standard_density=float(d.get("standard_density", STANDARD_DENSITY)),
            residual_rms=float(d.get("residual_rms", 0.0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PowerCurve":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_power_curve(
    tel: Telemetry,
    degree: int = 9,
    *,
    standard_density: float = STANDARD_DENSITY,
    rated_power: float | None = None,
    max_abs_dynamic_yaw: float | None = 3.0,
    speed_range: tuple[float, float] | None = None,
    yaw_exponent: float | None = None,
) -> PowerCurve:
    """Least-squares polynomial fit of density-normalized power against speed.

    Each power sample is scaled by ``standard_density / air_density`` before
    fitting. Samples with ``|dynamic yaw| >= max_abs_dynamic_yaw`` are left
    out (pass None to keep all). With ``yaw_exponent`` the power is also
    divided by ``cos(dynamic yaw) ** yaw_exponent``, which removes the
    dynamic-yaw loss from a zero-offset run. ``speed_range`` fixes the
    declared validity range; by default it is the span of the fitted speeds.
    """
    mask = np.ones(len(tel), dtype=bool)
    theta_d = tel.dynamic_yaw
    if max_abs_dynamic_yaw is not None:
        mask &= np.abs(theta_d) < max_abs_dynamic_yaw
    if speed_range is not None:
        mask &= (tel.wind_speed >= speed_range[0]) & (tel.wind_speed <= speed_range[1])
    if yaw_exponent is not None:
        mask &= np.abs(theta_d) < 90.0
    v = tel.wind_speed[mask]
    p = tel.power[mask] * standard_density / tel.air_density[mask]
    if yaw_exponent is not None:
        p = p / np.cos(np.deg2rad(theta_d[mask])) ** yaw_exponent
    if v.size == 0:
        raise InsufficientDataError("no samples left to fit the power curve")
    n_distinct = np.unique(v).size
    if n_distinct < degree + 1:
        raise FitError(
            f"ill-conditioned fit: {n_distinct} distinct speeds for degree {degree}",
            {"distinct_speeds": n_distinct, "degree": degree},
        )
    lo, hi = (float(v.min()), float(v.max())) if speed_range is None else map(float, speed_range)
    scale, offset = 2.0 / (hi - lo), -(hi + lo) / (hi - lo)
    u = scale * v + offset
    design = np.polynomial.polynomial.polyvander(u, degree)
    coef, _, rank, sv = np.linalg.lstsq(design, p, rcond=None)
    if rank < degree + 1 or sv[-1] / sv[0] < 1e-13:
        raise FitError("ill-conditioned fit: design matrix is rank deficient", {"rank": int(rank)})
    resid = p - design @ coef
    rated = float(np.max(p)) if rated_power is None else float(rated_power)
    curve = PowerCurve(
        coefficients=tuple(float(c) for c in coef),
        fit_speed_range=(lo, hi),
        rated_power=rated,
        standard_density=standard_density,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )
    ends = curve(np.array([lo, hi]))
    if np.any(ends < -1e-6 * max(rated, 1.0)) or np.any(ends > 1.1 * rated):
        raise FitError("fitted curve leaves [0, 1.1 * rated_power] at the range ends", {"ends": ends.tolist()})
    return curve


def reference_power(curve: PowerCurve, v, rho):
    """Zero-yaw reference power, scaled from standard to actual density."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise InvalidInputError("air density must be positive")
    out = curve(v) * rho / curve.standard_density
    return float(out) if out.ndim == 0 else out


REGIONS = ("I", "II", "III", "IV")


def classify_region(v: float, cfg: TurbineConfig) -> str:
    if v < cfg.cut_in_speed:
        return "I"
    if v <= cfg.rated_speed:
        return "II"
    if v <= cfg.cut_out_speed:
        return "III"
    return "IV"


@dataclass(frozen=True, eq=False)
class BinnedCurve:
    bin_edges: np.ndarray  # (n_bins, 2) lower/upper edge per reported bin
    bin_mean_speed: np.ndarray
    bin_mean_power: np.ndarray
    bin_count: np.ndarray

    def __len__(self):
        return self.bin_count.size


def bin_index(v, bin_width: float) -> np.ndarray:
    return np.floor(np.asarray(v, dtype=float) / bin_width).astype(np.int64)


def bin_average_curve(v, p, bin_width: float = 0.5) -> BinnedCurve:
    """Per-bin mean speed and power on a grid of width ``bin_width`` anchored at 0."""
    if bin_width <= 0:
        raise InvalidInputError("bin_width must be positive")
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    if v.size == 0:
        raise InsufficientDataError("no records to bin")
    idx = bin_index(v, bin_width)
    uniq, inv = np.unique(idx, return_inverse=True)
    count = np.bincount(inv)
    return BinnedCurve(
        bin_edges=np.column_stack([uniq * bin_width, (uniq + 1) * bin_width]),
        bin_mean_speed=np.bincount(inv, weights=v) / count,
        bin_mean_power=np.bincount(inv, weights=p) / count,
        bin_count=count,
    )
