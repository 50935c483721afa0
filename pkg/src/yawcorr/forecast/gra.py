"""Grey relational analysis for ranking candidate forecast inputs."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, InvalidInputError
from ..scada import Telemetry
from .features import FEATURE_NAMES, build_features

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GraResult:
    ranking: tuple[tuple[str, float], ...]  # (channel, grade), best first
    degenerate: tuple[str, ...] = ()

    def grade(self, name: str) -> float:
        return dict(self.ranking)[name]


def _minmax(x):
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x), True
    return (x - lo) / (hi - lo), False


def gra_rank(candidates: dict, target, resolution: float = 0.5) -> GraResult:
    """Deng grey relational grade of each candidate series against ``target``.

    All series are min-max normalized; Delta_min and Delta_max are taken over
    every candidate and time step.
    """
    if len(candidates) < 2:
        raise InvalidInputError("need at least two candidate channels")
    if not 0 < resolution <= 1:
        raise InvalidInputError("resolution must be in (0, 1]")
    y = np.asarray(target, dtype=float)
    if y.size < 10:
        raise InsufficientDataError("grey relational analysis needs series of length >= 10")
    y0, deg = _minmax(y)
    degenerate = ["target"] if deg else []
    names = list(candidates)
    deltas = []
    for name in names:
        x = np.asarray(candidates[name], dtype=float)
        if x.shape != y.shape:
            raise InvalidInputError(f"candidate {name!r} differs in length from the target")
        xn, deg = _minmax(x)
        if deg:
            log.warning("candidate %r is constant; grey relational grade uses a zero-range guard", name)
            degenerate.append(name)
        deltas.append(np.abs(xn - y0))
    D = np.vstack(deltas)
    dmin, dmax = D.min(), D.max()
    if dmax == 0:
        grades = np.ones(len(names))
    else:
        grades = ((dmin + resolution * dmax) / (D + resolution * dmax)).mean(axis=1)
    order = sorted(range(len(names)), key=lambda i: (-grades[i], i))
    return GraResult(tuple((names[i], float(grades[i])) for i in order), tuple(degenerate))


def candidate_series(tel: Telemetry, step: int = 60) -> tuple[dict, np.ndarray]:
    """Aligned candidate inputs at t (feature columns plus other channels) and theta_d(t+1)."""
    fs = build_features(tel, step)
    if len(fs) == 0:
        raise InsufficientDataError("no valid feature windows")
    cols = {name: fs.X[:, k] for k, name in enumerate(FEATURE_NAMES)}
    rows = fs.target_index - 1
    cols["nacelle_direction"] = tel.nacelle_direction[rows]
    cols["pitch_angle"] = tel.pitch_angle[rows]
    cols["air_density"] = tel.air_density[rows]
    for name, values in sorted(tel.extras.items()):
        cols[name] = np.asarray(values)[rows]
    return cols, fs.y
