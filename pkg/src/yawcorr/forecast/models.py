"""Forecast model container, prediction, scoring and serialization."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InsufficientDataError, InvalidInputError, ParseError, UndefinedMetricError
from .features import FEATURE_NAMES, FeatureSet, chronological_split
from .forest import MIN_SPLIT, N_TREES, ForestParams, train_forest
from .linear import LinearParams, train_linear
from .svr import BOX_C, EPSILON, SVRParams, train_svr

log = logging.getLogger(__name__)

FORMAT = "yawcorr-forecast-models"
VERSION = 1
TRAINED = ("linear", "svr", "forest")
KINDS = TRAINED + ("hybrid", "pm", "pm10", "zero")


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            raise InsufficientDataError("cannot fit a standardizer on zero rows")
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass(frozen=True)
class Hyper:
    l2: float = 1e-3
    epsilon: float = EPSILON
    box_c: float = BOX_C
    kernel_scale: float = 1.0
    n_trees: int = N_TREES
    min_node: int = MIN_SPLIT
    node_rule: str = "split"
    seed: int = 0

    @classmethod
    def from_dict(cls, d) -> "Hyper":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown forecast hyperparameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ForecastModel:
    kind: str
    standardizer: Standardizer | None = None
    params: object = None  # LinearParams / SVRParams / ForestParams
    members: tuple["ForecastModel", ...] = field(default=())  # hybrid only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown model kind {self.kind!r}")
        if self.kind == "hybrid" and sorted(m.kind for m in self.members) != sorted(TRAINED):
            raise InvalidInputError("hybrid needs exactly one linear, one svr and one forest member")
        if self.kind in TRAINED and (self.params is None or self.standardizer is None):
            raise InvalidInputError(f"{self.kind} model is missing trained parameters")


@dataclass(frozen=True)
class ForecastMetrics:
    mae: float
    rmse: float
    n: int


def score(predictions, truths) -> ForecastMetrics:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(truths, dtype=float)
    if p.shape != t.shape:
        raise InvalidInputError("predictions and truths differ in length")
    if p.size == 0:
        raise UndefinedMetricError("no samples to score")
    e = p - t
    mae = float(np.mean(np.abs(e)))
    rmse = float(np.sqrt(np.mean(e * e)))
    # rounding can put mae a hair above rmse when all |e| are equal
    return ForecastMetrics(min(mae, rmse), rmse, int(p.size))


def train_model(kind: str, train: FeatureSet, hyper: Hyper | None = None) -> ForecastModel:
    hyper = hyper or Hyper()
    if kind in ("pm", "pm10", "zero"):
        return ForecastModel(kind)
    if kind == "hybrid":
        return make_hybrid(*(train_model(k, train, hyper) for k in TRAINED))
    if kind not in TRAINED:
        raise InvalidInputError(f"unknown model kind {kind!r}")
    if len(train) < 2:
        raise InsufficientDataError("need >= 2 training samples")
    st = Standardizer.fit(train.X)
    Z = st.apply(train.X)
    if kind == "linear":
        params = train_linear(Z, train.y, hyper.l2)
    elif kind == "svr":
        params = train_svr(Z, train.y, hyper.epsilon, hyper.box_c, scale=hyper.kernel_scale)
    else:
        params = train_forest(Z, train.y, hyper.n_trees, hyper.min_node, hyper.seed, node_rule=hyper.node_rule)
    return ForecastModel(kind, st, params)


def make_hybrid(*members: ForecastModel) -> ForecastModel:
    return ForecastModel("hybrid", members=tuple(members))


def train_all(train: FeatureSet, hyper: Hyper | None = None) -> dict[str, ForecastModel]:
    """Every model kind, with the hybrid sharing the three trained members."""
    base = {k: train_model(k, train, hyper) for k in TRAINED}
    models = dict(base)
    models["hybrid"] = make_hybrid(*(base[k] for k in TRAINED))
    for k in ("pm", "pm10"):
        models[k] = ForecastModel(k)
    return models


def predict(model: ForecastModel, fs: FeatureSet) -> np.ndarray:
    """theta_d(t+1) forecasts in degrees for every sample of ``fs``."""
    if model.kind == "pm":
        return fs.X[:, 0].copy()
    if model.kind == "zero":
        return np.zeros(len(fs))
    if model.kind == "pm10":
        short = int(fs.short_history.sum())
        if short:
            log.info("pm10: %d samples have fewer than 10 past minutes; averaging what is available", short)
        return np.nanmean(fs.history, axis=1) if len(fs) else np.empty(0)
    if model.kind == "hybrid":
        preds = [predict(m, fs) for m in model.members]
        return (preds[0] + preds[1] + preds[2]) / 3.0
    if len(fs) == 0:
        return np.empty(0)
    return model.params.predict(model.standardizer.apply(fs.X))


# --- serialization -------------------------------------------------------------------

_PARAM_TYPES = {"linear": LinearParams, "svr": SVRParams, "forest": ForestParams}


def model_to_dict(model: ForecastModel) -> dict:
    d = {"kind": model.kind}
    if model.kind in TRAINED:
        d["normalization"] = model.standardizer.to_dict()
        d["parameters"] = model.params.to_dict()
    elif model.kind == "hybrid":
        d["members"] = [m.kind for m in model.members]
    return d


def models_to_json(models: dict[str, ForecastModel]) -> str:
    """Versioned JSON container; hybrids refer to their members by kind."""
    payload = {"format": FORMAT, "version": VERSION, "features": list(FEATURE_NAMES),
               "models": {name: model_to_dict(m) for name, m in models.items()}}
    for name, m in models.items():
        if m.kind == "hybrid":
            for member in m.members:
                if models.get(member.kind) is not member:
                    payload["models"][name]["inline"] = [model_to_dict(x) for x in m.members]
                    break
    return json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n"


def save_models(path, models: dict[str, ForecastModel]) -> None:
    Path(path).write_text(models_to_json(models))


def load_models(path) -> dict[str, ForecastModel]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc.msg})", row=exc.lineno) from exc
    if payload.get("format") != FORMAT:
        raise ParseError(f"{path}: not a forecast model file")
    if payload.get("version") != VERSION:
        raise ParseError(f"{path}: unsupported model file version {payload.get('version')!r}")
    raw = payload["models"]

    def build(d):
        kind = d["kind"]
        if kind in TRAINED:
            return ForecastModel(kind, Standardizer.from_dict(d["normalization"]),
                                 _PARAM_TYPES[kind].from_dict(d["parameters"]))
        return ForecastModel(kind)

    models = {name: build(d) for name, d in raw.items() if d["kind"] != "hybrid"}
    for name, d in raw.items():
        if d["kind"] == "hybrid":
            members = [build(x) for x in d["inline"]] if "inline" in d else [models[k] for k in d["members"]]
            models[name] = make_hybrid(*members)
    return models


# --- hyperparameter search -------------------------------------------------------------

GRID_KEYS = {"linear": ("l2",), "svr": ("epsilon", "box_c", "kernel_scale"),
             "forest": ("n_trees", "min_node", "node_rule")}


def grid_search(kind: str, train: FeatureSet, grid: dict, *, fraction: float = 0.1,
                base: Hyper | None = None) -> tuple[Hyper, list[dict]]:
    """Trial-and-error sweep on the first ``fraction`` of the training samples.

    That slice is split chronologically 80/20; the combination with the
    lowest validation MAE wins (ties go to the first in grid order).
    """
    if kind not in TRAINED:
        raise InvalidInputError(f"grid search applies to {TRAINED}, not {kind!r}")
    unknown = set(grid) - set(GRID_KEYS[kind])
    if unknown:
        raise InvalidInputError(f"grid keys {sorted(unknown)} do not apply to {kind}")
    base = base or Hyper()
    head = train.select(np.arange(int(math.floor(fraction * len(train)))))
    fit, val = chronological_split(head, 0.8)
    if len(fit) < 2 or len(val) < 1:
        raise InsufficientDataError("too few samples in the grid-search slice")
    keys = sorted(grid)
    rows, best, best_mae = [], None, math.inf
    for combo in itertools.product(*(grid[k] for k in keys)):
        hyper = Hyper(**{**base.__dict__, **dict(zip(keys, combo))})
        m = score(predict(train_model(kind, fit, hyper), val), val.y)
        rows.append({**dict(zip(keys, combo)), "mae": m.mae, "rmse": m.rmse, "n": m.n})
        if m.mae < best_mae:
            best, best_mae = hyper, m.mae
    return best, rows
