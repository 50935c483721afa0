"""SCADA domain types, angle arithmetic and CSV ingestion."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError, SchemaError

log = logging.getLogger(__name__)

STANDARD_DENSITY = 1.225

FIELDS = (
    "timestamp",
    "wind_speed",
    "wind_direction",
    "nacelle_direction",
    "power",
    "power_limit",
    "pitch_angle",
    "air_density",
    "fault_code",
)
_INT_FIELDS = ("timestamp", "fault_code")
DIRECTION_FIELDS = ("wind_direction", "nacelle_direction")


def wrap_angle(a):
    """Wrap degrees into [-180, 180). Accepts scalars or arrays."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("angle must be finite")
    out = np.mod(arr + 180.0, 360.0) - 180.0
    # fmod rounding can land exactly on +180 for inputs a hair below -180
    out = np.where(out >= 180.0, out - 360.0, out)
    if np.ndim(a) == 0:
        return float(out)
    return out


def wrap_360(a):
    out = np.mod(np.asarray(a, dtype=float), 360.0)
    out = np.where(out >= 360.0, out - 360.0, out)
    if np.ndim(a) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: int
    wind_speed: float
    wind_direction: float
    nacelle_direction: float
    power: float
    power_limit: float
    pitch_angle: float
    air_density: float
    fault_code: int = 0

    def __post_init__(self):
        problem = _record_problem(self)
        if problem is not None:
            raise InvalidInputError(problem)


def _record_problem(rec) -> str | None:
    for name in FIELDS:
        value = getattr(rec, name)
        if not math.isfinite(value):
            return f"{name} is not finite"
    if rec.wind_speed < 0:
        return "wind_speed must be >= 0"
    if rec.air_density <= 0:
        return "air_density must be > 0"
    if rec.power_limit <= 0:
        return "power_limit must be > 0"
    for name in DIRECTION_FIELDS:
        value = getattr(rec, name)
        if not 0.0 <= value < 360.0:
            return f"{name}={value} outside [0, 360)"
    return None


@dataclass(frozen=True)
class YawAngles:
    dynamic_yaw: float
    static_yaw: float

    @property
    def total_yaw(self) -> float:
        return wrap_angle(self.static_yaw + self.dynamic_yaw)


@dataclass(frozen=True)
class TurbineConfig:
    cut_in_speed: float = 4.0
    rated_speed: float = 11.5
    cut_out_speed: float = 25.0
    rated_power: float = 2500.0
    standard_density: float = STANDARD_DENSITY
    region2_range: tuple[float, float] = (4.0, 11.0)

    def __post_init__(self):
        if not self.cut_in_speed < self.rated_speed < self.cut_out_speed:
            raise InvalidInputError("need cut_in < rated < cut_out")
        if self.rated_power <= 0 or self.standard_density <= 0:
            raise InvalidInputError("rated_power and standard_density must be positive")
        lo, hi = self.region2_range
        if not lo < hi:
            raise InvalidInputError("region2_range must be increasing")
        object.__setattr__(self, "region2_range", (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, d: Mapping) -> "TurbineConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown turbine keys: {sorted(unknown)}")
        kw = dict(d)
        if "region2_range" in kw:
            kw["region2_range"] = tuple(kw["region2_range"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "cut_in_speed": self.cut_in_speed,
            "rated_speed": self.rated_speed,
            "cut_out_speed": self.cut_out_speed,
            "rated_power": self.rated_power,
            "standard_density": self.standard_density,
            "region2_range": list(self.region2_range),
        }


@dataclass(frozen=True, eq=False)
class Telemetry:
    """Columnar block of SCADA records, one array per channel.

    Pass-through channels that no equation consumes live in ``extras``.
    Arrays are made read-only on construction.
    """

    timestamp: np.ndarray
    wind_speed: np.ndarray
    wind_direction: np.ndarray
    nacelle_direction: np.ndarray
    power: np.ndarray
    power_limit: np.ndarray
    pitch_angle: np.ndarray
    air_density: np.ndarray
    fault_code: np.ndarray
    extras: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = None
        for name in FIELDS:
            dtype = np.int64 if name in _INT_FIELDS else np.float64
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise InvalidInputError(f"channel {name} has {arr.size} rows, expected {n}")
        extras = {}
        for key, value in dict(self.extras).items():
            arr = np.array(value, dtype=np.float64).reshape(-1)
            if arr.size != n:
                raise InvalidInputError(f"extra channel {key} has {arr.size} rows, expected {n}")
            arr.setflags(write=False)
            extras[key] = arr
        object.__setattr__(self, "extras", extras)

    def __len__(self) -> int:
        return self.timestamp.size

    def __iter__(self) -> Iterator[TelemetryRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> TelemetryRecord:
        return TelemetryRecord(**{name: getattr(self, name)[i].item() for name in FIELDS})

    def select(self, index) -> "Telemetry":
        """Row subset by boolean mask or integer index array."""
        index = np.asarray(index)
        kw = {name: getattr(self, name)[index] for name in FIELDS}
        kw["extras"] = {k: v[index] for k, v in self.extras.items()}
        return Telemetry(**kw)

    def replace(self, **channels) -> "Telemetry":
        kw = {name: getattr(self, name) for name in FIELDS}
        kw["extras"] = dict(self.extras)
        for key, value in channels.items():
            if key in FIELDS or key == "extras":
                kw[key] = value
            else:
                kw["extras"][key] = value
        return Telemetry(**kw)

    def channel(self, name: str) -> np.ndarray:
        if name in FIELDS:
            return getattr(self, name)
        if name == "dynamic_yaw":
            return self.dynamic_yaw
        if name in self.extras:
            return self.extras[name]
        raise SchemaError(f"unknown channel {name!r}")

    @property
    def dynamic_yaw(self) -> np.ndarray:
        if len(self) == 0:
            return np.empty(0)
        return wrap_angle(self.wind_direction - self.nacelle_direction)

    def validate(self) -> np.ndarray:
        """Boolean mask of rows satisfying the record invariants."""
        ok = np.ones(len(self), dtype=bool)
        for name in FIELDS:
            ok &= np.isfinite(getattr(self, name))
        ok &= self.wind_speed >= 0
        ok &= self.air_density > 0
        ok &= self.power_limit > 0
        for name in DIRECTION_FIELDS:
            d = getattr(self, name)
            ok &= (d >= 0) & (d < 360)
        return ok

    @classmethod
    def from_records(cls, records: Iterable[TelemetryRecord]) -> "Telemetry":
        records = list(records)
        return cls(**{name: [getattr(r, name) for r in records] for name in FIELDS})

    @classmethod
    def empty(cls) -> "Telemetry":
        return cls(**{name: [] for name in FIELDS})

    @classmethod
    def concat(cls, parts: Sequence["Telemetry"]) -> "Telemetry":
        parts = list(parts)
        if not parts:
            return cls.empty()
        keys = set(parts[0].extras)
        for p in parts[1:]:
            keys &= set(p.extras)
        kw = {name: np.concatenate([getattr(p, name) for p in parts]) for name in FIELDS}
        kw["extras"] = {k: np.concatenate([p.extras[k] for p in parts]) for k in sorted(keys)}
        return cls(**kw)


def dynamic_yaw(rec: TelemetryRecord) -> float:
    """Wind direction minus nacelle direction, wrapped to [-180, 180)."""
    return wrap_angle(rec.wind_direction - rec.nacelle_direction)


# --- CSV -------------------------------------------------------------------

DEFAULT_SCHEMA = {name: name for name in FIELDS}


@dataclass(frozen=True)
class RowIssue:
    row: int
    column: str | None
    message: str


def _parse_timestamp(text: str, fmt: str) -> int:
    if fmt == "epoch":
        value = float(text)
        if not math.isfinite(value) or value != math.floor(value):
            raise ValueError(f"timestamp {text!r} is not integer seconds")
        return int(value)
    if fmt == "iso":
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(round(dt.timestamp()))
    raise InvalidInputError(f"unknown timestamp format {fmt!r}")


def load_csv(
    path,
    schema: Mapping[str, str] | None = None,
    *,
    strict: bool = False,
    timestamp_format: str = "epoch",
    skipped: list | None = None,
) -> Telemetry:
    """Read a SCADA CSV export into a :class:`Telemetry` block.

    ``schema`` maps canonical field names to CSV column names; unmapped
    columns are carried through as float ``extras``. In strict mode the
    first bad row raises :class:`ParseError`; otherwise bad rows are logged,
    appended to ``skipped`` (as :class:`RowIssue`) and dropped.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(FIELDS)
        if unknown:
            raise SchemaError(f"schema maps unknown fields {sorted(unknown)}")
        mapping.update(schema)

    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        missing = [f for f in FIELDS if mapping[f] not in header]
        if missing:
            names = ", ".join(repr(mapping[f]) for f in missing)
            raise SchemaError(f"{path}: missing required column(s) {names}")
        col = {f: header.index(mapping[f]) for f in FIELDS}
        used = set(col.values())
        extra_cols = [(i, h) for i, h in enumerate(header) if i not in used]

        columns = {f: [] for f in FIELDS}
        extras = {h: [] for _, h in extra_cols}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} cells, got {len(row)}", row=lineno)
                values = {}
                for f in FIELDS:
                    cell = row[col[f]].strip()
                    try:
                        if f == "timestamp":
                            values[f] = _parse_timestamp(cell, timestamp_format)
                        elif f == "fault_code":
                            values[f] = int(float(cell))
                        else:
                            values[f] = float(cell)
                    except ValueError as exc:
                        raise ParseError(str(exc), row=lineno, column=mapping[f]) from None
                try:
                    TelemetryRecord(**values)
                except InvalidInputError as exc:
                    raise ParseError(str(exc), row=lineno) from None
            except ParseError as exc:
                if strict:
                    raise
                log.warning("%s: skipping %s", path, exc)
                if skipped is not None:
                    skipped.append(RowIssue(exc.row, exc.column, str(exc)))
                continue
            for f in FIELDS:
                columns[f].append(values[f])
            for i, h in extra_cols:
                try:
                    extras[h].append(float(row[i]))
                except ValueError:
                    extras[h].append(math.nan)
    return Telemetry(**columns, extras=extras)


def _fmt(value) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(int(value))


def format_csv(tel: Telemetry, schema: Mapping[str, str] | None = None) -> str:
    """CSV text for ``tel``; floats are written with repr so they round-trip."""
    mapping = dict(DEFAULT_SCHEMA)
    mapping.update(schema or {})
    extra_names = sorted(tel.extras)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([mapping[f] for f in FIELDS] + extra_names)
    cols = [getattr(tel, f) for f in FIELDS] + [tel.extras[k] for k in extra_names]
    for i in range(len(tel)):
        writer.writerow([_fmt(c[i]) for c in cols])
    return buf.getvalue()


def write_csv(path, tel: Telemetry, schema: Mapping[str, str] | None = None) -> None:
    Path(path).write_text(format_csv(tel, schema), encoding="utf-8")
