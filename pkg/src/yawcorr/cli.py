"""Command-line entry point: synth, clean, benchmark, detect-static, train, correct, evaluate.

Configuration is one JSON document with a section per concern; command-line
flags override config values. The config path comes from ``--config`` or,
failing that, the ``YAWCORR_CONFIG`` environment variable. Every command
validates and computes everything before it writes its first output file.

Exit codes: 0 success, 1 validation error, 2 fit failure, 3 I/O error,
4 finished with an empty result (e.g. cleaning removed every record).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .correction import apply_correction, wait_time_overlay
from .errors import FitError, InsufficientDataError, InvalidInputError, YawCorrError
from .forecast.features import FeatureSet, build_features, chronological_split, leak_free
from .forecast.gra import candidate_series, gra_rank
from .forecast.models import GRID_KEYS, TRAINED, Hyper, grid_search, load_models, models_to_json, predict, \
    score, train_all
from .power import PowerCurve, bin_average_curve
from .preprocess import CleaningParams, clean
from .scada import Telemetry, TurbineConfig, format_csv, load_csv
from .static_yaw import ExponentEstimate, StaticYawEstimate, benchmark_exponent, estimate_static_yaw, rmae, \
    smooth_for_static, yaw_corrected_power
from .synth import SynthConfig, baseline_dataset, format_truth_csv, generate, read_truth_csv, \
    standard_benchmark

log = logging.getLogger("yawcorr")

EXIT_OK, EXIT_VALIDATION, EXIT_FIT, EXIT_IO, EXIT_EMPTY = 0, 1, 2, 3, 4
CONFIG_ENV = "YAWCORR_CONFIG"
MAX_OFFSET = 20.0
MIN_BENCHMARK_DATASETS = 4


# --- configuration ---------------------------------------------------------------------

def _strict(cls, d, section):
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidInputError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class IOConfig:
    schema: dict = field(default_factory=dict)
    timestamp_format: str = "epoch"
    strict: bool = False


@dataclass(frozen=True)
class StaticConfig:
    bin_width: float = 0.5
    bounds: tuple[float, float] = (-45.0, 45.0)
    min_bin_count: int = 20
    alpha: float | None = None  # overrides the benchmark estimate
    snap_alpha: bool = False
    smooth_window: float | None = None  # seconds; None fits the 1-min series
    central_region: bool = False
    iterations: int = 4


@dataclass(frozen=True)
class ForecastConfig:
    hyper: Hyper = field(default_factory=Hyper)
    split_ratio: float = 0.8
    grid: dict = field(default_factory=dict)  # kind -> {param: [values]}
    grid_fraction: float = 0.1


@dataclass(frozen=True)
class BenchmarkConfig:
    baseline: str | None = None
    datasets: tuple = ()  # ({"path": ..., "theta_s": ...}, ...)


@dataclass(frozen=True)
class RunConfig:
    turbine: TurbineConfig = field(default_factory=TurbineConfig)
    io: IOConfig = field(default_factory=IOConfig)
    cleaning: CleaningParams = field(default_factory=CleaningParams)
    static: StaticConfig = field(default_factory=StaticConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        if "turbine" in d:
            kw["turbine"] = TurbineConfig.from_dict(d["turbine"])
        if "io" in d:
            kw["io"] = _strict(IOConfig, d["io"], "io")
        if "cleaning" in d:
            kw["cleaning"] = CleaningParams.from_dict(d["cleaning"])
        if "static" in d:
            s = dict(d["static"])
            if "bounds" in s:
                s["bounds"] = tuple(s["bounds"])
            kw["static"] = _strict(StaticConfig, s, "static")
        if "forecast" in d:
            f = dict(d["forecast"])
            hyper_keys = set(Hyper.__dataclass_fields__)
            hyper = Hyper.from_dict({k: f.pop(k) for k in list(f) if k in hyper_keys})
            fc = _strict(ForecastConfig, {**f, "hyper": hyper}, "forecast")
            for kind, g in fc.grid.items():
                if kind not in GRID_KEYS or set(g) - set(GRID_KEYS[kind]):
                    raise InvalidInputError(f"invalid grid entry for {kind!r}")
            kw["forecast"] = fc
        if "synth" in d:
            kw["synth"] = SynthConfig.from_dict(d["synth"])
        if "benchmark" in d:
            b = dict(d["benchmark"])
            datasets = []
            for item in b.get("datasets", []):
                if set(item) - {"path", "theta_s"} or "path" not in item or "theta_s" not in item:
                    raise InvalidInputError("benchmark datasets need exactly 'path' and 'theta_s'")
                datasets.append({"path": _resolve(item["path"], base_dir), "theta_s": float(item["theta_s"])})
            b["datasets"] = tuple(datasets)
            if b.get("baseline") is not None:
                b["baseline"] = _resolve(b["baseline"], base_dir)
            kw["benchmark"] = _strict(BenchmarkConfig, b, "benchmark")
        return cls(**kw)


def _resolve(path, base_dir):
    p = Path(path)
    return str(p if p.is_absolute() or base_dir is None else base_dir / p)


def load_config(path: str | None) -> RunConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    p = Path(path)
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {p}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(d, dict):
        raise InvalidInputError("config must be a JSON object")
    return RunConfig.from_dict(d, p.parent)


# --- small helpers -----------------------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Outputs:
    """Artifacts collected in memory and written only after all checks passed."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> list[Path]:
        written = []
        for name, text in self.files.items():
            p = self.root / name
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
            written.append(p)
        return written


def _load(path, cfg: RunConfig) -> Telemetry:
    if not Path(path).exists():
        raise FileNotFoundError(f"input not found: {path}")
    return load_csv(path, cfg.io.schema or None, strict=cfg.io.strict, timestamp_format=cfg.io.timestamp_format)


def _clean(tel: Telemetry, cfg: RunConfig):
    return clean(tel, cfg.turbine, cfg.cleaning)


# --- pipeline steps (pure: no file output) ----------------------------------------------

def run_benchmark(baseline: Telemetry, datasets: list[tuple[Telemetry, float]], cfg: RunConfig):
    if len(datasets) < MIN_BENCHMARK_DATASETS:
        log.warning("only %d benchmarking datasets; at least %d offsets are recommended",
                    len(datasets), MIN_BENCHMARK_DATASETS)
    for _, theta_s in datasets:
        if abs(theta_s) > MAX_OFFSET:
            raise InvalidInputError(f"benchmark offset {theta_s} deg exceeds +-{MAX_OFFSET} deg")
    return benchmark_exponent(baseline, datasets, speed_range=cfg.turbine.region2_range,
                              standard_density=cfg.turbine.standard_density,
                              rated_power=cfg.turbine.rated_power, iterations=cfg.static.iterations)


def resolve_alpha(est: ExponentEstimate | None, cfg: RunConfig) -> float:
    if cfg.static.alpha is not None:
        return float(cfg.static.alpha)
    if est is None:
        raise InvalidInputError("no exponent: pass an alpha file or set static.alpha")
    return est.snapped() if cfg.static.snap_alpha else est.alpha


def run_detect(tel: Telemetry, curve: PowerCurve, alpha: float, cfg: RunConfig,
               bin_width: float | None = None) -> StaticYawEstimate:
    s = cfg.static
    if s.smooth_window:
        tel = smooth_for_static(tel, s.smooth_window)
    speed_range = (6.9, 9.2) if s.central_region else None
    return estimate_static_yaw(tel, curve, alpha, bin_width=bin_width or s.bin_width, min_bin_count=s.min_bin_count,
                               bounds=s.bounds, speed_range=speed_range)


def bins_csv(est: StaticYawEstimate) -> str:
    rows = [(b.bin_range[0], b.bin_range[1], 0.5 * (b.bin_range[0] + b.bin_range[1]), b.theta_hat, b.count,
             int(b.at_boundary)) for b in est.per_bin]
    return _csv_text(["bin_low", "bin_high", "bin_center", "theta_hat", "count", "at_boundary"], rows)


def run_train(cases: dict[str, Telemetry], cfg: RunConfig, train_ids=None, grid: bool = False):
    """Pooled training on the first 80% of each training case; per-case held-out metrics."""
    fc = cfg.forecast
    splits = {cid: chronological_split(build_features(tel), fc.split_ratio) for cid, tel in cases.items()}
    for cid, (tr, te) in splits.items():
        if not leak_free(tr, te):
            raise InvalidInputError(f"case {cid}: chronological split leaks training targets into test inputs")
    train_ids = list(cases) if train_ids is None else list(train_ids)
    train = FeatureSet.concat([splits[c][0] for c in train_ids])
    if len(train) < 2:
        raise InsufficientDataError("no buildable feature windows in the training data")
    hyper = fc.hyper
    sweeps = {}
    if grid:
        for kind in TRAINED:
            if kind in fc.grid:
                best, rows = grid_search(kind, train, fc.grid[kind], fraction=fc.grid_fraction, base=hyper)
                sweeps[kind] = rows
                hyper = replace(hyper, **{k: getattr(best, k) for k in fc.grid[kind]})
    models = train_all(train, hyper)
    metrics = []
    preds = {}
    for cid, (_, te) in splits.items():
        if len(te) == 0:
            continue
        preds[cid] = {name: predict(m, te) for name, m in models.items()}
        for name in models:
            m = score(preds[cid][name], te.y)
            metrics.append((cid, name, m.mae, m.rmse, m.n))
    return models, metrics, splits, preds, sweeps, hyper


def metrics_csv(metrics) -> str:
    return _csv_text(["case", "model", "mae", "rmse", "n"], metrics)


# --- subcommands -----------------------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> int:
    out = Outputs(args.out)
    if args.standard:
        base = replace(cfg.synth, seed=args.seed if args.seed is not None else cfg.synth.seed)
        cases = standard_benchmark(base.seed, base, turbine=cfg.turbine)
        baseline_raw, _ = baseline_dataset(base.seed, base, turbine=cfg.turbine)
        manifest = {"baseline": "baseline/scada.csv", "n_clean": len(cases[0].cleaned), "datasets": []}
        out.add("baseline/scada.csv", format_csv(baseline_raw.telemetry))
        out.add("baseline/truth.csv", format_truth_csv(baseline_raw.truth))
        for c in cases:
            out.add(f"case{c.case_id}/scada.csv", format_csv(c.raw.telemetry))
            out.add(f"case{c.case_id}/truth.csv", format_truth_csv(c.raw.truth))
            manifest["datasets"].append({"case": c.case_id, "path": f"case{c.case_id}/scada.csv",
                                         "theta_s": c.theta_s, "purpose": c.purpose})
        out.add("manifest.json", _dump_json(manifest))
        out.add("synth_config.json", _dump_json(base.to_dict()))
    else:
        sc = cfg.synth
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
        if args.theta_s is not None:
            sc = replace(sc, theta_s_true=args.theta_s)
        res = generate(sc, turbine=cfg.turbine)
        out.add("scada.csv", format_csv(res.telemetry))
        out.add("truth.csv", format_truth_csv(res.truth))
        out.add("synth_config.json", _dump_json(sc.to_dict()))
    out.commit()
    return EXIT_OK


def cmd_clean(args, cfg: RunConfig) -> int:
    tel = _load(args.input, cfg)
    res = _clean(tel, cfg)
    cleaned = res.telemetry
    if args.limit is not None:
        if args.limit < 1:
            raise InvalidInputError("--limit must be >= 1")
        if len(cleaned) < args.limit:
            raise InsufficientDataError(f"cleaning left {len(cleaned)} records, fewer than --limit {args.limit}")
        cleaned = cleaned.select(np.arange(args.limit))
    out = Outputs(Path(args.out).parent)
    out.add(Path(args.out).name, format_csv(cleaned))
    report_name = args.report or (Path(args.out).stem + "_report.json")
    out.add(report_name, _dump_json({**res.report.to_dict(), "written_count": len(cleaned)}))
    out.commit()
    if len(res.telemetry) == 0:
        log.warning("cleaning removed every record")
        return EXIT_EMPTY
    return EXIT_OK


def _benchmark_inputs(args, cfg: RunConfig):
    """(baseline path, [(path, theta_s)]) from a synth manifest or the config section."""
    if args.manifest:
        mp = Path(args.manifest)
        if not mp.exists():
            raise FileNotFoundError(f"manifest not found: {mp}")
        m = json.loads(mp.read_text())
        items = [d for d in m["datasets"] if d.get("purpose", "Modeling") == "Modeling"]
        return (str(mp.parent / m["baseline"]), [(str(mp.parent / d["path"]), float(d["theta_s"])) for d in items],
                m.get("n_clean"))
    b = cfg.benchmark
    if b.baseline is None or not b.datasets:
        raise InvalidInputError("benchmark needs --manifest or a config 'benchmark' section with baseline and datasets")
    return b.baseline, [(d["path"], d["theta_s"]) for d in b.datasets], None


def cmd_benchmark(args, cfg: RunConfig) -> int:
    base_path, items, n_clean = _benchmark_inputs(args, cfg)
    for _, theta_s in items:
        if abs(theta_s) > MAX_OFFSET:
            raise InvalidInputError(f"benchmark offset {theta_s} deg exceeds +-{MAX_OFFSET} deg")

    def prepared(path):
        tel = _clean(_load(path, cfg), cfg).telemetry
        return tel if n_clean is None else tel.select(np.arange(min(n_clean, len(tel))))

    baseline = prepared(base_path)
    datasets = [(prepared(p), th) for p, th in items]
    curve, est = run_benchmark(baseline, datasets, cfg)
    out = Outputs(args.out)
    out.add("alpha.json", _dump_json(est.to_dict()))
    out.add("power_curve.json", _dump_json(curve.to_dict()))
    out.commit()
    return EXIT_OK


def cmd_detect_static(args, cfg: RunConfig) -> int:
    tel = _load(args.input, cfg)
    if args.clean:
        tel = _clean(tel, cfg).telemetry
    curve = PowerCurve.from_dict(json.loads(Path(args.curve).read_text()))
    est = None
    if args.alpha_file:
        est = ExponentEstimate.from_dict(json.loads(Path(args.alpha_file).read_text()))
    if args.bin_width is not None:
        cfg = replace(cfg, static=replace(cfg.static, bin_width=args.bin_width))
    if args.snap_alpha:
        cfg = replace(cfg, static=replace(cfg.static, snap_alpha=True))
    alpha = resolve_alpha(est, cfg)
    static = run_detect(tel, curve, alpha, cfg)
    out = Outputs(args.out)
    out.add("static.json", _dump_json(static.to_dict()))
    out.add("bins.csv", bins_csv(static))
    out.commit()
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    cases = {}
    for path in args.inputs:
        tel = _load(path, cfg)
        if args.clean:
            tel = _clean(tel, cfg).telemetry
        cases[Path(path).parent.name if Path(path).stem == "cleaned" else Path(path).stem] = tel
    models, metrics, _, _, sweeps, _ = run_train(cases, cfg, grid=args.grid_search)
    out = Outputs(args.out)
    out.add("models.json", models_to_json(models))
    out.add("metrics.csv", metrics_csv(metrics))
    for kind, rows in sweeps.items():
        keys = list(rows[0])
        out.add(f"grid_{kind}.csv", _csv_text(keys, [[r[k] for k in keys] for r in rows]))
    out.commit()
    return EXIT_OK


def _report_files(out: Outputs, report, prefix: str = "") -> None:
    out.add(f"{prefix}correction.csv", report.to_csv())
    out.add(f"{prefix}summary.json", _dump_json(report.summary()))


def cmd_correct(args, cfg: RunConfig) -> int:
    tel = _load(args.input, cfg)
    if args.clean:
        tel = _clean(tel, cfg).telemetry
    static = StaticYawEstimate.from_dict(json.loads(Path(args.static).read_text()))
    models = load_models(args.models)
    theta_s_true = args.theta_s_true
    if args.truth:
        truth = read_truth_csv(args.truth)
        theta_s_true = float(truth.theta_s)
    features = chronological_split(build_features(tel), cfg.forecast.split_ratio)[1] if args.holdout else None
    report = apply_correction(tel, static.theta_hat_mean, models, theta_s_true, features=features)
    if args.wait:
        report = wait_time_overlay(report, args.deadband, args.wait)
    out = Outputs(args.out)
    _report_files(out, report)
    out.commit()
    return EXIT_OK


def evaluate(cfg: RunConfig, seed: int = 0, waits=(1,)) -> tuple[dict, Outputs]:
    """Full synthetic run: generate, clean, benchmark, detect, train, correct.

    Returns the summary and every artifact as text (nothing is written here).
    """
    out = Outputs(Path("."))
    sc = replace(cfg.synth, seed=seed)
    cases = standard_benchmark(seed, sc, turbine=cfg.turbine)
    _, baseline = baseline_dataset(seed, sc, turbine=cfg.turbine)
    modeling = [c for c in cases if c.purpose == "Modeling"]
    curve, est = run_benchmark(baseline, [(c.cleaned, c.theta_s) for c in modeling], cfg)
    alpha = resolve_alpha(est, cfg)
    out.add("benchmark/alpha.json", _dump_json(est.to_dict()))
    out.add("benchmark/power_curve.json", _dump_json(curve.to_dict()))

    static_rows, statics = [], {}
    for c in cases:
        st = run_detect(c.cleaned, curve, alpha, cfg)
        statics[c.case_id] = st
        out.add(f"case{c.case_id}/static.json", _dump_json(st.to_dict()))
        out.add(f"case{c.case_id}/bins.csv", bins_csv(st))
        static_rows.append((c.case_id, c.theta_s, st.theta_hat_mean, rmae(st.theta_hat_mean, c.theta_s)))
    out.add("static_summary.csv", _csv_text(["case", "theta_s", "theta_hat", "rmae"], static_rows))

    bin_rows = []
    for bw in (0.1, 0.2, 0.5, 1.0):
        errs = [abs(rmae(run_detect(c.cleaned, curve, alpha, cfg, bin_width=bw).theta_hat_mean, c.theta_s))
                for c in cases]
        bin_rows.append((bw, float(np.mean(errs)), *errs))
    out.add("bin_size_study.csv", _csv_text(["bin_width", "mean_abs_rmae"] + [f"case{c.case_id}" for c in cases],
                                            bin_rows))
    out.add("collapse.csv", collapse_csv([(c.cleaned, c.theta_s) for c in modeling], curve))

    tels = {c.case_id: c.cleaned for c in cases}
    models, metrics, splits, preds, _, _ = run_train(tels, cfg, train_ids=[c.case_id for c in modeling])
    out.add("models.json", models_to_json(models))
    out.add("metrics.csv", metrics_csv(metrics))

    cols, target = candidate_series(cases[0].cleaned)
    gra = gra_rank(cols, target)
    out.add("gra.csv", _csv_text(["channel", "grade"], gra.ranking))

    cf_rows = []
    for c in cases:
        te = splits[c.case_id][1]
        report = apply_correction(c.cleaned, statics[c.case_id].theta_hat_mean, models, c.theta_s, features=te)
        _report_files(out, report, f"case{c.case_id}/")
        for name in report.models:
            cf_rows.append((c.case_id, name, 0, report.cf_ye[name]))
        for w in waits:
            held = wait_time_overlay(report, 6.0, w)
            for name in held.models:
                cf_rows.append((c.case_id, name, w, held.cf_ye[name]))
    out.add("cf_ye.csv", _csv_text(["case", "model", "wait_minutes", "cf_ye"], cf_rows))

    summary = {
        "seed": seed,
        "backend": kernels.BACKEND,
        "alpha": est.to_dict(),
        "alpha_used": alpha,
        "static": {cid: {"theta_s": th, "theta_hat": hat, "rmae": r} for cid, th, hat, r in static_rows},
        "bin_size_study": {str(r[0]): r[1] for r in bin_rows},
        "forecast": [{"case": m[0], "model": m[1], "mae": m[2], "rmse": m[3], "n": m[4]} for m in metrics],
        "cf_ye": [{"case": r[0], "model": r[1], "wait_minutes": r[2], "cf_ye": r[3]} for r in cf_rows],
        "gra": [{"channel": n, "grade": g} for n, g in gra.ranking],
    }
    out.add("evaluation.json", _dump_json(summary))
    return summary, out


def collapse_csv(datasets, curve: PowerCurve, alphas=(0.0, 1.0, 2.0, 3.0), bin_width: float = 1.0) -> str:
    """Binned yaw-corrected power for several exponents next to the zero-yaw curve."""
    rows = []
    for a in alphas:
        v = np.concatenate([t.wind_speed for t, _ in datasets])
        p = np.concatenate([yaw_corrected_power(t, th, a, curve.standard_density) for t, th in datasets])
        b = bin_average_curve(v, p, bin_width)
        lo, hi = curve.fit_speed_range
        for s, pw, n in zip(b.bin_mean_speed, b.bin_mean_power, b.bin_count):
            ref = float(curve(np.clip(s, lo, hi)))
            rows.append((a, float(s), float(pw), ref, int(n)))
    return _csv_text(["alpha", "bin_mean_speed", "corrected_power", "reference_power", "count"], rows)


def cmd_evaluate(args, cfg: RunConfig) -> int:
    waits = tuple(args.wait) if args.wait else (1,)
    _, out = evaluate(cfg, args.seed if args.seed is not None else cfg.synth.seed, waits)
    out.root = Path(args.out)
    out.commit()
    return EXIT_OK


def cmd_benchmark_kernels(args, cfg: RunConfig) -> int:
    from .bench import run_kernel_benchmark

    print(run_kernel_benchmark(n=args.n, repeats=args.repeats))
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="yawcorr", description="Static and dynamic yaw misalignment from SCADA data")
    p.add_argument("--config", help=f"JSON config (default: ${CONFIG_ENV})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic SCADA data with ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--theta-s", type=float, help="static offset for a single dataset")
    s.add_argument("--standard", action="store_true", help="write the six-case benchmark plus a baseline run")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("clean", help="fault/curtailment/IQR/Region-II cleaning")
    s.add_argument("input")
    s.add_argument("--out", required=True, help="cleaned CSV path")
    s.add_argument("--report", help="report file name next to the output (default <out>_report.json)")
    s.add_argument("--limit", type=int, help="keep only the first N cleaned records (equal-size case tailoring)")
    s.set_defaults(func=cmd_clean)

    s = sub.add_parser("benchmark", help="fit the power curve and cosine exponent on offset datasets")
    s.add_argument("--manifest", help="manifest.json from 'synth --standard' (Modeling cases are used)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("detect-static", help="estimate the static yaw error of one dataset")
    s.add_argument("input")
    s.add_argument("--curve", required=True)
    s.add_argument("--alpha-file", help="alpha.json from 'benchmark'")
    s.add_argument("--bin-width", type=float)
    s.add_argument("--snap-alpha", action="store_true", help="round the exponent to the nearest integer")
    s.add_argument("--clean", action="store_true", help="input is raw; clean it first")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect_static)

    s = sub.add_parser("train", help="train the dynamic yaw forecasters")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--grid-search", action="store_true", help="sweep config grids on 10%% of the training data")
    s.add_argument("--clean", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("correct", help="apply static + dynamic corrections and score them")
    s.add_argument("input")
    s.add_argument("--static", required=True)
    s.add_argument("--models", required=True)
    s.add_argument("--theta-s-true", type=float)
    s.add_argument("--truth", help="truth.csv from 'synth'")
    s.add_argument("--wait", type=int, default=0, help="wait time in minutes for the controller overlay")
    s.add_argument("--deadband", type=float, default=6.0)
    s.add_argument("--holdout", action="store_true", help="score only the chronological test tail (forecast.split_ratio)")
    s.add_argument("--clean", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("evaluate", help="end-to-end run on the synthetic benchmark")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--wait", type=int, action="append", help="wait times to score (repeatable)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("benchmark-kernels", help="time compiled vs pure-Python kernels")
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--repeats", type=int, default=3)
    s.set_defaults(func=cmd_benchmark_kernels)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except FitError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (YawCorrError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
