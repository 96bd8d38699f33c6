"""Configuration-driven experiment pipeline.

A run goes ingest -> preprocess -> window -> train -> attack -> defend ->
report, writing ``report.json``, ``tables/*.csv``, ``plots/*.csv`` and
``checkpoints/*.ckpt`` under the output directory. Every stage is tagged, so
a failure names the stage that raised and leaves a report marked incomplete.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import checkpoint
from .attacks import KINDS, AttackConfig, DEFAULT_ALPHA, attack_dataset, imperceptibility_report
from .data import (HORIZONS, SeriesFrame, WindowedDataset, apply_rul, impute_column_mean,
                   load_electricity, load_hdd, make_windows, minmax_normalize, resample_daily,
                   select_features, synth_series, train_val_test_split, walk_forward_splits)
from .defenses import DaatConfig, LpatConfig, daat_train, defense_report, lpat_train
from .models import MODEL_KINDS, ForecastModel, build_model
from .training import TrainConfig, evaluate, train

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
STAGES = ("ingest", "preprocess", "window", "train", "attack", "defend", "report")
SOURCES = ("electricity", "hdd", "synthetic")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetConfig:
    source: str
    path: str | None = None
    synthetic_kind: str = "seasonal"
    synthetic_params: dict = field(default_factory=dict)
    hdd_model: str | None = "ST4000DM000"
    coverage: float = 0.99

    @property
    def hdd_like(self) -> bool:
        return self.source == "hdd" or (self.source == "synthetic" and self.synthetic_kind == "degradation")


@dataclass(frozen=True)
class PreprocessConfig:
    impute: bool = True
    resample: str | None = None
    normalize: tuple[float, float] = (0.0, 1.0)
    top_features: int | None = None
    corr_threshold: float | None = None
    rul_horizon: int | None = None


@dataclass(frozen=True)
class AttackGrid:
    kinds: tuple[str, ...] = KINDS
    eps: tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25)
    alpha: float = DEFAULT_ALPHA


@dataclass(frozen=True)
class DefenseGrid:
    daat_kinds: tuple[str, ...] = KINDS
    lpat_kinds: tuple[str, ...] = KINDS
    lpat_schedules: tuple[str, ...] = ("deterministic", "stochastic")
    lpat_eps: float = 0.15
    lpat_range: tuple[float, float] = (0.05, 0.25)
    lpat_alpha: float = DEFAULT_ALPHA
    lpat_scale: str = "layer"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    preprocess: PreprocessConfig = PreprocessConfig()
    model_kind: str = "vanilla"
    lookback: int = 1
    hidden: int = 100
    dense: int = 100
    dropout: float = 0.1
    cv_folds: int = 0
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    train: TrainConfig = field(default_factory=TrainConfig)
    attacks: AttackGrid = AttackGrid()
    defenses: DefenseGrid = DefenseGrid()
    sweep_lookbacks: tuple[int, ...] = ()
    seed: int = 0
    output: str = "runs/default"
    version: int = CONFIG_VERSION

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed))

    def with_output(self, output) -> "ExperimentConfig":
        return replace(self, output=str(output))

    def with_lookback(self, lookback: int) -> "ExperimentConfig":
        return replace(self, lookback=lookback)

    @property
    def horizon(self) -> int:
        return self.preprocess.rul_horizon or self.lookback

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def content_hash(self) -> str:
        """sha256 of the canonical config, output directory excluded."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _take(d: dict, section: str, allowed: set[str]) -> dict:
    d = dict(d or {})
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    return d


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def parse_config(raw: dict, base_dir=".") -> ExperimentConfig:
    """Validate a config mapping (as loaded from YAML) into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = _take(raw, "config", {"version", "seed", "output", "dataset", "preprocess", "model",
                                "cv_folds", "split", "train", "attacks", "defenses", "sweep"})
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version} is not supported (expected {CONFIG_VERSION})")
    base = Path(base_dir)
    seed = int(raw.get("seed", 0))

    ds_raw = _take(raw.get("dataset"), "dataset", set(SOURCES))
    present = [s for s in SOURCES if s in ds_raw]
    if len(present) != 1:
        raise ConfigError(f"dataset needs exactly one of {SOURCES}, got {present or 'none'}")
    source = present[0]
    body = ds_raw[source] or {}
    if source == "synthetic":
        body = _take(body, "dataset.synthetic", {"kind", "params"})
        dataset = DatasetConfig("synthetic", synthetic_kind=body.get("kind", "seasonal"),
                                synthetic_params=dict(body.get("params") or {}))
        if dataset.synthetic_kind not in ("seasonal", "degradation"):
            raise ConfigError(f"unknown synthetic kind {dataset.synthetic_kind!r}")
    else:
        if isinstance(body, str):
            body = {"path": body}
        body = _take(body, f"dataset.{source}", {"path", "model", "coverage"})
        if "path" not in body:
            raise ConfigError(f"dataset.{source} needs a path")
        path = Path(body["path"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"dataset path does not exist: {path}")
        dataset = DatasetConfig(source, path=str(path), hdd_model=body.get("model", "ST4000DM000"),
                                coverage=float(body.get("coverage", 0.99)))

    hdd = dataset.hdd_like
    pp = _take(raw.get("preprocess"), "preprocess",
               {"impute", "resample", "normalize", "top_features", "corr_threshold", "rul_horizon"})
    resample = pp.get("resample", "mean" if source == "electricity" else None)
    if resample not in (None, "mean", "sum"):
        raise ConfigError(f"preprocess.resample must be mean, sum or null, got {resample!r}")
    norm = tuple(float(v) for v in pp.get("normalize", (0.0, 255.0) if hdd else (0.0, 1.0)))
    if len(norm) != 2 or not norm[0] < norm[1]:
        raise ConfigError(f"preprocess.normalize must be [lo, hi] with lo < hi, got {norm}")
    horizon = pp.get("rul_horizon")
    if horizon is not None and (not hdd or int(horizon) < 1):
        raise ConfigError("preprocess.rul_horizon applies to drive data and must be >= 1")
    preprocess = PreprocessConfig(impute=bool(pp.get("impute", True)), resample=resample,
                                  normalize=norm, top_features=pp.get("top_features"),
                                  corr_threshold=pp.get("corr_threshold"),
                                  rul_horizon=None if horizon is None else int(horizon))

    m = _take(raw.get("model"), "model", {"kind", "lookback", "hidden", "dense", "dropout"})
    kind = m.get("kind", "encdec" if hdd else "vanilla")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {sorted(MODEL_KINDS)}, got {kind!r}")
    lookback = int(m.get("lookback", 5 if hdd else 1))
    if lookback < 1:
        raise ConfigError("model.lookback must be >= 1")

    cv = int(raw.get("cv_folds", 0))
    if cv == 1 or cv < 0:
        raise ConfigError("cv_folds must be 0 (none) or >= 2")
    split = tuple(float(v) for v in raw.get("split", (0.8, 0.1, 0.1)))
    if len(split) != 3 or abs(sum(split) - 1) > 1e-9 or min(split) <= 0:
        raise ConfigError(f"split must be three positive fractions summing to 1, got {split}")

    t = _take(raw.get("train"), "train", {"epochs", "batch_size", "lr", "clip", "patience", "restore_best"})
    try:
        tcfg = TrainConfig(seed=seed, **t)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc

    a = _take(raw.get("attacks"), "attacks", {"kinds", "eps", "alpha"})
    grid = AttackGrid(kinds=_tuple(a.get("kinds", KINDS)),
                      eps=tuple(float(e) for e in _tuple(a.get("eps", (3, 5, 7, 9, 11) if hdd
                                                            else (0.05, 0.1, 0.15, 0.2, 0.25)))),
                      alpha=float(a.get("alpha", DEFAULT_ALPHA)))
    for k in grid.kinds:
        if k not in KINDS:
            raise ConfigError(f"unknown attack kind {k!r}")
    if not grid.eps or any(b <= a_ for a_, b in zip(grid.eps, grid.eps[1:])) or grid.eps[0] <= 0:
        raise ConfigError(f"attacks.eps must be positive and strictly increasing, got {grid.eps}")

    d = _take(raw.get("defenses"), "defenses", {"daat", "lpat"})
    daat = _take(d.get("daat"), "defenses.daat", {"kinds"})
    lpat = _take(d.get("lpat"), "defenses.lpat", {"kinds", "schedules", "eps", "range", "alpha", "scale"})
    mid = float(np.mean(grid.eps))
    defenses = DefenseGrid(
        daat_kinds=_tuple(daat.get("kinds", KINDS)) if daat.get("kinds", KINDS) else (),
        lpat_kinds=_tuple(lpat.get("kinds", KINDS)) if lpat.get("kinds", KINDS) else (),
        lpat_schedules=_tuple(lpat.get("schedules", ("deterministic", "stochastic"))),
        lpat_eps=float(lpat.get("eps", mid)),
        lpat_range=tuple(float(v) for v in lpat.get("range", (grid.eps[0], grid.eps[-1]))),
        lpat_alpha=float(lpat.get("alpha", grid.alpha)),
        lpat_scale=lpat.get("scale", "layer"),
    )
    try:
        for k in defenses.daat_kinds:
            DaatConfig(k, grid.eps, grid.alpha)
        for k in defenses.lpat_kinds:
            for s in defenses.lpat_schedules:
                _lpat_config(defenses, k, s)
    except ValueError as exc:
        raise ConfigError(f"defenses: {exc}") from exc

    sweep = _take(raw.get("sweep"), "sweep", {"lookbacks"})
    lbs = tuple(int(v) for v in sweep.get("lookbacks", ()))

    return ExperimentConfig(
        dataset=dataset, preprocess=preprocess, model_kind=kind, lookback=lookback,
        hidden=int(m.get("hidden", 100)), dense=int(m.get("dense", 100)),
        dropout=float(m.get("dropout", 0.1)), cv_folds=cv, split=split, train=tcfg,
        attacks=grid, defenses=defenses, sweep_lookbacks=lbs, seed=seed,
        output=str(raw.get("output", "runs/default")), version=version)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(raw, base_dir=path.parent)


def _lpat_config(d: DefenseGrid, kind: str, schedule: str, data_range: float = 1.0) -> LpatConfig:
    return LpatConfig(kind=kind, schedule=schedule, eps=d.lpat_eps, eps_range=d.lpat_range,
                      alpha=d.lpat_alpha, scale=d.lpat_scale, data_range=data_range)


# ---------------------------------------------------------------------------
# data stages


def ingest(cfg: ExperimentConfig) -> SeriesFrame:
    ds = cfg.dataset
    if ds.source == "electricity":
        return load_electricity(ds.path)
    if ds.source == "hdd":
        return load_hdd(ds.path, model=ds.hdd_model, coverage=ds.coverage)
    return synth_series(ds.synthetic_kind, ds.synthetic_params, seed=cfg.seed)


def preprocess(frame: SeriesFrame, cfg: ExperimentConfig) -> SeriesFrame:
    pp = cfg.preprocess
    if cfg.dataset.hdd_like:
        if cfg.horizon not in HORIZONS:
            log.info("RUL horizon %d is outside the usual set %s", cfg.horizon, HORIZONS)
        frame = apply_rul(frame, cfg.horizon)
    elif pp.impute and frame.missing_count():
        frame = impute_column_mean(frame)
    if pp.resample and not cfg.dataset.hdd_like:
        frame = resample_daily(frame, pp.resample)
    if pp.top_features is not None or pp.corr_threshold is not None:
        frame = select_features(frame, top=pp.top_features, threshold=pp.corr_threshold)
    if cfg.dataset.hdd_like:
        # SMART inputs go on the 0-255 scale; RUL stays in days
        return minmax_normalize(frame, *pp.normalize, columns=frame.input_columns)
    return minmax_normalize(frame, *pp.normalize)


def window(frame: SeriesFrame, cfg: ExperimentConfig) -> WindowedDataset:
    mode = "sequence" if cfg.model_kind == "encdec" else "next-step"
    return make_windows(frame, cfg.lookback, mode)


@dataclass
class Splits:
    train: WindowedDataset
    val: WindowedDataset
    test: WindowedDataset


def split(ds: WindowedDataset, cfg: ExperimentConfig) -> Splits:
    tr, va, te = train_val_test_split(len(ds), cfg.split)
    return Splits(ds.subset(tr, "train"), ds.subset(va, "validation"), ds.subset(te, "test"))


def new_model(cfg: ExperimentConfig, features: int) -> ForecastModel:
    return build_model(cfg.model_kind, features, cfg.lookback, hidden=cfg.hidden, dense=cfg.dense,
                       dropout=cfg.dropout, seed=cfg.seed)


def fit_baseline(cfg: ExperimentConfig, s: Splits) -> tuple[ForecastModel, dict]:
    """Train the clean model.

    Without CV, one fit on the train split with early stopping on validation.
    With k folds, one model is carried through walk-forward folds cut from the
    train and validation splits together, each fold resuming from the
    previous fold's weights and stopping early on its own validation block.
    """
    model = new_model(cfg, s.train.features)
    if cfg.cv_folds < 2:
        model, hist = train(model, s.train, s.val, cfg.train)
        return model, {"histories": [hist.to_dict()], "folds": []}
    pool = WindowedDataset.concat([s.train, s.val], split="train+validation")
    plan = walk_forward_splits(len(pool), cfg.cv_folds)
    hists, folds = [], []
    for i, (tr, va) in enumerate(plan):
        model, hist = train(model, pool.subset(tr, f"fold{i}-train"), pool.subset(va, f"fold{i}-val"),
                            replace(cfg.train, seed=cfg.train.seed + 7919 * (i + 1)))
        hists.append(hist.to_dict())
        folds.append({"fold": i, "train_size": len(tr), "val_size": len(va),
                      "val_rmse": hist.val_rmse[hist.best_epoch] if hist.best_epoch >= 0 else float("nan")})
    return model, {"histories": hists, "folds": folds}


# ---------------------------------------------------------------------------
# running


class _Stages:
    """Timing and failure tagging for pipeline stages."""

    def __init__(self, report: dict, out: Path):
        self.report = report
        self.out = out

    @contextlib.contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            self.report["complete"] = False
            self.report["failed_stage"] = name
            self.report["error"] = f"{type(exc).__name__}: {exc}"
            _write_json(self.out / "report.json", self.report)
            raise StageError(name, exc) from exc
        finally:
            self.report["timing"][name] = time.perf_counter() - t0
        self.report["stages_done"].append(name)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=True))


def pct_increase(attacked: float, clean: float) -> float:
    return 100.0 * (attacked - clean) / clean


def _last_step(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    return a[:, -1] if a.ndim == 2 else a


def run(cfg: ExperimentConfig, until: str = "report") -> dict:
    """Execute the pipeline through stage ``until``; returns the report dict."""
    return _run(cfg, until=until, reuse_baseline=False)


def run_stage(cfg: ExperimentConfig, stage: str) -> dict:
    """Run one CLI stage. ``attack``/``defend`` reload the saved baseline."""
    if stage in ("attack", "defend"):
        return _run(cfg, until=stage, reuse_baseline=True)
    return _run(cfg, until=stage, reuse_baseline=False)


def _run(cfg: ExperimentConfig, until: str, reuse_baseline: bool) -> dict:
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}; expected one of {STAGES}")
    stop = STAGES.index(until)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"config": cfg.to_dict(), "config_hash": cfg.content_hash(), "complete": False,
                    "requested_stage": until, "stages_done": [], "timing": {}, "tables": {}}
    stage = _Stages(report, out)
    _write_json(out / "report.json", report)

    with stage("ingest"):
        raw = ingest(cfg)
        report["dataset"] = {"name": raw.name, "rows": len(raw), "columns": raw.columns,
                             "raw_hash": raw.content_hash()}
    with stage("preprocess"):
        frame = preprocess(raw, cfg)
        report["dataset"].update(processed_hash=frame.content_hash(), processed_rows=len(frame),
                                 inputs=frame.input_columns, target=frame.target)
    with stage("window"):
        ds = window(frame, cfg)
        s = split(ds, cfg)
        report["dataset"].update(windows=len(ds), windows_hash=ds.content_hash(),
                                 sizes={"train": len(s.train), "validation": len(s.val),
                                        "test": len(s.test)})
    if stop < STAGES.index("train"):
        return _finish(report, out, stop)

    tables = report["tables"]
    ckpt_path = out / "checkpoints" / "baseline.ckpt"
    with stage("train"):
        if reuse_baseline:
            if not ckpt_path.exists():
                raise FileNotFoundError(f"{ckpt_path} missing; run the train stage first")
            model = checkpoint.load(ckpt_path)
            fit = {"histories": [], "folds": [], "reloaded": True}
        else:
            model, fit = fit_baseline(cfg, s)
        ckpt_id = checkpoint.save(model, ckpt_path)
        report["provenance"] = {"baseline_checkpoint": ckpt_id,
                                "dataset_hash": report["dataset"]["windows_hash"]}
        clean = {"train": evaluate(model, s.train), "validation": evaluate(model, s.val),
                 "test": evaluate(model, s.test)}
        tables["clean"] = [{"split": k, "rmse": v} for k, v in clean.items()]
        tables["cv_folds"] = fit["folds"]
        tables["history"] = [{"model": "baseline", "phase": i, "epoch": e, "train_rmse": tr, "val_rmse": va}
                             for i, h in enumerate(fit["histories"])
                             for e, (tr, va) in enumerate(zip(h["train_rmse"], h["val_rmse"]))]
        pred = model.predict(s.test.inputs)
        tables["true_vs_pred"] = [{"time": str(t), "true": float(a), "predicted": float(b)}
                                  for t, a, b in zip(_last_step(s.test.target_times),
                                                     _last_step(s.test.targets), _last_step(pred))]
    if stop < STAGES.index("attack"):
        return _finish(report, out, stop)

    poisoned: dict[str, dict[float, WindowedDataset]] = {}
    attack_rmse: dict[tuple[str, float], float] = {}
    with stage("attack"):
        rows, stats, overlay = [], [], []
        names = frame.input_columns
        for kind in cfg.attacks.kinds:
            poisoned[kind] = {}
            for eps in cfg.attacks.eps:
                acfg = AttackConfig(kind, eps, min(cfg.attacks.alpha, eps))
                batch, pds = attack_dataset(model, s.test, acfg)
                poisoned[kind][eps] = pds
                r = evaluate(model, pds)
                attack_rmse[(kind, eps)] = r
                rows.append({"attack": kind, "eps": eps, "iterations": batch.iterations,
                             "clean_rmse": clean["test"], "attack_rmse": r,
                             "pct_increase": pct_increase(r, clean["test"])})
                rep = imperceptibility_report(batch, names, max_series=200)
                stats += [{"attack": kind, "eps": eps, "feature": f, **v} for f, v in rep["features"].items()]
                for f, ser in rep["series"].items():
                    overlay += [{"attack": kind, "eps": eps, "feature": f, "index": i, "clean": c, "perturbed": p}
                                for i, (c, p) in enumerate(zip(ser["clean"], ser["perturbed"]))]
        tables["attacks"] = rows
        tables["perturbation"] = stats
        tables["input_overlay"] = overlay
    if stop < STAGES.index("defend"):
        return _finish(report, out, stop)

    with stage("defend"):
        summaries, defended, hist_rows = [], {}, []
        for kind in cfg.defenses.daat_kinds:
            if kind not in poisoned:
                continue
            res = daat_train(s.train, s.val, model, DaatConfig(kind, cfg.attacks.eps, cfg.attacks.alpha),
                             cfg.train, s.test, poisoned[kind])
            summaries.append(res.summary())
            for eps, v in res.test_poisoned_rmse.items():
                defended[("DAAT", kind, eps)] = v
            hist_rows += _history_rows(f"DAAT-{kind}", res.history)
        for kind in cfg.defenses.lpat_kinds:
            if kind not in poisoned:
                continue
            for sched in cfg.defenses.lpat_schedules:
                lo, hi = cfg.preprocess.normalize
                lcfg = _lpat_config(cfg.defenses, kind, sched, hi - lo)
                res = lpat_train(s.train, s.val, lcfg, cfg.train, new_model(cfg, s.train.features),
                                 s.test, poisoned[kind])
                summaries.append(res.summary())
                for eps, v in res.test_poisoned_rmse.items():
                    defended[(lcfg.label, kind, eps)] = v
                hist_rows += _history_rows(f"{lcfg.label}-{kind}", res.history)
        tables["defenses"] = summaries
        tables["defense_grid"] = defense_report(attack_rmse, defended) if defended else []
        tables["history"] = tables.get("history", []) + hist_rows
    return _finish(report, out, STAGES.index("report"))


def _history_rows(label: str, hist) -> list[dict]:
    return [{"model": label, "phase": 0, "epoch": e, "train_rmse": tr, "val_rmse": va}
            for e, (tr, va) in enumerate(zip(hist.train_rmse, hist.val_rmse))]


def _finish(report: dict, out: Path, stop: int) -> dict:
    t0 = time.perf_counter()
    write_tables(report, out)
    emit_plot_data(report, out)
    report["timing"]["report"] = time.perf_counter() - t0
    report["complete"] = True
    _write_json(out / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# outputs

TABLES = ("clean", "cv_folds", "attacks", "perturbation", "defenses", "defense_grid", "history")


def _to_csv(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def read_table(path) -> pd.DataFrame:
    """Read an emitted CSV back with exact float round-tripping."""
    return pd.read_csv(path, float_precision="round_trip")


def write_tables(report: dict, out) -> list[Path]:
    out = Path(out)
    written = []
    for name in TABLES:
        rows = report["tables"].get(name)
        if rows:
            p = out / "tables" / f"{name}.csv"
            _to_csv(rows, p)
            written.append(p)
    return written


def emit_plot_data(report: dict, out) -> list[Path]:
    """One CSV per figure class, built from the report tables."""
    out = Path(out) / "plots"
    t = report["tables"]
    files = {}
    if t.get("true_vs_pred"):
        files["true_vs_predicted"] = t["true_vs_pred"]
    if t.get("attacks"):
        files["rmse_vs_eps"] = [{"attack": r["attack"], "eps": r["eps"], "rmse": r["attack_rmse"]}
                                for r in t["attacks"]]
    if t.get("input_overlay"):
        files["input_overlay"] = t["input_overlay"]
    if t.get("defense_grid"):
        bars = [{"attack": r["attack"], "eps": r["eps"], "model": "undefended", "rmse": r["attack_rmse"]}
                for r in t["attacks"]]
        bars += [{"attack": r["attack"], "eps": r["eps"], "model": r["defense"], "rmse": r["defended_rmse"]}
                 for r in t["defense_grid"]]
        files["attack_vs_defense"] = bars
        files["pct_decrease"] = [{"defense": r["defense"], "attack": r["attack"], "eps": r["eps"],
                                  "pct_decrease": r["pct_decrease"]} for r in t["defense_grid"]]
    if t.get("lookback_sweep"):
        files["lookback_sweep"] = t["lookback_sweep"]
    paths = []
    for name, rows in files.items():
        p = out / f"{name}.csv"
        _to_csv(rows, p)
        paths.append(p)
    return paths


def rebuild_outputs(out) -> dict:
    """Re-emit tables and plot files from an existing ``report.json``."""
    out = Path(out)
    path = out / "report.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run the pipeline first")
    report = json.loads(path.read_text())
    if not report.get("complete"):
        raise RuntimeError(f"{path} is marked incomplete (failed stage: {report.get('failed_stage')})")
    write_tables(report, out)
    emit_plot_data(report, out)
    return report


def lookback_sweep(cfg: ExperimentConfig, lookbacks=None) -> dict:
    """Train one clean model per look-back; failures are recorded, not raised."""
    lookbacks = tuple(lookbacks or cfg.sweep_lookbacks)
    if len(lookbacks) < 1:
        raise ConfigError("sweep needs at least one look-back value")
    out = Path(cfg.output)
    rows = []
    for L in lookbacks:
        sub = cfg.with_lookback(L).with_output(out / "sweep" / f"L{L}")
        try:
            rep = run(sub, until="train")
            clean = {r["split"]: r["rmse"] for r in rep["tables"]["clean"]}
            rows.append({"lookback": L, "train_rmse": clean["train"], "val_rmse": clean["validation"],
                         "test_rmse": clean["test"], "error": ""})
        except StageError as exc:
            log.warning("look-back %d failed: %s", L, exc)
            rows.append({"lookback": L, "train_rmse": float("nan"), "val_rmse": float("nan"),
                         "test_rmse": float("nan"), "error": str(exc)})
    report = {"config": cfg.to_dict(), "config_hash": cfg.content_hash(), "complete": True,
              "tables": {"lookback_sweep": rows}}
    _to_csv(rows, out / "tables" / "lookback_sweep.csv")
    emit_plot_data(report, out)
    _write_json(out / "sweep.json", report)
    return report
