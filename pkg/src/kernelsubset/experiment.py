"""Selection experiments: run methods over repetitions and tabulate metrics."""

from __future__ import annotations

import itertools
import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .alignment import alignment_objective, sigest_gamma
from .baselines import greedy_forward, rfe_k
from .dataset import Dataset, load_csv, pair_structure_from_arrays, standardize
from .solver import GAP_SENTINEL, TIME_LIMIT, Limits, brute_force, format_gap, solve_bnb
from .svm import train
from .synthgen import GenConfig, generate

logger = logging.getLogger(__name__)

METHODS = ("bnb", "brute", "greedy", "rfe")


def set_f1(s_star, s_hat) -> float:
    """Harmonic mean of recall and precision of ``s_hat`` against ``s_star``."""
    s_star, s_hat = set(s_star), set(s_hat)
    if not s_star:
        raise ValueError("the relevant set must be nonempty")
    hit = len(s_star & s_hat)
    if not s_hat or hit == 0:
        return 0.0
    recall, precision = hit / len(s_star), hit / len(s_hat)
    return 2 * recall * precision / (recall + precision)


def cls_acc(preds, truth) -> float:
    preds, truth = np.asarray(preds), np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if preds.size == 0:
        raise ValueError("no labels to compare")
    return float(np.mean(preds == truth))


def mean_se(values) -> tuple[float, float]:
    """Mean and standard error (sample stdev / sqrt(count))."""
    values = list(values)
    if not values:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), 0.0
    return statistics.fmean(values), statistics.stdev(values) / math.sqrt(len(values))


@dataclass
class ExperimentConfig:
    methods: tuple[str, ...] = ("bnb",)
    theta: int = 3
    beta: float = 1.0
    C: float = 1.0
    time_limit_s: float = 10000.0
    repetitions: int = 1
    seeds: tuple[int, ...] = ()
    name: str = ""
    train_path: str | None = None
    test_path: str | None = None
    relevant: tuple[int, ...] | None = None
    gen: GenConfig | None = None

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = (self.methods,)
        self.methods = tuple(self.methods)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.gen is None and self.train_path is None:
            raise ValueError("either gen or train_path is required")
        if isinstance(self.gen, dict):
            self.gen = GenConfig(**self.gen)
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.gen is not None and not self.seeds:
            self.seeds = tuple(self.gen.seed + r for r in range(self.repetitions))
        if self.gen is not None and len(self.seeds) != self.repetitions:
            raise ValueError("need exactly one seed per repetition")
        if self.relevant is not None:
            self.relevant = tuple(self.relevant)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "method" in d:
            d["methods"] = d.pop("method")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["seeds"] = list(self.seeds)
        return d


@dataclass
class RunRecord:
    method: str
    seed: int | None
    subset: list[int]
    objective: float | None = None
    opt_gap: float | str | None = None
    status: str = ""
    time_s: float = 0.0
    cls_acc: float | None = None
    set_f1: float | None = None
    gamma: float | None = None
    error: str | None = None


@dataclass
class ReportRow:
    method: str
    obj_val: float | None
    opt_gap: float | str | None
    subset_size: float | None
    time_s: float
    time_limit_hit: bool
    cls_acc_mean: float | None
    cls_acc_se: float | None
    set_f1_mean: float | None
    set_f1_se: float | None
    reps: int
    failed: int = 0
    reasons: list[str] = field(default_factory=list)
    runs: list[RunRecord] = field(default_factory=list)

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("time_s")
            for r in d["runs"]:
                r.pop("time_s")
        return d


def _load_split(cfg: ExperimentConfig):
    train_ds = standardize(load_csv(cfg.train_path))
    test_ds = None
    if cfg.test_path:
        raw = load_csv(cfg.test_path)
        keep = [raw.feature_names.index(nm) for nm in train_ds.feature_names]
        test_ds = raw.select_features(keep)
        # reuse training statistics so test columns match
        ref = load_csv(cfg.train_path).select_features(keep)
        mean, std = ref.x.mean(axis=0), ref.x.std(axis=0)
        test_ds = Dataset((test_ds.x - mean) / std, test_ds.y, test_ds.feature_names)
    return train_ds, test_ds, cfg.relevant


def select(method: str, train_ds: Dataset, theta: int, gamma: float, beta: float, C: float, time_limit_s: float):
    """Run one selection method; returns ``(mask, objective, gap, status)``."""
    ps = pair_structure_from_arrays(train_ds.x, train_ds.y)
    if method == "bnb":
        res = solve_bnb(ps, theta, gamma, Limits(time_limit_s=time_limit_s))
        return res.z_best, res.objective, res.opt_gap, res.status
    if method == "brute":
        res = brute_force(ps, theta, gamma)
        return res.z_best, res.objective, res.opt_gap, res.status
    if method == "greedy":
        mask = greedy_forward(ps, theta, gamma).mask
    elif method == "rfe":
        mask = rfe_k(train_ds, theta, C=C, beta=beta).mask
    else:
        raise ValueError(f"unknown method {method!r}")
    return mask, alignment_objective(ps, mask, gamma), None, "heuristic"


def _one_run(cfg: ExperimentConfig, method: str, seed, train_ds, test_ds, relevant) -> RunRecord:
    rec = RunRecord(method=method, seed=seed, subset=[])
    t0 = time.perf_counter()
    try:
        ps = pair_structure_from_arrays(train_ds.x, train_ds.y)
        gamma = cfg.beta * sigest_gamma(ps, cfg.theta, train_ds.p)
        rec.gamma = gamma
        mask, obj, gap, status = select(method, train_ds, cfg.theta, gamma, cfg.beta, cfg.C, cfg.time_limit_s)
        rec.time_s = time.perf_counter() - t0
        rec.subset, rec.objective, rec.opt_gap, rec.status = list(mask.indices), obj, gap, status
        if relevant is not None:
            rec.set_f1 = set_f1(relevant, mask.indices)
        if test_ds is not None:
            model = train(train_ds, mask, gamma=gamma, C=cfg.C)
            rec.cls_acc = cls_acc(model.predict(test_ds.x), test_ds.y)
    except Exception as exc:  # recorded per run; the experiment keeps going
        logger.warning("%s run (seed %s) failed: %s", method, seed, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.time_s = time.perf_counter() - t0
    return rec


def _aggregate(method: str, runs: list[RunRecord], time_limit_s: float) -> ReportRow:
    ok = [r for r in runs if r.error is None]
    acc = mean_se([r.cls_acc for r in ok if r.cls_acc is not None])
    f1 = mean_se([r.set_f1 for r in ok if r.set_f1 is not None])
    gaps = [r.opt_gap for r in ok if r.opt_gap is not None]
    if not gaps:
        gap = None
    elif any(isinstance(g, str) for g in gaps):
        gap = GAP_SENTINEL
    else:
        gap = statistics.fmean(gaps)
    return ReportRow(
        method=method,
        obj_val=statistics.fmean(r.objective for r in ok) if ok else None,
        opt_gap=gap,
        subset_size=statistics.fmean(len(r.subset) for r in ok) if ok else None,
        time_s=statistics.fmean(r.time_s for r in runs),
        time_limit_hit=any(r.status == TIME_LIMIT for r in ok),
        cls_acc_mean=None if math.isnan(acc[0]) else acc[0],
        cls_acc_se=None if math.isnan(acc[1]) else acc[1],
        set_f1_mean=None if math.isnan(f1[0]) else f1[0],
        set_f1_se=None if math.isnan(f1[1]) else f1[1],
        reps=len(runs),
        failed=len(runs) - len(ok),
        reasons=[r.error for r in runs if r.error],
        runs=runs,
    )


def run_experiment(cfg: ExperimentConfig) -> list[ReportRow]:
    """One row per method; each repetition uses its own seed (synthetic) or the given files."""
    per_method: dict[str, list[RunRecord]] = {m: [] for m in cfg.methods}
    for rep in range(cfg.repetitions):
        seed = cfg.seeds[rep] if cfg.seeds else None
        try:
            if cfg.gen is not None:
                gcfg = GenConfig(**{**asdict(cfg.gen), "seed": seed})
                data = generate(gcfg)
                train_ds, test_ds, relevant = data.train, data.test, data.relevant
            else:
                train_ds, test_ds, relevant = _load_split(cfg)
        except Exception as exc:
            for m in cfg.methods:
                per_method[m].append(RunRecord(m, seed, [], error=f"{type(exc).__name__}: {exc}"))
            continue
        for m in cfg.methods:
            per_method[m].append(_one_run(cfg, m, seed, train_ds, test_ds, relevant))
    return [_aggregate(m, runs, cfg.time_limit_s) for m, runs in per_method.items()]


# -- output --------------------------------------------------------------------


def _fmt(v, fmt: str = ".3f") -> str:
    return "---" if v is None else format(v, fmt)


def format_table(results: list[tuple[ExperimentConfig, list[ReportRow]]], timing: bool = True) -> str:
    """Aligned text table in the layout of the published result tables."""
    header = ["name", "theta", "beta", "method", "ObjVal", "OptGap", "|S|", "ClsAcc", "SetF1"]
    if timing:
        header.append("Time")
    lines = []
    for cfg, rows in results:
        for row in rows:
            acc = "---" if row.cls_acc_mean is None else f"{row.cls_acc_mean:.3f} (±{row.cls_acc_se:.3f})"
            f1 = "---" if row.set_f1_mean is None else f"{row.set_f1_mean:.3f} (±{row.set_f1_se:.3f})"
            cells = [
                cfg.name or "-",
                str(cfg.theta),
                f"{cfg.beta:.2f}",
                row.method,
                _fmt(row.obj_val),
                "---" if row.opt_gap is None else format_gap(row.opt_gap),
                _fmt(row.subset_size, ".1f"),
                acc,
                f1,
            ]
            if timing:
                t = f">{cfg.time_limit_s:.1f}" if row.time_limit_hit else f"{row.time_s:.1f}"
                cells.append(t)
            if row.failed:
                cells[3] += f" [{row.failed} failed]"
            lines.append(cells)
    widths = [max(len(r[k]) for r in [header] + lines) for k in range(len(header))]
    out = ["  ".join(c.rjust(w) if k > 3 else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths))).rstrip()
           for r in [header] + lines]
    out.insert(1, "-" * len(out[0]))
    return "\n".join(out) + "\n"


def results_to_json(results, timing: bool = True) -> str:
    payload = [
        {"config": cfg.to_dict(), "rows": [r.to_dict(include_time=timing) for r in rows]}
        for cfg, rows in results
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load_configs(path) -> list[ExperimentConfig]:
    """Read a bench config: one experiment object, a list, or ``{"experiments": [...], "grid": {...}}``.

    A ``grid`` maps field names to value lists; every combination is run on
    top of the ``base`` object.
    """
    raw = json.loads(Path(path).read_text())
    return configs_from_obj(raw)


def configs_from_obj(raw) -> list[ExperimentConfig]:
    if isinstance(raw, list):
        return [c for item in raw for c in configs_from_obj(item)]
    if "experiments" in raw:
        return configs_from_obj(raw["experiments"])
    if "grid" in raw:
        base = raw.get("base", {})
        keys = sorted(raw["grid"])
        out = []
        for combo in itertools.product(*(raw["grid"][k] for k in keys)):
            d = json.loads(json.dumps(base))
            for k, v in zip(keys, combo):
                if k.startswith("gen."):
                    d.setdefault("gen", {})[k[4:]] = v
                else:
                    d[k] = v
            if not d.get("name"):
                d["name"] = ",".join(f"{k.split('.')[-1]}={v}" for k, v in zip(keys, combo))
            out.append(ExperimentConfig.from_dict(d))
        return out
    return [ExperimentConfig.from_dict(raw)]
