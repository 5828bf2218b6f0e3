"""Command line entry point: ``kernelsubset <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import milo
from .alignment import alignment_objective, sigest_gamma
from .baselines import greedy_forward, rfe_k
from .dataset import SubsetMask, build_pair_structure, load_csv, standardize
from .experiment import (
    METHODS,
    cls_acc,
    format_table,
    load_configs,
    results_to_json,
    run_experiment,
    set_f1,
)
from .solver import Limits, brute_force, solve_bnb
from .svm import train
from .synthgen import GenConfig, generate, write


class CliError(Exception):
    pass


def _dump(obj, path: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _prepare(path: str):
    ds = standardize(load_csv(path))
    return ds, build_pair_structure(ds)


def _gamma(args, ps, theta: int) -> tuple[float, float]:
    gamma_hat = sigest_gamma(ps, theta, ps.p)
    if getattr(args, "gamma", None) not in (None, "auto"):
        return float(args.gamma), gamma_hat
    return args.beta * gamma_hat, gamma_hat


def _feature_list(text: str, names: tuple[str, ...]) -> list[int]:
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        if tok in names:
            out.append(names.index(tok))
        elif tok.isdigit() and 1 <= int(tok) <= len(names):
            out.append(int(tok) - 1)
        else:
            raise CliError(f"unknown feature {tok!r}")
    return sorted(set(out))


# -- commands -------------------------------------------------------------------


def cmd_gen(args):
    cfg = GenConfig(
        n_train=args.n_train,
        n_test=args.n_test,
        p=args.p,
        theta_star=args.theta_star,
        expansion=args.exp,
        seed=args.seed,
        imbalance_cap=args.imbalance_cap,
    )
    meta = write(generate(cfg), cfg, args.outdir)
    _dump(meta, None)


def cmd_select(args):
    ds, ps = _prepare(args.input)
    if not 1 <= args.theta <= ds.p:
        raise CliError(f"--theta must lie in [1, {ds.p}]")
    gamma, gamma_hat = _gamma(args, ps, args.theta)
    out = {
        "method": args.method,
        "theta": args.theta,
        "beta": args.beta,
        "gamma_hat": gamma_hat,
        "gamma": gamma,
        "dropped_constant": list(ds.dropped),
    }
    if args.method in ("bnb", "brute"):
        if args.method == "bnb":
            res = solve_bnb(ps, args.theta, gamma, Limits(time_limit_s=args.time_limit, node_cap=args.node_cap))
        else:
            res = brute_force(ps, args.theta, gamma)
        out["result"] = res.to_dict(include_time=not args.no_timing)
        mask = res.z_best
    elif args.method == "greedy":
        trace = greedy_forward(ps, args.theta, gamma)
        out["trace"] = trace.to_list()
        mask = trace.mask
    else:
        trace = rfe_k(ds, args.theta, C=args.C, beta=args.beta)
        out["trace"] = trace.to_list()
        mask = trace.mask
    out["z"] = list(mask.z)
    out["features"] = [ds.feature_names[j] for j in mask.indices]
    out["objective"] = alignment_objective(ps, mask, gamma)
    _dump(out, args.output)


def cmd_export(args):
    ds, ps = _prepare(args.input)
    gamma, _ = _gamma(args, ps, args.theta)
    if args.variant == "full":
        model = milo.build_milo(ps, gamma, args.theta, M=args.M)
    else:
        model = milo.build_rmilo(ps, gamma, args.theta, stabilized=args.stabilized)
    text = milo.export_model(model, args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    info = {
        "variant": model.variant,
        "format": args.format,
        "gamma": gamma,
        "binaries": model.n_binary,
        "continuous": model.n_continuous,
        "inequalities": model.n_inequalities,
        "equalities": model.n_equalities,
        "objective_offset": model.obj_offset,
        "objective_scale": model.obj_scale,
    }
    if args.output:
        _dump(info, None)


def cmd_svm(args):
    raw = load_csv(args.train)
    ds = standardize(raw)
    keep = [raw.feature_names.index(n) for n in ds.feature_names]
    feats = _feature_list(args.features, ds.feature_names) if args.features else list(range(ds.p))
    mask = SubsetMask.from_indices(feats, ds.p)
    ps = build_pair_structure(ds)
    gamma, gamma_hat = _gamma(args, ps, max(1, len(feats)))
    model = train(ds, mask, gamma=gamma, C=args.C, kernel=args.kernel)
    out = {"features": [ds.feature_names[j] for j in feats], "gamma": gamma, "gamma_hat": gamma_hat,
           "model": model.to_dict()}
    if args.test:
        test = load_csv(args.test)
        mean, std = raw.x[:, keep].mean(axis=0), raw.x[:, keep].std(axis=0)
        idx = [test.feature_names.index(n) for n in ds.feature_names]
        xt = (test.x[:, idx] - mean) / std
        pred = model.predict(xt)
        out["predictions"] = pred.tolist()
        out["accuracy"] = cls_acc(pred, test.y)
    _dump(out, args.output)


def _read_labels(path: str) -> list[int]:
    text = Path(path).read_text().strip()
    if text.startswith("[") or text.startswith("{"):
        obj = json.loads(text)
        if isinstance(obj, dict):
            obj = obj.get("predictions", obj.get("labels"))
        return [int(v) for v in obj]
    if path.endswith(".csv"):
        return [int(v) for v in load_csv(path).y]
    return [int(float(line)) for line in text.splitlines() if line.strip()]


def cmd_eval(args):
    out = {}
    if args.selected is not None or args.relevant is not None:
        if args.selected is None or args.relevant is None:
            raise CliError("--selected and --relevant go together")
        sel = [int(t) for t in args.selected.split(",") if t.strip()]
        rel = [int(t) for t in args.relevant.split(",") if t.strip()]
        out["set_f1"] = set_f1(rel, sel)
    if args.pred or args.truth:
        if not (args.pred and args.truth):
            raise CliError("--pred and --truth go together")
        out["cls_acc"] = cls_acc(_read_labels(args.pred), _read_labels(args.truth))
    if not out:
        raise CliError("nothing to evaluate")
    _dump(out, args.output)


def cmd_bench(args):
    configs = load_configs(args.config)
    results = [(cfg, run_experiment(cfg)) for cfg in configs]
    timing = not args.no_timing
    text = results_to_json(results, timing=timing)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    table = format_table(results, timing=timing)
    if args.table:
        Path(args.table).write_text(table)
    elif args.output:
        sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kernelsubset", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic train/test pair")
    g.add_argument("--n-train", type=int, default=50)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--p", type=int, default=10)
    g.add_argument("--theta-star", type=int, default=3)
    g.add_argument("--exp", type=float, default=25.0, help="expansion factor")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--imbalance-cap", type=int, default=0)
    g.add_argument("--outdir", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("select", help="select a feature subset")
    s.add_argument("--input", required=True)
    s.add_argument("--theta", type=int, required=True)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--gamma", default="auto")
    s.add_argument("--method", choices=METHODS, default="bnb")
    s.add_argument("--time-limit", type=float, default=10000.0)
    s.add_argument("--node-cap", type=int, default=None)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    s.add_argument("--output")
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("export", help="write the MILO model as LP or MPS text")
    e.add_argument("--input", required=True)
    e.add_argument("--theta", type=int, required=True)
    e.add_argument("--beta", type=float, default=1.0)
    e.add_argument("--gamma", default="auto")
    e.add_argument("--format", choices=("lp", "mps"), default="lp")
    e.add_argument("--variant", choices=("full", "reduced"), default="reduced")
    e.add_argument("--stabilized", action=argparse.BooleanOptionalAction, default=True)
    e.add_argument("--M", type=float, default=1.0)
    e.add_argument("--output")
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("svm", help="train a kernel SVM and optionally predict")
    v.add_argument("--train", required=True)
    v.add_argument("--test")
    v.add_argument("--features", help="comma-separated names or 1-based indices")
    v.add_argument("--C", type=float, default=1.0)
    v.add_argument("--gamma", default="auto")
    v.add_argument("--beta", type=float, default=1.0)
    v.add_argument("--kernel", choices=("gaussian", "linear"), default="gaussian")
    v.add_argument("--output")
    v.set_defaults(func=cmd_svm)

    ev = sub.add_parser("eval", help="SetF1 and/or ClsAcc")
    ev.add_argument("--selected", help="comma-separated feature indices")
    ev.add_argument("--relevant", help="comma-separated feature indices")
    ev.add_argument("--pred", help="predicted labels (JSON list, svm output, or one per line)")
    ev.add_argument("--truth", help="true labels (JSON list, CSV with y column, or one per line)")
    ev.add_argument("--output")
    ev.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="run experiments from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--output")
    b.add_argument("--table")
    b.add_argument("--no-timing", action="store_true")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
