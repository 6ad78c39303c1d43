"""Command-line interface.

Every command writes JSON (and CSV for tables) into ``--out``. Exit codes:
0 on success, 1 on a data or numerical error (one-line message on stderr),
2 on a usage error. Any flag may also be given in a ``--config`` file of
``key = value`` lines; flags on the command line win.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import attribution, diagnostics, dro, harness, regions, worstcase
from .data import DataError, DomainPair, load_csv, parse_region, synth_shift, write_csv
from .learners import LearnerSpec, TrainConfig, load_model, model_to_dict

METHODS = ("erm",) + dro.KINDS
LEVEL_KINDS = {"cvar": "alpha", "marginal_cvar": "alpha", "conditional_gamma": "Gamma"}


class UsageError(Exception):
    """Bad flags or configuration; reported with exit code 2."""


def _check_level(kind: str, value: float, flag: str) -> None:
    if not math.isfinite(value):
        raise UsageError(f"{flag} must be finite")
    if kind in ("cvar", "marginal_cvar") and not 0 < value <= 1:
        raise UsageError(f"{flag}: alpha must lie in (0, 1], got {value}")
    if kind == "conditional_gamma" and value < 1:
        raise UsageError(f"{flag}: Gamma must be >= 1, got {value}")
    if kind not in LEVEL_KINDS and value < 0:
        raise UsageError(f"{flag}: radius must be >= 0, got {value}")


def _validate(args) -> None:
    missing = [f"--{m}" for m in REQUIRED.get(args.command, ()) if not getattr(args, m)]
    if missing:
        raise UsageError(f"missing required {', '.join(missing)}")
    if args.command == "train" and args.method != "erm" and args.radius is not None:
        _check_level(args.method, args.radius, "--radius")
    if args.command == "worstcase":
        try:
            radii = _floats(args.radii, "--radii")
        except DataError as exc:
            raise UsageError(str(exc)) from None
        if not radii:
            raise UsageError("--radii is empty")
        for r in radii:
            _check_level(args.method, r, "--radii")
    if args.command == "regions" and args.b < 0:
        raise UsageError("--b must be >= 0")
    for name in ("k", "n_extra", "probe_size", "steps", "rounds", "depth", "threads"):
        v = getattr(args, name, None)
        if v is not None and v < (0 if name == "n_extra" else 1):
            raise UsageError(f"--{name.replace('_', '-')} is out of range: {v}")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n")


def _floats(text, what):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise DataError(f"{what} must be a comma-separated list of numbers") from None


def _feature_indices(text, names):
    out = []
    for tok in filter(None, (t.strip() for t in str(text).split(","))):
        if tok in names:
            out.append(names.index(tok))
        elif tok.isdigit() and int(tok) < len(names):
            out.append(int(tok))
        else:
            raise DataError(f"unknown feature {tok!r}")
    return tuple(out)


def _learner(args) -> LearnerSpec:
    cfg = TrainConfig(steps=args.steps, step_size=args.step_size, l2=args.l2)
    if args.learner == "linear":
        return LearnerSpec("linear", loss_kind=args.loss, train=cfg)
    return LearnerSpec("gbt", rounds=args.rounds, learning_rate=args.learning_rate, max_depth=args.max_depth)


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(steps=args.steps, step_size=args.step_size, l2=args.l2, seed=args.seed)


def _pair(args) -> DomainPair:
    out = Path(args.out)
    src = args.source or str(out / "source.csv")
    tgt = args.target if isinstance(args.target, str) or args.target is None else args.target[0]
    tgt = tgt or str(out / "target.csv")
    return DomainPair(load_csv(src, args.label), load_csv(tgt, args.label))


def _target_ids(paths):
    ids, seen = [], {}
    for t in paths:
        stem = Path(t).stem
        seen[stem] = seen.get(stem, 0) + 1
        ids.append(stem if seen[stem] == 1 else f"{stem}_{seen[stem]}")
    return ids


def _source_model(args, pair):
    if getattr(args, "model_file", None):
        return load_model(args.model_file)
    return _learner(args).fit(pair.source)


# ---------------------------------------------------------------------- commands


def cmd_synth(args, out: Path):
    names = [f"x{j + 1}" for j in range(args.d)]
    region = parse_region(args.region, names)
    pair = synth_shift(args.n_source, args.n_target, args.d, region, args.flip, args.seed, args.noise)
    write_csv(pair.source, out / "source.csv", args.label)
    write_csv(pair.target, out / "target.csv", args.label)
    _write_json(
        out / "synth.json",
        {"region": region.to_dict(names), "flip": args.flip, "n_source": args.n_source, "n_target": args.n_target, "seed": args.seed},
    )


def cmd_decompose(args, out: Path):
    pair = _pair(args)
    model = _source_model(args, pair)
    dec = diagnostics.disde(pair, model)
    src_acc, gap, tgt_acc = diagnostics.accuracy_decomposition(pair, model)
    res = dec.to_dict()
    res["accuracy"] = {"source_acc": src_acc, "gap": gap, "target_acc": tgt_acc}
    res["degraded"] = -gap >= args.min_degradation
    _write_json(out / "disde.json", res)
    dec.to_csv(out / "disde.csv")


def cmd_regret(args, out: Path):
    pair = _pair(args)
    r = diagnostics.relative_regret(pair, _learner(args), args.k, args.seed)
    _write_json(out / "regret.json", {"relative_regret": r, "learner": args.learner})


def _spec(args, names) -> dro.AmbiguitySpec | None:
    if args.method == "erm":
        return None
    cost = None
    if args.cost_scale:
        cost = tuple(_floats(args.cost_scale, "--cost-scale"))
    z = _feature_indices(args.z, names) if args.z else ()
    radius = args.radius
    if radius is None:
        radius = 1.0 if args.method in LEVEL_KINDS else 0.0
    return dro.AmbiguitySpec(args.method, radius, args.label_cost, args.target_ratio, cost, z)


def cmd_train(args, out: Path):
    data = load_csv(args.source, args.label)
    spec = _spec(args, list(data.feature_names))
    cfg = _train_cfg(args)
    info = {"method": args.method}
    if spec is not None and spec.kind == "satisficing_wasserstein":
        res = dro.train_satisficing(data, spec.target_ratio, cfg, spec.cost_scale)
        model = res.model
        info.update(achieved_radius=res.achieved_radius, target=res.target)
    else:
        model = dro.train(data, spec, cfg, args.loss)
    info["objective"] = model.objective
    info["degenerate"] = model.degenerate
    if spec is not None:
        info["spec"] = spec.to_dict()
        if spec.kind in dro.F_KINDS + ("wasserstein", "aug_wasserstein", "satisficing_wasserstein"):
            info["rescaled_radius"] = dro.rescale_radius(spec)
    _write_json(out / "model.json", model_to_dict(model, data.feature_names))
    _write_json(out / "train.json", info)


def cmd_worstcase(args, out: Path):
    data = load_csv(args.source or str(out / "source.csv"), args.label)
    paths = args.target or []
    targets = {i: load_csv(t, args.label) for i, t in zip(_target_ids(paths), paths)}
    learner = _learner(args)
    studies = []
    for r in _floats(args.radii, "--radii"):
        spec = dro.AmbiguitySpec(args.method, r)
        studies.append(worstcase.run_study(data, spec, targets, learner, _train_cfg(args), args.k, args.seed))
    _write_json(
        out / "worstcase.json",
        [
            {
                "kind": st.spec.kind,
                "radius": st.spec.radius,
                "attained_value": st.weights.attained_value,
                "optimal_iid_acc": st.optimal_iid_acc,
                "transfer_acc": st.transfer_acc,
                "median_transfer_acc": st.median_transfer(),
            }
            for st in studies
        ],
    )
    worstcase.write_transfer_csv(studies, out / "transfer.csv")


def cmd_regions(args, out: Path):
    pair = _pair(args)
    names = list(pair.source.feature_names)
    find = regions.identify_region_light if args.light else regions.identify_region
    found = find(pair, args.b, args.depth, merge=not args.leaves)
    _write_json(out / "regions.json", [r.to_dict(names) for r in found])
    with open(out / "regions.csv", "w") as fh:
        fh.write("rank,discrepancy,support_share,rule\n")
        for i, r in enumerate(found):
            fh.write(f"{i},{r.discrepancy!r},{r.support_share!r},\"{r.rule(names)}\"\n")


def cmd_collect(args, out: Path):
    pair = _pair(args)
    region = parse_region(args.region, list(pair.source.feature_names))
    rows = regions.simulate_collection(pair, region, args.n_extra, {args.learner: _learner(args)}, args.seed)
    regions.write_rows_csv(rows, out / "collect.csv")
    _write_json(out / "collect.json", rows)


def cmd_attribute(args, out: Path):
    ratios = attribution.read_ratios_csv(args.ratios) if args.ratios else None
    recs = attribution.read_records_csv(args.records, ratios)
    des = attribution.build_design(recs, args.design, args.dependent, args.radius_sq, args.class_ratio)
    res = attribution.fit_ols(des.X, des.y, des.names, drop_collinear=args.drop_collinear)
    res.to_json(out / "ols.json")
    (out / "ols.txt").write_text(res.table() + "\n")


def cmd_grid(args, out: Path):
    src = load_csv(args.source or str(out / "source.csv"), args.label)
    paths = args.target or []
    pairs = [
        harness.NamedPair(args.setting, i, DomainPair(src, load_csv(t, args.label))) for i, t in zip(_target_ids(paths), paths)
    ]
    if not pairs:
        raise DataError("grid needs at least one --target")
    res = harness.run_grid(pairs, harness.default_methods(train_cfg=TrainConfig(steps=args.steps)), args.mode, args.seed, args.probe_size, threads=args.threads)
    res.write_csv(out / "results.csv")
    _write_json(out / "best.json", list(res.best))


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "regret": cmd_regret,
    "train": cmd_train,
    "worstcase": cmd_worstcase,
    "regions": cmd_regions,
    "collect-sim": cmd_collect,
    "attribute": cmd_attribute,
    "grid": cmd_grid,
}


def _learner_flags(p):
    p.add_argument("--learner", choices=("gbt", "linear"), default="gbt", help="model family")
    p.add_argument("--rounds", type=int, default=50, help="boosting rounds")
    p.add_argument("--learning-rate", type=float, default=0.2, help="boosting learning rate")
    p.add_argument("--max-depth", type=int, default=3, help="boosting tree depth")


def _train_flags(p):
    p.add_argument("--steps", type=int, default=3000, help="subgradient steps")
    p.add_argument("--step-size", type=float, default=1.0, help="initial step scale")
    p.add_argument("--l2", type=float, default=1e-3, help="ridge penalty")
    p.add_argument("--loss", choices=("hinge", "logistic"), default="hinge", help="training loss")


def _pair_flags(p, multi_target=False):
    p.add_argument("--source", help="source CSV (default OUT/source.csv)")
    if multi_target:
        p.add_argument("--target", nargs="+", help="target CSV(s)")
    else:
        p.add_argument("--target", help="target CSV (default OUT/target.csv)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftkit", description="Distribution-shift diagnosis and robust training.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--label", default="y", help="label column name")
    common.add_argument("--config", help="key = value file mirroring these flags")

    p = sub.add_parser("synth", parents=[common], help="write a planted-shift source/target pair")
    p.add_argument("--n-source", type=int, default=20000)
    p.add_argument("--n-target", type=int, default=20000)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--region", default="x1:0.5:1.0", help='planted region, e.g. "x1:0.5:1.0"')
    p.add_argument("--flip", type=float, default=1.0, help="flip probability inside the region")
    p.add_argument("--noise", type=float, default=0.05, help="symmetric label noise")

    p = sub.add_parser("decompose", parents=[common], help="DISDE decomposition of the performance gap")
    _pair_flags(p)
    _learner_flags(p)
    _train_flags(p)
    p.add_argument("--model-file", help="saved model JSON to diagnose instead of fitting one")
    p.add_argument(
        "--min-degradation",
        type=float,
        default=0.0,
        help="accuracy drop (fraction) a pair must reach to be flagged as degraded, e.g. 0.08",
    )

    p = sub.add_parser("regret", parents=[common], help="relative regret of the source model on the target")
    _pair_flags(p)
    _learner_flags(p)
    _train_flags(p)
    p.add_argument("--k", type=int, default=4, help="folds for the target reference model")

    p = sub.add_parser("train", parents=[common], help="train an ERM or DRO linear model")
    p.add_argument("--source", help="training CSV")
    p.add_argument("--method", choices=METHODS, default="erm")
    p.add_argument("--radius", type=float, help="radius / alpha / Gamma depending on the method")
    p.add_argument("--label-cost", type=float, default=1.0, help="label flip cost (aug_wasserstein)")
    p.add_argument("--target-ratio", type=float, default=1.1, help="satisficing target multiplier")
    p.add_argument("--cost-scale", help='per-feature transport scale, e.g. "1,inf,1"')
    p.add_argument("--z", help="Z features for marginal/conditional kinds, e.g. x3,x4")
    _train_flags(p)

    p = sub.add_parser("worstcase", parents=[common], help="worst-case distribution study")
    _pair_flags(p, multi_target=True)
    p.add_argument("--method", choices=dro.F_KINDS, default="kl")
    p.add_argument("--radii", default="0,0.05,0.2", help="comma-separated radii (alpha for cvar)")
    p.add_argument("--k", type=int, default=4)
    _learner_flags(p)
    _train_flags(p)

    p = sub.add_parser("regions", parents=[common], help="find regions with strong Y|X shift")
    _pair_flags(p)
    p.add_argument("--b", type=float, default=0.3, help="discrepancy threshold")
    p.add_argument("--depth", type=int, default=3, help="depth of the region tree")
    p.add_argument("--light", action="store_true", help="use the source-model-only variant")
    p.add_argument("--leaves", action="store_true", help="report clearing leaves without merging siblings")

    p = sub.add_parser("collect-sim", parents=[common], help="simulate region-targeted data collection")
    _pair_flags(p)
    p.add_argument("--region", default="x1:0.5:1.0")
    p.add_argument("--n-extra", type=int, default=250)
    _learner_flags(p)
    _train_flags(p)

    p = sub.add_parser("attribute", parents=[common], help="OLS attribution over run records")
    p.add_argument("--records", help="results CSV from the grid command")
    p.add_argument("--ratios", help="CSV with setting_id, domain_id, yx_ratio")
    p.add_argument("--design", choices=attribution.DESIGNS, default="best_config")
    p.add_argument("--dependent", choices=("target_accuracy", "performance_gap"), default="target_accuracy")
    p.add_argument("--radius-sq", action="store_true", help="add the squared radius")
    p.add_argument("--class-ratio", action="store_true", help="add model-class x ratio interactions")
    p.add_argument("--drop-collinear", action="store_true", help="drop collinear columns instead of failing")

    p = sub.add_parser("grid", parents=[common], help="grid search with a validation mode")
    _pair_flags(p, multi_target=True)
    p.add_argument("--setting", default="s0", help="setting identifier")
    p.add_argument("--mode", choices=harness.MODES, default="in_dist")
    p.add_argument("--probe-size", type=int, default=500)
    p.add_argument("--steps", type=int, default=1500, help="subgradient steps for the linear methods")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${harness.THREADS_ENV} or 1)")
    return ap


REQUIRED = {"train": ("source",), "attribute": ("records",), "grid": ("target",)}


def _read_config(path) -> dict:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(ap, argv, args):
    cfg = _read_config(args.config)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in known or k in ("config", "help"):
            raise UsageError(f"unknown config key {k!r}")
        act = known[k]
        if act.nargs == 0:
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif act.nargs == "+":
            defaults[k] = v.split()
        else:
            conv = act.type or str
            try:
                defaults[k] = conv(v)
            except ValueError:
                raise UsageError(f"config key {k!r}: bad value {v!r}") from None
    sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        try:
            if args.config:
                args = _apply_config(ap, argv, args)
            _validate(args)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    except UsageError as exc:
        print(f"shiftkit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except (DataError, ValueError, FloatingPointError, OSError) as exc:
        print(f"error: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
