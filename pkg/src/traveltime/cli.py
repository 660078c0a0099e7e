"""Command-line driver for the network -> routes -> features -> forest pipeline.

Exit codes: 0 success, 1 data or model error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import formats as fmt
from .errors import TravelTimeError
from .evaluation import EvalReport, evaluate, kfold_cv, train_test_split
from .features import FEATURE_NAMES, feature_vector
from .forest import ForestParams, RegressionForest, fit_forest, mdi_importance, random_search
from .netmodel import DEFAULT_SPEEDS_KPH, load_speed_table
from .osm_ingest import build_network, parse_osm_xml
from .routing import ODPair, route_all, sample_od_pairs
from .synth import DelayModel, grid_network, synthetic_truth

DEFAULT_SPACE = {
    "n_trees": [100, 200, 400],
    "max_depth": [6, 8, 10, 12],
    "min_samples_split": [2, 5, 10],
    "max_features": [None, 6, 9],
}


class CliError(Exception):
    """Raised for problems the user should fix; mapped to exit code 1."""


def _threads(n: int) -> int:
    if n == 0:
        return os.cpu_count() or 1
    return n


def _require(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise CliError(f"{p}: input file does not exist")


def _params(args) -> ForestParams:
    return ForestParams(
        n_trees=args.trees,
        max_depth=args.max_depth,
        min_samples_split=args.min_split,
        max_features=args.max_features,
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )


def _training_data(features_path: str, ref_path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ids, X = fmt.read_features(features_path)
    y = fmt.align(ids, fmt.read_reference(ref_path), ref_path)
    return ids, X, y


# subcommands ---------------------------------------------------------------

def cmd_build(args) -> None:
    _require(args.osm, args.speeds)
    speeds = load_speed_table(args.speeds) if args.speeds else DEFAULT_SPEEDS_KPH
    nodes, ways = parse_osm_xml(args.osm)
    net = build_network(nodes, ways, speeds)
    fmt.save_network(net, args.out)
    print(f"network: {len(net.nodes)} nodes, {len(net.edges)} edges -> {args.out}", file=sys.stderr)


def cmd_synth_net(args) -> None:
    probs = json.loads(args.control_probs) if args.control_probs else None
    speeds = [float(s) for s in args.speed_set.split(",")] if args.speed_set else None
    kw = {} if speeds is None else {"speed_set": speeds}
    net = grid_network(args.rows, args.cols, args.seed, probs, **kw)
    fmt.save_network(net, args.out)


def cmd_sample_od(args) -> None:
    _require(args.net, args.od_whitelist)
    net = fmt.load_network(args.net)
    if args.od_whitelist:
        allowed = [
            (o, d) for o, d in fmt.read_whitelist(args.od_whitelist)
            if o != d and o in net.nodes and d in net.nodes
        ]
        if not allowed:
            raise CliError(f"{args.od_whitelist}: no usable origin/destination rows for {args.net}")
        rng = np.random.default_rng(args.seed)
        picks = rng.integers(0, len(allowed), size=args.count)
        pairs = [ODPair(i, *allowed[j]) for i, j in enumerate(picks)]
    else:
        pairs = sample_od_pairs(net, args.count, args.seed)
    fmt.write_od(args.out, pairs)


def cmd_route(args) -> None:
    _require(args.net, args.od)
    net = fmt.load_network(args.net)
    pairs = fmt.read_od(args.od)
    for p in pairs:
        for n in (p.origin, p.destination):
            if n not in net.nodes:
                raise CliError(f"{args.od}: pair_id {p.pair_id} references node {n} absent from {args.net}")
    pairs.sort(key=lambda p: p.pair_id)
    routes = route_all(net, pairs, threads=_threads(args.threads))
    fmt.write_routes(args.out, [p.pair_id for p in pairs], routes)


def cmd_features(args) -> None:
    _require(args.net, args.routes)
    net = fmt.load_network(args.net)
    ids, vectors = [], []
    for pid, route in fmt.read_routes(args.routes):
        missing = [n for n in route.node_seq if n not in net.nodes]
        if missing:
            raise CliError(f"{args.routes}: pair_id {pid} visits node {missing[0]} absent from {args.net}")
        ids.append(pid)
        vectors.append(feature_vector(net, route))
    fmt.write_features(args.out, ids, vectors)


def cmd_synth_ref(args) -> None:
    _require(args.features, args.delay_model)
    model = DelayModel.load(args.delay_model) if args.delay_model else DelayModel()
    ids, X = fmt.read_features(args.features)
    fvs = fmt.feature_vectors_from_matrix(X)
    truth = [synthetic_truth(fv, model, args.seed, int(pid)) for pid, fv in zip(ids, fvs)]
    fmt.write_pairs(args.out, fmt.REFERENCE_HEADER, ids, truth)


def cmd_split(args) -> None:
    _require(args.features)
    ids, X = fmt.read_features(args.features)
    train, test = train_test_split(len(ids), args.test_fraction, args.seed)
    for rows, out in ((np.sort(train), args.train_out), (np.sort(test), args.test_out)):
        fmt.write_features(out, ids[rows].tolist(), fmt.feature_vectors_from_matrix(X[rows]))


def cmd_train(args) -> None:
    _require(args.features, args.ref)
    _, X, y = _training_data(args.features, args.ref)
    forest = fit_forest(X, y, _params(args), FEATURE_NAMES, threads=_threads(args.threads))
    fmt._ensure_parent(args.out)
    forest.save(args.out)


def cmd_tune(args) -> None:
    _require(args.features, args.ref, args.space)
    _, X, y = _training_data(args.features, args.ref)
    space = DEFAULT_SPACE
    if args.space:
        try:
            space = json.loads(Path(args.space).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.space}: not valid JSON ({exc})") from None
    result = random_search(X, y, space, args.budget, args.folds, args.seed, base=_params(args))
    out = {
        "best_params": asdict(result.best_params),
        "best_cv_mae_s": result.best_mae,
        "trials": [{"params": asdict(p), "cv_mae_s": m} for p, m in result.trials],
    }
    fmt._ensure_parent(args.out).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def cmd_predict(args) -> None:
    _require(args.features, args.model)
    ids, X = fmt.read_features(args.features)
    if args.naive:
        pred = X[:, FEATURE_NAMES.index("naive_tt_s")]
    else:
        if not args.model:
            raise CliError("predict needs --model unless --naive is given")
        forest = RegressionForest.load(args.model)
        pred = forest.predict(X)
    fmt.write_pairs(args.out, fmt.PREDICTION_HEADER, ids, pred)


def _report_dict(report: EvalReport, args) -> dict:
    d = report.to_dict()
    d["model_id"] = args.model_id or Path(args.pred).stem
    d["dataset_id"] = args.dataset_id or Path(args.ref).stem
    d["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return d


def cmd_evaluate(args) -> None:
    _require(args.pred, args.ref, args.baseline)
    ref = fmt.read_reference(args.ref)
    pred = fmt.read_predictions(args.pred)
    ids = sorted(pred)
    actual = fmt.align(ids, ref, args.ref)
    p = fmt.align(ids, pred, args.pred)
    report = evaluate(p, actual)
    out = _report_dict(report, args)
    base = None
    if args.baseline:
        b = fmt.align(ids, fmt.read_predictions(args.baseline), args.baseline)
        base = evaluate(b, actual)
        out["baseline"] = base.to_dict()
    path = fmt._ensure_parent(args.out)
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    if not args.no_figures:
        from . import plotting

        stem = path.with_suffix("")
        plotting.prediction_scatter(actual, p, f"{stem}_scatter.png", None if base is None else b)
        plotting.metric_comparison(report, f"{stem}_metrics.png", base)
    print(
        f"n={report.n} MAPE={report.mape_pct:.2f}% MAE={report.mae_s:.2f}s "
        f"delta={report.delta_s:.2f}s p={report.p_value} APR={report.apr:.3f} R2={report.r2}",
        file=sys.stderr,
    )


def cmd_cv(args) -> None:
    _require(args.features, args.ref)
    _, X, y = _training_data(args.features, args.ref)
    maes = kfold_cv(X, y, _params(args), args.folds, args.seed, threads=_threads(args.threads))
    fmt.write_csv(args.out, ("fold", "mae_s"), ((i, m) for i, m in enumerate(maes)))
    if not args.no_figures:
        from . import plotting

        plotting.fold_errors(maes, Path(args.out).with_suffix(".png"))


def cmd_importance(args) -> None:
    _require(args.model)
    forest = RegressionForest.load(args.model)
    imp = mdi_importance(forest)
    if imp.no_splits:
        print("warning: no tree in the model has a split; weights are all zero", file=sys.stderr)
    fmt.write_csv(args.out, ("feature", "weight"), zip(forest.feature_names, imp.weights.tolist()))
    if not args.no_figures:
        from . import plotting

        plotting.importance_bars(list(forest.feature_names), imp.weights.tolist(), Path(args.out).with_suffix(".png"))


# parser --------------------------------------------------------------------

def _forest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=400)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--min-split", type=int, default=2)
    p.add_argument("--max-features", type=int, default=None, help="columns tried per split (default: all)")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traveltime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        return p

    p = add("build", cmd_build, "OSM XML -> network cache")
    p.add_argument("--osm", required=True)
    p.add_argument("--speeds", help="highway_class,kph fallback table")
    p.add_argument("--out", required=True)

    p = add("synth-net", cmd_synth_net, "synthetic lattice network")
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--control-probs", help='JSON object, e.g. {"Signal": 0.2}')
    p.add_argument("--speed-set", help="comma-separated km/h values")
    p.add_argument("--out", required=True)

    p = add("sample-od", cmd_sample_od, "sample origin-destination pairs")
    p.add_argument("--net", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--od-whitelist", help="CSV origin,destination restricting the draw")
    p.add_argument("--out", required=True)

    p = add("route", cmd_route, "shortest routes as JSON lines")
    p.add_argument("--net", required=True)
    p.add_argument("--od", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("features", cmd_features, "route features CSV")
    p.add_argument("--net", required=True)
    p.add_argument("--routes", required=True)
    p.add_argument("--out", required=True)

    p = add("synth-ref", cmd_synth_ref, "synthetic reference times")
    p.add_argument("--features", required=True)
    p.add_argument("--delay-model", help="DelayModel JSON (defaults otherwise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, "train/test split of a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)

    p = add("train", cmd_train, "fit a random forest")
    p.add_argument("--features", required=True)
    p.add_argument("--ref", required=True)
    _forest_flags(p)
    p.add_argument("--threads", type=int, default=1, help="0 = one per CPU")
    p.add_argument("--out", required=True)

    p = add("tune", cmd_tune, "randomised hyper-parameter search")
    p.add_argument("--features", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--space", help="JSON object of parameter -> candidate list")
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    _forest_flags(p)
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "predictions CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--model")
    p.add_argument("--naive", action="store_true", help="emit the naive_tt_s baseline instead")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "accuracy report JSON (+ figures)")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--baseline", help="second predictions CSV, e.g. from predict --naive")
    p.add_argument("--model-id")
    p.add_argument("--dataset-id")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)

    p = add("cv", cmd_cv, "k-fold cross-validated MAE")
    p.add_argument("--features", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--folds", type=int, default=5)
    _forest_flags(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)

    p = add("importance", cmd_importance, "MDI feature importance CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (CliError, TravelTimeError, OSError, ValueError) as exc:
        print(f"traveltime {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
