"""Command-line pipeline: ingest -> cluster -> train -> evaluate -> explain,
plus synthetic data generation.

Configuration precedence is flags > config file > built-in defaults. Every
stage writes a provenance record (seed, config hash, library versions) next
to its output artifact. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure; failures emit one machine-parseable JSON line on
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict

import numpy as np

from . import __version__
from .clustering import (
    HdbscanParams,
    assign_dataset,
    load_assignments,
    save_assignments,
    tune_clustering,
)
from .data import Dataset, filter_min_tweets, load_jsonl, write_jsonl
from .errors import (
    ConfigurationError,
    ConsistencyError,
    DataError,
    InputError,
    NarrationDepError,
    NumericalError,
    UsageError,
)
from .explain import build_report, export_report
from .metrics import confusion, cross_validate, prf1_accuracy
from .model import (
    ModelDims,
    NarrationDepClassifier,
    TrainConfig,
    config_hash,
    load_checkpoint,
    predict_user,
    save_checkpoint,
    train,
)
from .synth import (synth_generate, synth_theme_mixture, synth_two_signal,
                    synth_variable_density)

DEFAULTS: Dict[str, object] = {
    "seed": 0,
    "epochs": 10,
    "lr": 0.001,
    "dropout": 0.5,
    "batch_size": 16,
    "d_hidden": 8,
    "e_max": 30,
    "clusterer": "hdbscan",
    "min_cluster_size": 3,
    "min_samples": 1,
    "metric": "euclidean",
    "kmeans_k": 4,
    "tune_budget": 0,
    "branch": "joint",
    "share_word_level": True,
    "folds": 5,
    "min_tweets": 10,
    "n_users": 40,
    "tweets_per_user": 12,
    "d_w": 8,
    "n_themes": 3,
    "noise_sigma": 0.05,
    "synth_kind": "themed",
}

_CONFIG_FLAGS = [
    ("--seed", int), ("--epochs", int), ("--lr", float), ("--dropout", float),
    ("--batch-size", int), ("--d-hidden", int), ("--e-max", int),
    ("--clusterer", str), ("--min-cluster-size", int), ("--min-samples", int),
    ("--metric", str), ("--kmeans-k", int), ("--tune-budget", int),
    ("--branch", str), ("--folds", int), ("--min-tweets", int),
    ("--n-users", int), ("--tweets-per-user", int), ("--d-w", int),
    ("--n-themes", int), ("--noise-sigma", float), ("--synth-kind", str),
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="narrationdep", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands = {
        "synth": "generate a synthetic embedding file",
        "ingest": "validate an embedding file and print stats",
        "cluster": "write per-user cluster assignments",
        "train": "train a model and save a checkpoint",
        "evaluate": "cross-validate, or score a checkpoint",
        "explain": "export a narrative report for one user",
        "pipeline": "run every stage end to end",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None,
                       help="flat JSON config file; flags override it")
        p.add_argument("--data", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        for flag, typ in _CONFIG_FLAGS:
            p.add_argument(flag, type=typ, default=None)
        if name in ("train", "evaluate", "explain"):
            p.add_argument("--assignments", type=str, default=None)
        if name in ("evaluate", "explain"):
            p.add_argument("--checkpoint", type=str, default=None)
        if name == "explain":
            p.add_argument("--user-id", type=str, default=None)
            p.add_argument("--granularity", type=str, default="weekday",
                           choices=["weekday", "hour"])
            p.add_argument("--format", type=str, default="json",
                           choices=["json", "csv"])
        if name == "pipeline":
            p.add_argument("--out-dir", type=str, default=None)
    return parser


def _resolve_config(args: argparse.Namespace) -> Dict[str, object]:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise DataError(f"config file not found: {path}")
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"config file is not valid JSON: {exc.msg}") from exc
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            cfg[key] = flag_value
    if cfg["clusterer"] not in ("hdbscan", "kmeans"):
        raise UsageError(f"--clusterer must be hdbscan or kmeans, got {cfg['clusterer']}")
    return cfg


def _provenance(out_path: Path, cfg: Dict[str, object]) -> None:
    record = {
        "seed": cfg["seed"],
        "config_hash": config_hash(cfg),
        "versions": {
            "narrationdep": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    prov = out_path.with_name(out_path.name + ".provenance.json")
    prov.write_text(json.dumps(record, sort_keys=True) + "\n", encoding="utf-8")


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"missing required flag {flag}")
    return value


def _load_data(cfg: Dict[str, object], data_path: str | None) -> Dataset:
    path = _require(data_path, "--data")
    dataset = load_jsonl(path)
    return dataset


def _hdb_params(cfg: Dict[str, object]) -> HdbscanParams:
    return HdbscanParams(min_cluster_size=int(cfg["min_cluster_size"]),
                         min_samples=int(cfg["min_samples"]),
                         metric=str(cfg["metric"]))


def _estimator(cfg: Dict[str, object]) -> NarrationDepClassifier:
    return NarrationDepClassifier(
        d_hidden=int(cfg["d_hidden"]), epochs=int(cfg["epochs"]),
        lr=float(cfg["lr"]), dropout=float(cfg["dropout"]),
        batch_size=int(cfg["batch_size"]), seed=int(cfg["seed"]),
        e_max=int(cfg["e_max"]), clusterer=str(cfg["clusterer"]),
        min_cluster_size=int(cfg["min_cluster_size"]),
        min_samples=int(cfg["min_samples"]), metric=str(cfg["metric"]),
        kmeans_k=int(cfg["kmeans_k"]), tune_budget=int(cfg["tune_budget"]),
        branch=str(cfg["branch"]),
        share_word_level=bool(cfg["share_word_level"]))


def cmd_synth(args, cfg) -> int:
    out = Path(_require(args.out, "--out"))
    kind = str(cfg["synth_kind"])
    common = dict(n_users=int(cfg["n_users"]),
                  tweets_per_user=int(cfg["tweets_per_user"]),
                  d_w=int(cfg["d_w"]), n_themes=int(cfg["n_themes"]),
                  seed=int(cfg["seed"]))
    if kind == "themed":
        dataset = synth_generate(noise_sigma=float(cfg["noise_sigma"]), **common)
    elif kind == "two-signal":
        dataset = synth_two_signal(noise_sigma=float(cfg["noise_sigma"]), **common)
    elif kind == "variable-density":
        dataset = synth_variable_density(**common)
    elif kind == "theme-mixture":
        dataset = synth_theme_mixture(n_users=int(cfg["n_users"]),
                                      d_w=int(cfg["d_w"]), seed=int(cfg["seed"]),
                                      noise_sigma=float(cfg["noise_sigma"]))
    else:
        raise UsageError(f"unknown synth kind {kind!r}")
    write_jsonl(dataset, out)
    _provenance(out, cfg)
    print(json.dumps({"users": len(dataset.users), "d_w": dataset.d_w,
                      "path": str(out)}))
    return 0


def cmd_ingest(args, cfg) -> int:
    dataset = _load_data(cfg, args.data)
    labels = dataset.labels() if dataset.users else np.array([], dtype=int)
    stats = {
        "users": len(dataset.users),
        "d_w": dataset.d_w,
        "depressed": int((labels == 1).sum()),
        "non_depressed": int((labels == 0).sum()),
        "tweets": int(sum(len(u.tweets) for u in dataset.users)),
        "min_tweets_per_user": int(min((len(u.tweets) for u in dataset.users),
                                       default=0)),
    }
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_cluster(args, cfg) -> int:
    dataset = filter_min_tweets(_load_data(cfg, args.data), int(cfg["min_tweets"]))
    out = Path(_require(args.out, "--out"))
    params = _hdb_params(cfg)
    if int(cfg["tune_budget"]) > 0 and cfg["clusterer"] == "hdbscan":
        n_val = max(1, len(dataset.users) // 5)
        params = tune_clustering(dataset.users[n_val:], dataset.users[:n_val],
                                 int(cfg["tune_budget"]), int(cfg["seed"]),
                                 e_max=int(cfg["e_max"]))
    assignments = assign_dataset(dataset, str(cfg["clusterer"]), params,
                                 kmeans_k=int(cfg["kmeans_k"]),
                                 e_max=int(cfg["e_max"]), seed=int(cfg["seed"]))
    save_assignments(assignments, out, params)
    _provenance(out, cfg)
    mean_e = float(np.mean([a.n_clusters for a in assignments.values()]))
    print(json.dumps({"users": len(assignments), "mean_clusters": mean_e,
                      "params": params.to_dict()}))
    return 0


def _train_config(cfg: Dict[str, object]) -> TrainConfig:
    return TrainConfig(lr=float(cfg["lr"]), dropout=float(cfg["dropout"]),
                       epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]),
                       seed=int(cfg["seed"]), d_hidden=int(cfg["d_hidden"]),
                       e_max=int(cfg["e_max"]), branch=str(cfg["branch"]),
                       share_word_level=bool(cfg["share_word_level"]))


def cmd_train(args, cfg) -> int:
    dataset = filter_min_tweets(_load_data(cfg, args.data), int(cfg["min_tweets"]))
    if not dataset.users:
        raise DataError("no users left after the minimum-tweet filter")
    out = Path(_require(args.out, "--out"))
    if args.assignments:
        assignments = load_assignments(args.assignments)
    else:
        assignments = assign_dataset(dataset, str(cfg["clusterer"]),
                                     _hdb_params(cfg),
                                     kmeans_k=int(cfg["kmeans_k"]),
                                     e_max=int(cfg["e_max"]),
                                     seed=int(cfg["seed"]))
    params, curve = train(dataset, assignments, _train_config(cfg))
    save_checkpoint(params, out, cfg_hash=config_hash(cfg))
    _provenance(out, cfg)
    print(json.dumps({"epochs": len(curve), "final_loss": curve[-1],
                      "checkpoint": str(out)}))
    return 0


def cmd_evaluate(args, cfg) -> int:
    dataset = filter_min_tweets(_load_data(cfg, args.data), int(cfg["min_tweets"]))
    out = args.out and Path(args.out)
    if args.checkpoint:
        params, _ = load_checkpoint(args.checkpoint)
        expect = ModelDims(d_w=dataset.d_w, d_hidden=int(cfg["d_hidden"]),
                           share_word_level=bool(cfg["share_word_level"]))
        if params.dims.to_dict() != expect.to_dict():
            raise DataError(
                f"checkpoint dims {params.dims.to_dict()} disagree with "
                f"configured dims {expect.to_dict()}")
        if args.assignments:
            assignments = load_assignments(args.assignments)
        else:
            assignments = assign_dataset(dataset, str(cfg["clusterer"]),
                                         _hdb_params(cfg),
                                         kmeans_k=int(cfg["kmeans_k"]),
                                         e_max=int(cfg["e_max"]),
                                         seed=int(cfg["seed"]))
        preds = [predict_user(u, assignments[u.user_id], params,
                              str(cfg["branch"]))[0] for u in dataset.users]
        metrics = prf1_accuracy(confusion(preds, [u.label for u in dataset.users]))
        payload = {"config_hash": config_hash(cfg),
                   "holdout": {"precision": metrics.precision,
                               "recall": metrics.recall, "f1": metrics.f1,
                               "accuracy": metrics.accuracy}}
    else:
        report = cross_validate(dataset, _estimator(cfg), k=int(cfg["folds"]),
                                seed=int(cfg["seed"]),
                                min_tweets=int(cfg["min_tweets"]))
        payload = {"config_hash": config_hash(cfg), "cv": report.to_dict()}
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        out.write_text(text, encoding="utf-8")
        _provenance(out, cfg)
    print(text, end="")
    return 0


def cmd_explain(args, cfg) -> int:
    dataset = _load_data(cfg, args.data)
    user_id = _require(args.user_id, "--user-id")
    ckpt = _require(args.checkpoint, "--checkpoint")
    out = Path(_require(args.out, "--out"))
    users = dataset.by_id()
    if user_id not in users:
        raise DataError(f"user {user_id!r} not present in {args.data}")
    user = users[user_id]
    params, _ = load_checkpoint(ckpt)
    if args.assignments:
        assignment = load_assignments(args.assignments)[user_id]
    else:
        single = Dataset(users=[user], d_w=dataset.d_w)
        assignment = assign_dataset(single, str(cfg["clusterer"]),
                                    _hdb_params(cfg),
                                    kmeans_k=int(cfg["kmeans_k"]),
                                    e_max=int(cfg["e_max"]),
                                    seed=int(cfg["seed"]))[user_id]
    _, _, trace = predict_user(user, assignment, params, str(cfg["branch"]))
    report = build_report(user, trace)
    export_report(report, out, fmt=args.format)
    _provenance(out, cfg)
    print(json.dumps({"user_id": user_id, "out": str(out),
                      "top_cluster": report.ranked_clusters[0].cluster_id}))
    return 0


def cmd_pipeline(args, cfg) -> int:
    out_dir = Path(_require(args.out_dir, "--out-dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = filter_min_tweets(_load_data(cfg, args.data), int(cfg["min_tweets"]))
    if not dataset.users:
        raise DataError("no users left after the minimum-tweet filter")

    ns = argparse.Namespace(**vars(args))
    ns.out = str(out_dir / "assignments.jsonl")
    cmd_cluster(ns, cfg)

    ns.out = str(out_dir / "model.ckpt.json")
    ns.assignments = str(out_dir / "assignments.jsonl")
    cmd_train(ns, cfg)

    ns.out = str(out_dir / "metrics.json")
    ns.checkpoint = None
    ns.assignments = None
    cmd_evaluate(ns, cfg)

    ns.out = str(out_dir / "report.json")
    ns.checkpoint = str(out_dir / "model.ckpt.json")
    ns.assignments = str(out_dir / "assignments.jsonl")
    ns.user_id = dataset.users[0].user_id
    ns.format = "json"
    cmd_explain(ns, cfg)
    return 0


_DISPATCH: Dict[str, Callable] = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "pipeline": cmd_pipeline,
}


def _diag(kind: str, code: int, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "code": code,
                                 "message": message}) + "\n")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (see --help)")
        cfg = _resolve_config(args)
        return _DISPATCH[args.command](args, cfg)
    except UsageError as exc:
        _diag("usage", 1, str(exc))
        return 1
    except ConfigurationError as exc:
        _diag("usage", 1, str(exc))
        return 1
    except (DataError, InputError, ConsistencyError, FileNotFoundError) as exc:
        _diag("data", 2, str(exc))
        return 2
    except NumericalError as exc:
        _diag("numerical", 3, str(exc))
        return 3
    except NarrationDepError as exc:
        _diag("error", 2, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
