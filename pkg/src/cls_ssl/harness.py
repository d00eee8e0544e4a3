"""Experiment runner: data preparation, config handling, result files and CLI.

Commands::

    cls-ssl run      --variant cls --dataset two_moons --n-labeled 8 --out runs/cls
    cls-ssl sweep    --variant cls,fixmatch --runs 5 --out runs/sweep
    cls-ssl selftest

Settings come from defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags (flags win).  Each run
directory receives ``metrics.jsonl``, ``summary.json``, ``curves.csv`` and
``timing.json``; wall-clock time is kept out of ``summary.json`` so that
identical runs produce byte-identical summaries.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    Standardizer,
    default_blob_centers,
    load_csv,
    make_blobs,
    make_two_moons,
    split_ssl,
    train_test_split,
)
from .errors import ConfigurationError, DataError, NumericError
from .trainer import VARIANTS, TrainConfig, TrainResult, train

log = logging.getLogger("cls_ssl")

CURVE_COLUMNS = ("iteration", "lr", "test_acc_net1", "test_acc_net2", "test_acc_mean",
                 "test_acc_ema")

# option name -> (type, default, TrainConfig field or None for data options)
OPTIONS = {
    "variant": (str, "cls", None),
    "dataset": (str, "two_moons", None),
    "n_labeled": (int, 8, None),
    "n_unlabeled": (int, 2000, None),
    "n_test": (int, 500, None),
    "data_noise": (float, None, None),
    "data_seed": (int, 0, None),
    "csv_header": (bool, False, None),
    "standardize": (bool, True, None),
    "alpha": (float, 0.03, "alpha"),
    "mu": (int, 8, "mu"),
    "batch": (int, 64, "B"),
    "iters": (int, 2000, "T_total"),
    "tau": (float, 0.85, "tau"),
    "lambda1": (float, 2.0, "lambda1"),
    "lambda2": (float, 1.0, "lambda2"),
    "gamma": (float, 0.95, "gamma"),
    "epsilon": (float, 0.5, "epsilon"),
    "seed1": (int, 1, None),
    "seed2": (int, 2, None),
    "sampler_seed": (int, 0, "sampler_seed"),
    "hidden": (str, "32,32", None),
    "momentum": (float, 0.9, "momentum"),
    "weight_decay": (float, 5e-4, "weight_decay"),
    "weak_noise": (float, 0.05, "weak_noise"),
    "strong_noise": (float, 0.2, "strong_noise"),
    "dropout": (float, 0.2, "dropout"),
    "scale_jitter": (float, 0.2, "scale_jitter"),
    "labeled_aug": (str, "weak", "labeled_aug"),
    "eval_every": (int, 50, "eval_every"),
    "ema_decay": (float, 0.999, "ema_decay"),
    "runs": (int, 5, None),
    "out": (str, "runs", None),
}


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _convert(name, raw):
    kind = OPTIONS[name][0]
    try:
        return _parse_bool(raw) if kind is bool else kind(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, keys may use dashes."""
    settings = {}
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = _convert(key, value)
    return settings


def resolve_settings(cli: dict, config_path=None) -> dict:
    settings = {name: entry[1] for name, entry in OPTIONS.items()}
    if config_path:
        settings.update(read_config_file(config_path))
    settings.update({k: v for k, v in cli.items() if v is not None and k in OPTIONS})
    return settings


def parse_variants(text) -> list[str]:
    variants = [v.strip() for v in str(text).split(",") if v.strip()]
    bad = [v for v in variants if v not in VARIANTS]
    if bad or not variants:
        raise ConfigurationError(f"unknown variant {', '.join(bad) or text!r}; valid variants: "
                                 + ", ".join(VARIANTS))
    return variants


def train_config(settings: dict, variant=None, run_index=0) -> TrainConfig:
    kwargs = {field: settings[name] for name, (_, _, field) in OPTIONS.items() if field}
    kwargs["variant"] = variant or settings["variant"]
    kwargs["hidden"] = tuple(int(h) for h in str(settings["hidden"]).split(",") if h.strip())
    kwargs["seeds"] = (settings["seed1"] + 100 * run_index, settings["seed2"] + 100 * run_index)
    kwargs["sampler_seed"] = settings["sampler_seed"] + run_index
    return TrainConfig(**kwargs)


@dataclass
class ExperimentData:
    labeled: Dataset
    unlabeled: object
    heldout_truth: np.ndarray
    test: Dataset
    description: dict


def build_data(settings: dict) -> ExperimentData:
    """Generate or load the dataset, hold out a test set and split labeled/unlabeled."""
    name, seed = settings["dataset"], settings["data_seed"]
    n_labeled, n_unlabeled, n_test = (settings["n_labeled"], settings["n_unlabeled"],
                                      settings["n_test"])
    noise = settings["data_noise"]
    if name == "two_moons":
        noise = 0.1 if noise is None else noise
        pool = make_two_moons(n_labeled + n_unlabeled, noise, seed)
        test = make_two_moons(n_test, noise, seed + 1)
    elif name == "blobs":
        noise = 1.0 if noise is None else noise
        centers = default_blob_centers()
        pool = make_blobs(n_labeled + n_unlabeled, centers, noise, seed)
        test = make_blobs(n_test, centers, noise, seed + 1)
    elif name.startswith("csv:"):
        full = load_csv(name[4:], header=settings["csv_header"])
        pool, test = train_test_split(full, n_test if n_test < len(full) else len(full) // 5,
                                      seed)
    else:
        raise ConfigurationError(f"unknown dataset {name!r}; use two_moons, blobs or csv:<path>")
    if settings["standardize"]:
        scale = Standardizer.fit(pool.features)
        pool = Dataset(scale(pool.features), pool.labels, pool.n_classes, pool.split)
        test = Dataset(scale(test.features), test.labels, test.n_classes, "test")
    labeled, unlabeled, truth = split_ssl(pool, n_labeled, seed)
    desc = {"dataset": name, "noise": noise, "data_seed": seed, "n_classes": pool.n_classes,
            "n_labeled": len(labeled), "n_unlabeled": len(unlabeled), "n_test": len(test)}
    return ExperimentData(labeled, unlabeled, truth, test, desc)


def summarize(config: TrainConfig, result: TrainResult, data: ExperimentData) -> dict:
    final = result.metrics[-1]

    def best(key):
        values = [getattr(m, key) for m in result.metrics if getattr(m, key) is not None]
        return max(values) if values else None

    return {
        "config": config.to_dict(),
        "data": data.description,
        "seeds": list(config.seeds),
        "iterations": config.T_total,
        "final": {"test_acc_net1": final.test_acc_net1, "test_acc_net2": final.test_acc_net2,
                  "test_acc_mean": final.test_acc_mean, "test_acc_ema": final.test_acc_ema},
        "best": {"test_acc_net1": best("test_acc_net1"), "test_acc_net2": best("test_acc_net2"),
                 "test_acc_mean": best("test_acc_mean")},
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_run(out_dir, config: TrainConfig, result: TrainResult, data: ExperimentData,
              wall_time: float) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in result.metrics:
            fh.write(json.dumps(rec.to_dict(), allow_nan=False) + "\n")
    with open(out / "curves.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for rec in result.metrics:
            row = rec.to_dict()
            writer.writerow(["" if row[c] is None else repr(row[c]) for c in CURVE_COLUMNS])
    summary = summarize(config, result, data)
    (out / "summary.json").write_text(_dump_json(summary), encoding="utf-8", newline="\n")
    (out / "timing.json").write_text(_dump_json({"wall_time_s": wall_time}), encoding="utf-8",
                                     newline="\n")
    return summary


def run_one(settings: dict, variant=None, run_index=0, out_dir=None, data=None) -> dict:
    config = train_config(settings, variant, run_index)
    data = data or build_data(settings)
    start = time.perf_counter()
    result = train(config, data.labeled, data.unlabeled, data.test)
    wall = time.perf_counter() - start
    summary = write_run(out_dir or settings["out"], config, result, data, wall)
    summary["wall_time_s"] = wall
    return summary


def _fmt(x):
    return "-" if x is None else f"{100 * x:.2f}"


def print_summary(summary: dict, stream=None):
    stream = stream or sys.stdout
    f = summary["final"]
    print(f"variant={summary['config']['variant']} seeds={summary['seeds']} "
          f"iters={summary['iterations']}", file=stream)
    print(f"  acc net1 {_fmt(f['test_acc_net1'])}  net2 {_fmt(f['test_acc_net2'])}  "
          f"mean {_fmt(f['test_acc_mean'])}  ema {_fmt(f['test_acc_ema'])}", file=stream)


def sweep(settings: dict, variants, runs, out_dir) -> dict:
    """Run every variant over ``runs`` seed pairs on one fixed data split."""
    data = build_data(settings)
    out = Path(out_dir)
    table = {}
    for variant in variants:
        accs = []
        for r in range(runs):
            s = run_one(settings, variant, r, out / variant / f"run{r}", data)
            accs.append(s["final"]["test_acc_mean"])
            log.info("%s run %d: %.4f (%.1fs)", variant, r, accs[-1], s["wall_time_s"])
        table[variant] = {"accs": accs, "mean": float(np.mean(accs)),
                          "std": float(np.std(accs))}
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_summary.json").write_text(
        _dump_json({"data": data.description, "runs": runs, "results": table}),
        encoding="utf-8", newline="\n")
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "mean_acc", "std_acc", "runs"])
        for variant, row in table.items():
            writer.writerow([variant, repr(row["mean"]), repr(row["std"]), runs])
    return table


def format_table(table: dict) -> str:
    lines = [f"{'variant':<16} {'accuracy (%)':>18}"]
    for variant, row in table.items():
        lines.append(f"{variant:<16} {100 * row['mean']:>9.2f} +- {100 * row['std']:<5.2f}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cls-ssl",
                                     description="Cross-labeling semi-supervised experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value settings file")
        for opt, (kind, default, _) in OPTIONS.items():
            if opt == "runs" and name == "run":
                continue
            flag = "--" + opt.replace("_", "-")
            if opt == "batch":
                flag = "--batch"
            if kind is bool:
                p.add_argument(flag, dest=opt, type=_parse_bool, default=None,
                               metavar="BOOL")
            else:
                p.add_argument(flag, dest=opt, type=str, default=None,
                               help=f"default: {default}")
        p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def run_experiment(argv=None) -> int:
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest
        return 0 if run_selftest() else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        raw = {k: v for k, v in vars(args).items() if k in OPTIONS and v is not None}
        cli = {k: v if isinstance(v, bool) else _convert(k, v) for k, v in raw.items()}
        settings = resolve_settings(cli, args.config)
        variants = parse_variants(settings["variant"])
        if args.command == "run":
            if len(variants) != 1:
                raise ConfigurationError("run takes a single variant; use sweep for several")
            summary = run_one(settings, variants[0])
            print_summary(summary)
        else:
            table = sweep(settings, variants, settings["runs"], settings["out"])
            print(format_table(table))
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: training diverged at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run_experiment())
