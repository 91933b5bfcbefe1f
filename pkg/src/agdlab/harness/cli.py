"""Command-line entry point: ``agdlab train|verify|bench``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..agd import TrainingDiverged, train
from ..network import NetworkConfig
from ..objective import LossKind
from ..verify import UNCONDITIONAL, bounds_campaign, check_convergence, majorisation_campaign
from .data import (
    find_cifar10_dir,
    load_cifar10_binary,
    load_csv_dataset,
    normalize_dataset,
    synth_teacher_dataset,
)
from .io import run_root, write_metrics_csv, write_metrics_jsonl, write_reports_jsonl

logger = logging.getLogger("agdlab")

TRAIN_DEFAULTS = {
    "loss": "square",
    "optimiser": "agd",
    "lr": None,
    "epochs": 1,
    "batch": None,
    "seed": 0,
    "data": "synth",
    "n": 512,
    "subset": None,
    "out": None,
}


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be comma-separated integers, got {text!r}")
    if len(dims) < 2 or min(dims) < 1:
        raise argparse.ArgumentTypeError("dims needs at least two positive widths")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agdlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and write metrics")
    p.add_argument("--config", type=Path, help="JSON file of defaults for the flags below")
    p.add_argument("--dims", type=_dims, help="widths d_0,...,d_L")
    p.add_argument("--loss", choices=[k.value for k in LossKind])
    p.add_argument("--optimiser", choices=["agd", "gd"])
    p.add_argument("--lr", type=float, help="learning rate for gd")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int, help="mini-batch size (default: full batch)")
    p.add_argument("--seed", type=int)
    p.add_argument("--data", help="'synth', 'cifar10[:DIR]' or a CSV path")
    p.add_argument("--n", type=int, help="number of synthetic samples")
    p.add_argument("--subset", type=int, help="keep the first N CIFAR-10 records")
    p.add_argument("--out", type=Path, help="output directory")

    p = sub.add_parser("verify", help="run randomized bound campaigns")
    p.add_argument("--campaign", choices=["bounds", "majorisation", "convergence"], default="bounds")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("bench", help="small width/depth/batch grid on synthetic data")
    p.add_argument("--widths", default="32,64")
    p.add_argument("--depths", default="2,4")
    p.add_argument("--batches", default="32,128")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--d-in", type=int, default=32)
    p.add_argument("--d-out", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    return parser


def _resolve_train_args(args) -> dict:
    """Flags override config file values, which override defaults."""
    opts = dict(TRAIN_DEFAULTS)
    if args.config is not None:
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - set(TRAIN_DEFAULTS) - {"dims"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "dims" in cfg:
            cfg["dims"] = _dims(cfg["dims"]) if isinstance(cfg["dims"], str) else tuple(cfg["dims"])
        opts.update(cfg)
    for key in list(TRAIN_DEFAULTS) + ["dims"]:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if opts.get("dims") is None:
        raise ValueError("--dims is required (flag or config file)")
    if opts["optimiser"] == "gd" and not opts["lr"]:
        raise ValueError("--lr is required for --optimiser gd")
    if opts["epochs"] < 0:
        raise ValueError("--epochs must be non-negative")
    return opts


def _load_data(opts, config: NetworkConfig):
    source = opts["data"]
    if source == "synth":
        return synth_teacher_dataset(config, opts["n"], opts["seed"]), None
    if source.startswith("cifar10"):
        _, _, directory = source.partition(":")
        directory = Path(directory) if directory else find_cifar10_dir()
        if directory is None:
            raise FileNotFoundError("CIFAR-10 binaries not found; set AGDLAB_CIFAR10_DIR")
        train_set = normalize_dataset(load_cifar10_binary(directory, subset=opts["subset"]))
        test_set = None
        if (directory / "test_batch.bin").is_file():
            test_set = normalize_dataset(load_cifar10_binary(directory, subset=opts["subset"], train=False))
        return train_set, test_set
    return normalize_dataset(load_csv_dataset(source, config.dims[0], config.dims[-1])), None


def _out_dir(path: Path | None, name: str) -> Path:
    out = path if path is not None else run_root() / f"{name}-{time.strftime('%Y%m%d-%H%M%S')}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    opts = _resolve_train_args(args)
    config = NetworkConfig(opts["dims"])
    data, test = _load_data(opts, config)
    out = _out_dir(opts["out"] and Path(opts["out"]), "train")
    status = 0
    try:
        result = train(
            config,
            data,
            kind=opts["loss"],
            epochs=opts["epochs"],
            batch_size=opts["batch"],
            seed=opts["seed"],
            optimiser=opts["optimiser"],
            lr=opts["lr"],
            test_data=test,
        )
        metrics, epochs = result.metrics, result.epochs
    except TrainingDiverged as err:
        logger.error("%s", err)
        metrics, epochs, status = err.metrics, [], 3
    write_metrics_csv(metrics, out / "metrics.csv")
    write_metrics_jsonl(metrics, out / "metrics.jsonl")
    with open(out / "epochs.jsonl", "w") as fh:
        for e in epochs:
            fh.write(json.dumps(e.__dict__) + "\n")
    with open(out / "config.json", "w") as fh:
        json.dump({**opts, "dims": list(opts["dims"]), "out": str(out)}, fh, indent=2)
    if epochs:
        last = epochs[-1]
        print(f"epoch {last.epoch}: objective {last.objective:.6g}, train acc {last.train_accuracy:.4f}")
    print(f"metrics written to {out}")
    return status


def cmd_verify(args) -> int:
    out = _out_dir(args.out, f"verify-{args.campaign}")
    path = out / f"{args.campaign}.jsonl"
    if args.campaign == "bounds":
        reports = list(bounds_campaign(args.instances, args.seed))
    elif args.campaign == "majorisation":
        reports = list(majorisation_campaign(args.instances, args.seed))
    else:
        return _verify_convergence(args, out)
    write_reports_jsonl(reports, path)
    violations = [r for r in reports if not r.satisfied]
    hard = [r for r in violations if r.name in UNCONDITIONAL or r.name == "gradient_summary_bound"]
    by_name: dict[str, list[int]] = {}
    for r in reports:
        by_name.setdefault(r.name, [0, 0])
        by_name[r.name][0] += 1
        by_name[r.name][1] += not r.satisfied
    for name, (total, bad) in sorted(by_name.items()):
        print(f"{name:34s} {total:7d} checks {bad:5d} violations")
    print(f"reports written to {path}")
    return 1 if hard else 0


def _verify_convergence(args, out: Path) -> int:
    """Full-batch AGD runs on teacher data, each checked against the 11/T rate."""
    rng = np.random.default_rng(args.seed)
    failures = 0
    with open(out / "convergence.jsonl", "w") as fh:
        for i in range(args.instances):
            depth = int(rng.integers(1, 5))
            dims = tuple(int(d) for d in rng.integers(2, 33, size=depth + 1))
            config = NetworkConfig(dims)
            data = synth_teacher_dataset(config, 64, int(rng.integers(1 << 31)))
            result = train(config, data, epochs=100, seed=int(rng.integers(1 << 31)))
            rep = check_convergence(result.metrics, config)
            failures += not rep.critical_rate_holds
            fh.write(json.dumps({"instance_id": i, "dims": dims, **rep.__dict__}) + "\n")
    print(f"{args.instances} runs, {failures} violations of min G^2 <= 11/T")
    return 1 if failures else 0


def cmd_bench(args) -> int:
    out = _out_dir(args.out, "bench")
    widths = [int(w) for w in args.widths.split(",")]
    depths = [int(d) for d in args.depths.split(",")]
    batches = [int(b) for b in args.batches.split(",")]
    rows = []
    for depth in depths:
        for width in widths:
            dims = (args.d_in,) + (width,) * (depth - 1) + (args.d_out,)
            config = NetworkConfig(dims)
            data = synth_teacher_dataset(config, args.n, args.seed)
            for batch in batches:
                result = train(config, data, epochs=args.epochs, batch_size=batch, seed=args.seed)
                last = result.epochs[-1]
                rows.append(
                    {
                        "depth": depth,
                        "width": width,
                        "batch": batch,
                        "objective": last.objective,
                        "train_acc": last.train_accuracy,
                        "eta_mean": last.eta_mean,
                    }
                )
                print(
                    f"depth {depth:2d} width {width:5d} batch {batch:5d} "
                    f"objective {last.objective:.5f} train acc {last.train_accuracy:.3f}"
                )
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"bench results written to {out / 'bench.csv'}")
    return 0


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"train": cmd_train, "verify": cmd_verify, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (ValueError, FileNotFoundError) as err:
        parser.print_usage(sys.stderr)
        print(f"agdlab {args.command}: error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
