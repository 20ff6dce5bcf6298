"""Command-line driver: zoo generation, training, evaluation, verification.

Every command writes a run manifest (command line, config hash, seed,
output files) before doing any work, so runs are reproducible post hoc.
Exit codes: 0 success, 1 property or assertion failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np

from .metanet import (MetanetConfig, build, evaluate, load_checkpoint,
                      save_checkpoint, train)
from .propverify import format_reports, run_suite
from .zoogen import augment_zoo, gen_mha_zoo, gen_mlp_zoo, load_zoo, save_zoo

DEFAULT_OUT_DIR = os.environ.get("WEIGHTSYM_OUT", ".")


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def write_manifest(path: str, args: argparse.Namespace,
                   outputs: list[str]) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    manifest = {
        "command": " ".join(sys.argv),
        "config": config,
        "config_hash": hashlib.sha256(blob).hexdigest(),
        "seed": getattr(args, "seed", None),
        "git": _git_describe(),
        "start": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": outputs,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def _finish_manifest(path: str) -> None:
    with open(path) as fh:
        manifest = json.load(fh)
    manifest["end"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


# -- zoo ----------------------------------------------------------------

def cmd_zoo(args) -> int:
    out = args.out
    manifest_path = out + ".manifest.json"
    csv_path = out + ".csv"
    write_manifest(manifest_path, args, [out, csv_path])
    if args.action == "gen":
        if args.task == "2d-two-class":
            zoo = gen_mlp_zoo(n=args.n, seed=args.seed)
        elif args.task == "seq-majority":
            zoo = gen_mha_zoo(n=args.n, seed=args.seed)
        else:
            print(f"unknown task {args.task!r}", file=sys.stderr)
            return 2
    else:  # augment
        zoo = load_zoo(args.zoo)
        zoo = augment_zoo(zoo, factor=args.factor, seed=args.seed,
                          scale_exp=args.scale_exp, gl_spread=args.gl_spread,
                          permute=not args.no_permute)
    save_zoo(zoo, out, manifest_path=csv_path)
    _finish_manifest(manifest_path)
    print(f"wrote {out} ({len(zoo.entries)} entries, "
          f"splits {zoo.split_counts()})")
    return 0


# -- train / eval -------------------------------------------------------

def _metrics_csv(path: str, rows: list[dict]) -> None:
    keys = sorted({k for r in rows for k in r})
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v
                        for k, v in r.items()})


def cmd_train(args) -> int:
    out = args.out
    manifest_path = out + ".manifest.json"
    metrics_path = out + ".metrics.csv"
    write_manifest(manifest_path, args, [out, metrics_path])
    zoo = load_zoo(args.zoo)
    if args.config:
        with open(args.config) as fh:
            cfg = MetanetConfig(**json.load(fh))
    else:
        cfg = MetanetConfig(arch=zoo.arch)
    cfg.seed = args.seed
    cfg.quasi = args.quasi == "on"
    if args.epochs is not None:
        cfg.epochs = args.epochs
    model = build(cfg)
    train(model, zoo,
          log=lambda e, l: print(f"epoch {e:3d} loss {l:.6f}", flush=True))
    save_checkpoint(model, out)
    rows = [{"epoch": i, "loss": loss} for i, loss in enumerate(model.history)]
    for split in ("train", "val", "test"):
        m = evaluate(model, zoo, split=split)
        m["split"] = split
        rows.append(m)
        print(f"{split}: tau {m['tau']:.4f} loss {m['loss']:.4f} n {m['n']}")
    _metrics_csv(metrics_path, rows)
    _finish_manifest(manifest_path)
    return 0


def cmd_eval(args) -> int:
    manifest_path = args.out + ".manifest.json"
    write_manifest(manifest_path, args, [args.out])
    model = load_checkpoint(args.checkpoint)
    zoo = load_zoo(args.zoo)
    m = evaluate(model, zoo, split=args.split, threshold=args.threshold)
    m["split"] = args.split
    m["threshold"] = args.threshold
    _metrics_csv(args.out, [m])
    _finish_manifest(manifest_path)
    print(f"{args.split}: tau {m['tau']:.4f} loss {m['loss']:.4f} n {m['n']}")
    return 0


# -- verify -------------------------------------------------------------

def cmd_verify(args) -> int:
    csv_path = args.out
    manifest_path = csv_path + ".manifest.json"
    write_manifest(manifest_path, args, [csv_path])
    reports = run_suite(seed=args.seed, samples=args.samples,
                        csv_path=csv_path)
    print(format_reports(reports))
    _finish_manifest(manifest_path)
    return 0 if all(r.passed for r in reports) else 1


# -- report -------------------------------------------------------------

def cmd_report(args) -> int:
    if not args.metrics:
        print("no metrics files given", file=sys.stderr)
        return 2
    out_csv = args.out
    manifest_path = out_csv + ".manifest.json"
    outputs = [out_csv]
    if args.plots:
        outputs += [out_csv + ".loss.svg", out_csv + ".tau.svg"]
    write_manifest(manifest_path, args, outputs)

    taus, histories = {}, {}
    for path in args.metrics:
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        hist = [float(r["loss"]) for r in rows if r.get("epoch")]
        test = [r for r in rows if r.get("split") == "test"]
        if test:
            taus.setdefault(path, float(test[0]["tau"]))
        if hist:
            histories[path] = hist
    if not taus:
        print("no test metrics found in inputs", file=sys.stderr)
        return 2
    values = np.array(list(taus.values()))
    mean = float(values.mean())
    sem = float(values.std(ddof=1) / np.sqrt(len(values))) \
        if len(values) > 1 else 0.0
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "test_tau"])
        for path, tau in sorted(taus.items()):
            w.writerow([path, repr(tau)])
        w.writerow(["mean", repr(mean)])
        w.writerow(["sem", repr(sem)])
    print(f"test tau over {len(values)} runs: {mean:.4f} +/- {sem:.4f}")

    if args.plots:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots()
        for path, hist in histories.items():
            ax.plot(hist, label=os.path.basename(path))
        ax.set_xlabel("epoch")
        ax.set_ylabel("train loss")
        ax.legend(fontsize=6)
        fig.savefig(out_csv + ".loss.svg")
        plt.close(fig)
        fig, ax = plt.subplots()
        ax.errorbar([0], [mean], yerr=[sem], fmt="o")
        ax.set_xticks([])
        ax.set_ylabel("test Kendall tau")
        fig.savefig(out_csv + ".tau.svg")
        plt.close(fig)
    _finish_manifest(manifest_path)
    return 0


# -- parser -------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="weightsym",
        description="weight-space symmetry zoos, metanetworks, verification")
    sub = p.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zoo", help="generate or augment a model zoo")
    z.add_argument("action", choices=["gen", "augment"])
    z.add_argument("--n", type=int, default=200)
    z.add_argument("--task", default="2d-two-class",
                   choices=["2d-two-class", "seq-majority"])
    z.add_argument("--zoo", help="input zoo (augment)")
    z.add_argument("--factor", type=int, default=2)
    z.add_argument("--scale-exp", type=int, default=1, choices=[1, 2, 3, 4])
    z.add_argument("--gl-spread", type=float, default=1.0)
    z.add_argument("--no-permute", action="store_true")
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--out", required=True)
    z.set_defaults(func=cmd_zoo)

    t = sub.add_parser("train", help="train a metanetwork on a zoo")
    t.add_argument("--zoo", required=True)
    t.add_argument("--config", help="json file of config overrides")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--quasi", choices=["on", "off"], default="on")
    t.add_argument("--epochs", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a zoo split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--zoo", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--threshold", type=float,
                   help="keep only entries with label >= threshold")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the property-check suite")
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out",
                   default=os.path.join(DEFAULT_OUT_DIR, "verify.csv"))
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="summarize metrics over seeds")
    r.add_argument("metrics", nargs="*")
    r.add_argument("--plots", action="store_true")
    r.add_argument("--out",
                   default=os.path.join(DEFAULT_OUT_DIR, "report.csv"))
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
