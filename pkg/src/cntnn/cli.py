"""Command-line entry points.

Subcommands: train-pool (train and serialize a pool), metrics (full
experiment: pool + all requested metrics), compare (two manifests, one
metric/layer), export (write a freshly initialized network for the config's
architecture), import (validate and summarize a serialized network).

Exit code 0 on success; on failure a single machine-readable JSON line
{"error": <type>, "message": <text>} goes to stderr and the exit code is 2.
"""

import argparse
import json
import sys

from .errors import TrainingDiverged
from .experiment import compare_experiments, load_config, resolve_config, run_experiment
from .network import build_network
from .serialize import export_network, import_network
from .specs import DATASET_GEOMETRY, default_architecture


def _common_flags(p):
    p.add_argument("--config", help="experiment config file (JSON)")
    p.add_argument("--data-root", help="directory holding the dataset files")
    p.add_argument("--out", help="output directory (or file for export)")
    p.add_argument("--seed", type=int, help="override the config's global seed")
    p.add_argument("--pool-size", type=int, help="override the config's pool size")


def _overrides(args):
    return {
        "data_root": args.data_root,
        "out": args.out,
        "seed": args.seed,
        "pool_size": args.pool_size,
    }


def _require(args, flag):
    value = getattr(args, flag.lstrip("-").replace("-", "_"))
    if value is None:
        raise SystemExit(f"error: {flag} is required for this subcommand")
    return value


def _run_pool(args, train_only):
    config = _require(args, "--config")
    manifest = run_experiment(config, _overrides(args), train_only=train_only)
    print(json.dumps({"manifest": manifest.path, "accuracy": manifest.accuracy}, sort_keys=True))
    return 0


def cmd_train_pool(args):
    return _run_pool(args, train_only=True)


def cmd_metrics(args):
    return _run_pool(args, train_only=False)


def cmd_compare(args):
    result = compare_experiments(args.manifest_a, args.manifest_b, args.metric, args.layer)
    line = json.dumps(result, sort_keys=True)
    print(line)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(line + "\n")
    return 0


def cmd_export(args):
    config = _require(args, "--config")
    out = _require(args, "--out")
    overrides = _overrides(args)
    overrides["out"] = "."  # resolver needs an output_dir; export writes only the network file
    cfg = resolve_config(load_config(config), overrides)
    ds = cfg["dataset"]
    if ds["name"] == "synthetic":
        geometry = {
            "input_dim": ds["feature_dim"],
            "classes": ds["class_count"],
            "image_shape": tuple(ds["image_shape"]) if ds["image_shape"] else None,
        }
    else:
        geometry = DATASET_GEOMETRY[ds["name"]]
    spec = default_architecture(
        cfg["architecture"]["kind"], ds["name"], cfg["architecture"]["depth"],
        cfg["architecture"]["activation"], geometry=geometry,
    )
    seed = cfg["seed"] if args.seed is None else args.seed
    net = build_network(spec, cfg["train"]["init_std"], seed)
    export_network(net, out)
    print(json.dumps({"written": out, "seed": seed, "n_parameters": net.n_parameters}))
    return 0


def cmd_import(args):
    net = import_network(args.path)
    print(json.dumps({
        "kind": net.spec.kind,
        "layers": len(net.spec.layers),
        "activation": net.spec.activation,
        "task": net.spec.task,
        "n_parameters": net.n_parameters,
        "trained": net.trained,
        "seed": net.seed,
    }, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cntnn",
        description="Train pools of small networks and compute complex-network metrics on them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-pool", help="train a seeded pool and serialize its networks")
    _common_flags(p)
    p.set_defaults(fn=cmd_train_pool)

    p = sub.add_parser("metrics", help="run a full experiment: pool, metrics, exports, manifest")
    _common_flags(p)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("compare", help="KS statistic and moment deltas between two runs")
    _common_flags(p)
    p.add_argument("manifest_a")
    p.add_argument("manifest_b")
    p.add_argument("--metric", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("export", help="write a freshly initialized network for the config's architecture")
    _common_flags(p)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("import", help="validate a serialized network and print its summary")
    _common_flags(p)
    p.add_argument("path")
    p.set_defaults(fn=cmd_import)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, TrainingDiverged, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
