"""Config-driven experiment orchestration.

A JSON config resolves to: load dataset -> build architecture -> train a
seeded pool -> aggregate requested metrics per layer -> write distribution
CSVs, correlation scatters, heatmaps, serialized networks, and a manifest
with a sha256 digest of every emitted file. Unknown config keys are errors
at every nesting level. Given one config (and one kernel backend), the
emitted file bytes are a pure function of the config.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .backend import KERNEL_BACKEND
from .data import dataset_from_root, sample_inputs, synthetic_dataset
from .datametrics import rnn_strength_heatmap
from .engine import TrainConfig
from .errors import ConfigError, DataFormatError, MetricError
from .population import (
    DATA_METRICS,
    METRICS,
    aggregate_metric,
    compare_trained_untrained,
    correlate,
    train_pool,
)
from .serialize import _spec_to_dict, export_network
from .specs import ACTIVATIONS, KINDS, default_architecture
from .stats import ks_statistic, population_moments

_TOP_KEYS = (
    "seed", "output_dir", "dataset", "architecture", "pool", "train", "sample_size",
    "bins", "metrics", "layers", "correlations", "include_untrained", "heatmap",
)
_DATASET_KEYS = ("name", "root", "seed", "count", "feature_dim", "class_count", "noise_std", "image_shape")
_ARCH_KEYS = ("kind", "depth", "activation")
_POOL_KEYS = ("size", "base_seed")
_TRAIN_KEYS = ("learning_rate", "momentum", "batch_size", "epochs", "loss", "init_std", "seed")

DEFAULT_DATA_ROOT_ENV = "CNT_DATA_ROOT"


def _reject_unknown(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigError(f"config section {path!r} must be an object, got {type(section).__name__}")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown} under {path!r}; allowed: {sorted(allowed)}")


def _want(value, types, path):
    tt = types if isinstance(types, tuple) else (types,)
    ok = isinstance(value, tt) and not (isinstance(value, bool) and bool not in tt)
    if not ok:
        names = "/".join(t.__name__ for t in tt)
        raise ConfigError(f"config key {path!r} must be {names}, got {value!r}")
    return value


def _get(section, key, types, default, path):
    if key not in section or section[key] is None:
        return default
    return _want(section[key], types, f"{path}.{key}")


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


def resolve_config(raw, overrides=None):
    """Fill every default, validate strictly, return a plain-dict snapshot."""
    overrides = overrides or {}
    raw = json.loads(json.dumps(raw))  # deep copy, JSON types only
    if overrides.get("seed") is not None:
        raw["seed"] = overrides["seed"]
    if overrides.get("out") is not None:
        raw["output_dir"] = overrides["out"]
    if overrides.get("data_root") is not None:
        raw.setdefault("dataset", {})["root"] = overrides["data_root"]
    if overrides.get("pool_size") is not None:
        raw.setdefault("pool", {})["size"] = overrides["pool_size"]

    _reject_unknown(raw, _TOP_KEYS, "<top>")
    seed = _get(raw, "seed", int, 0, "<top>")
    output_dir = raw.get("output_dir")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("config key 'output_dir' is required and must be a non-empty string")

    ds_raw = raw.get("dataset")
    if ds_raw is None:
        raise ConfigError("config section 'dataset' is required")
    _reject_unknown(ds_raw, _DATASET_KEYS, "dataset")
    name = _get(ds_raw, "name", str, None, "dataset")
    if name not in ("mnist", "cifar10", "synthetic"):
        raise ConfigError(f"config key 'dataset.name' must be mnist/cifar10/synthetic, got {name!r}")
    dataset = {"name": name}
    if name == "synthetic":
        dataset["seed"] = _get(ds_raw, "seed", int, seed, "dataset")
        dataset["count"] = _get(ds_raw, "count", int, 512, "dataset")
        dataset["feature_dim"] = _get(ds_raw, "feature_dim", int, 16, "dataset")
        dataset["class_count"] = _get(ds_raw, "class_count", int, 4, "dataset")
        dataset["noise_std"] = _get(ds_raw, "noise_std", (int, float), 0.05, "dataset")
        shape = _get(ds_raw, "image_shape", list, None, "dataset")
        if shape is not None:
            if len(shape) != 3 or not all(isinstance(v, int) and v > 0 for v in shape):
                raise ConfigError("config key 'dataset.image_shape' must be [channels, height, width]")
            if shape[0] * shape[1] * shape[2] != dataset["feature_dim"]:
                raise ConfigError(
                    f"dataset.image_shape {shape} does not factor feature_dim {dataset['feature_dim']}"
                )
        dataset["image_shape"] = shape
        for bad in ("root",):
            if bad in ds_raw:
                raise ConfigError("config key 'dataset.root' does not apply to synthetic data")
    else:
        dataset["root"] = _get(
            ds_raw, "root", str, os.environ.get(DEFAULT_DATA_ROOT_ENV, "./data"), "dataset"
        )
        for bad in ("count", "feature_dim", "class_count", "noise_std", "image_shape", "seed"):
            if bad in ds_raw:
                raise ConfigError(f"config key 'dataset.{bad}' only applies to synthetic data")

    arch_raw = raw.get("architecture")
    if arch_raw is None:
        raise ConfigError("config section 'architecture' is required")
    _reject_unknown(arch_raw, _ARCH_KEYS, "architecture")
    kind = _get(arch_raw, "kind", str, None, "architecture")
    if kind not in KINDS:
        raise ConfigError(f"config key 'architecture.kind' must be one of {KINDS}, got {kind!r}")
    activation = _get(arch_raw, "activation", str, "sigmoid", "architecture")
    if activation not in ACTIVATIONS:
        raise ConfigError(
            f"config key 'architecture.activation' must be one of {ACTIVATIONS}, got {activation!r}"
        )
    architecture = {"kind": kind, "depth": _get(arch_raw, "depth", int, 3, "architecture"),
                    "activation": activation}

    pool_raw = raw.get("pool") or {}
    _reject_unknown(pool_raw, _POOL_KEYS, "pool")
    pool = {
        "size": _get(pool_raw, "size", int, 5, "pool"),
        "base_seed": _get(pool_raw, "base_seed", int, seed, "pool"),
    }
    if pool["size"] < 1:
        raise ConfigError(f"config key 'pool.size' must be >= 1, got {pool['size']}")

    train_raw = raw.get("train") or {}
    _reject_unknown(train_raw, _TRAIN_KEYS, "train")
    cifar = name == "cifar10"
    train = {
        "learning_rate": _get(train_raw, "learning_rate", (int, float), 0.01, "train"),
        "momentum": _get(train_raw, "momentum", (int, float), 0.9, "train"),
        "batch_size": _get(train_raw, "batch_size", int, 64, "train"),
        "epochs": _get(train_raw, "epochs", int, 20 if cifar else 10, "train"),
        "loss": _get(train_raw, "loss", str, "mse" if kind == "AE" else "softmax_cross_entropy", "train"),
        "init_std": _get(train_raw, "init_std", (int, float), 0.5 if cifar else 0.05, "train"),
        "seed": _get(train_raw, "seed", int, seed, "train"),
    }

    metrics = raw.get("metrics")
    if metrics is None:
        metrics = ["link_mean", "link_variance", "node_strength_in", "node_strength_out",
                   "layer_fluctuation", "neuron_strength", "neuron_activation"]
    _want(metrics, list, "metrics")
    for m in metrics:
        if m not in METRICS:
            raise ConfigError(f"config key 'metrics' names unknown metric {m!r}; allowed: {list(METRICS)}")

    layers = raw.get("layers")
    if layers is not None:
        _want(layers, list, "layers")
        for l in layers:
            if not isinstance(l, int) or l < 0:
                raise ConfigError(f"config key 'layers' must list non-negative layer indices, got {l!r}")

    correlations = raw.get("correlations") or []
    _want(correlations, list, "correlations")
    parsed_corr = []
    for item in correlations:
        if not (isinstance(item, list) and len(item) == 3 and isinstance(item[2], int)):
            raise ConfigError(
                "config key 'correlations' entries must be [metric_a, metric_b, layer_index], "
                f"got {item!r}"
            )
        parsed_corr.append([str(item[0]), str(item[1]), item[2]])

    heatmap = raw.get("heatmap")
    if heatmap is None:
        heatmap = kind == "RNN" and bool(name in ("mnist", "cifar10") or dataset.get("image_shape"))
    _want(heatmap, bool, "heatmap")
    if heatmap and kind != "RNN":
        raise ConfigError("config key 'heatmap' requires an RNN architecture")

    return {
        "seed": seed,
        "output_dir": output_dir,
        "dataset": dataset,
        "architecture": architecture,
        "pool": pool,
        "train": train,
        "sample_size": _get(raw, "sample_size", int, 100, "<top>"),
        "bins": _get(raw, "bins", int, 100, "<top>"),
        "metrics": list(metrics),
        "layers": layers,
        "correlations": parsed_corr,
        "include_untrained": _get(raw, "include_untrained", bool, False, "<top>"),
        "heatmap": heatmap,
    }


def _load_datasets(cfg):
    ds = cfg["dataset"]
    if ds["name"] == "synthetic":
        shape = tuple(ds["image_shape"]) if ds["image_shape"] else None
        train = synthetic_dataset(ds["seed"], ds["count"], ds["feature_dim"], ds["class_count"],
                                  noise_std=ds["noise_std"])
        test = synthetic_dataset(ds["seed"] + 1, ds["count"], ds["feature_dim"], ds["class_count"],
                                 noise_std=ds["noise_std"], split="test")
        train.image_shape = shape
        test.image_shape = shape
        classes = ds["class_count"]
        return train.validate(classes), test.validate(classes), classes
    train = dataset_from_root(ds["name"], ds["root"], "train")
    try:
        test = dataset_from_root(ds["name"], ds["root"], "test")
    except DataFormatError as exc:
        if "not found" not in str(exc):
            raise
        test = None  # test split optional; accuracy table then reports train metric only
    return train, test, 10


def _geometry(dataset, classes):
    return {"input_dim": dataset.feature_dim, "classes": classes, "image_shape": dataset.image_shape}


def _applicable_layers(metric, explicit, L):
    if explicit is not None:
        if metric in DATA_METRICS or metric.startswith("link"):
            chosen = [l for l in explicit if 1 <= l <= L]
        else:
            chosen = [l for l in explicit if 0 <= l <= L]
        return chosen
    return list(range(1, L + 1))


class _Emitter:
    """Writes files under the output root and records their digests."""

    def __init__(self, root):
        self.root = root
        self.files = {}
        os.makedirs(root, exist_ok=True)

    def write(self, rel, text):
        path = os.path.join(self.root, rel)
        os.makedirs(os.path.dirname(path) or self.root, exist_ok=True)
        data = text.encode()
        with open(path, "wb") as fh:
            fh.write(data)
        self.files[rel] = hashlib.sha256(data).hexdigest()
        return path

    def register(self, rel):
        """Record the digest of a file another writer produced under root."""
        path = os.path.join(self.root, rel)
        with open(path, "rb") as fh:
            self.files[rel] = hashlib.sha256(fh.read()).hexdigest()
        return path

    def prepare(self, rel):
        path = os.path.join(self.root, rel)
        os.makedirs(os.path.dirname(path) or self.root, exist_ok=True)
        return path


def _float_csv(values, header="value"):
    lines = [header]
    lines.extend(repr(float(v)) for v in np.asarray(values).ravel())
    return "\n".join(lines) + "\n"


def _hist_csv(dist):
    lines = ["metric,layer,bin_left,bin_right,count"]
    for i in range(dist.counts.size):
        lines.append(
            f"{dist.metric},{dist.layer},{repr(float(dist.bin_edges[i]))},"
            f"{repr(float(dist.bin_edges[i + 1]))},{int(dist.counts[i])}"
        )
    return "\n".join(lines) + "\n"


def _summary_json(dist):
    return json.dumps(
        {"metric": dist.metric, "layer": dist.layer, "mean": dist.mean, "std": dist.std,
         "skewness": dist.skewness, "kurtosis": dist.kurtosis, "n": dist.n},
        sort_keys=True,
    ) + "\n"


def _emit_distribution(emitter, dist, prefix):
    emitter.write(f"{prefix}_values.csv", _float_csv(dist.values))
    emitter.write(f"{prefix}_hist.csv", _hist_csv(dist))
    emitter.write(f"{prefix}_summary.json", _summary_json(dist))


def _grid_csv(grid):
    return "\n".join(",".join(repr(float(v)) for v in row) for row in grid) + "\n"


@dataclass
class ExperimentManifest:
    path: str
    config: dict
    accuracy: list
    files: dict
    wall_time: float


def run_experiment(config_path, overrides=None, train_only=False) -> ExperimentManifest:
    """Execute a config end to end; returns the manifest (also written to
    <output_dir>/manifest.json). train_only skips metric computation."""
    started = time.perf_counter()
    cfg = resolve_config(load_config(config_path), overrides)
    train_ds, test_ds, classes = _load_datasets(cfg)
    spec = default_architecture(
        cfg["architecture"]["kind"],
        cfg["dataset"]["name"],
        cfg["architecture"]["depth"],
        cfg["architecture"]["activation"],
        geometry=_geometry(train_ds, classes),
    )
    train_config = TrainConfig(**cfg["train"])
    pool = train_pool(spec, cfg["pool"]["size"], cfg["pool"]["base_seed"], train_ds,
                      train_config, eval_dataset=test_ds)

    emitter = _Emitter(cfg["output_dir"])
    accuracy = []
    for m in pool.members:
        rel = f"networks/member_{m.index}.json"
        if not m.diverged:
            export_network(m.network, emitter.prepare(rel))
            emitter.register(rel)
        accuracy.append({
            "index": m.index,
            "seed": m.seed,
            "diverged": m.diverged,
            "train_metric": None if m.report is None else m.report.final_metric,
            "eval_metric": m.eval_metric,
            "network_file": None if m.diverged else rel,
        })
    emitter.write("pool.json", json.dumps(
        {"base_seed": pool.base_seed, "architecture": _spec_to_dict(spec), "members": accuracy},
        sort_keys=True,
    ) + "\n")

    samples_seed = cfg["seed"] + 100_000
    if not train_only:
        L = len(spec.layers)
        for metric in cfg["metrics"]:
            for layer in _applicable_layers(metric, cfg["layers"], L):
                prefix = f"{metric}_layer{layer}"
                if cfg["include_untrained"] and metric in DATA_METRICS:
                    dist, udist, ks = compare_trained_untrained(
                        pool, metric, layer, samples_seed, cfg["bins"], cfg["sample_size"]
                    )
                    _emit_distribution(emitter, udist, prefix + "_untrained")
                    emitter.write(
                        f"{prefix}_trained_vs_untrained.json",
                        json.dumps({"ks": ks, "metric": metric, "layer": layer}, sort_keys=True) + "\n",
                    )
                else:
                    dist = aggregate_metric(
                        pool, metric, layer, samples_seed, cfg["bins"], cfg["sample_size"]
                    )
                    if cfg["include_untrained"]:
                        udist = aggregate_metric(
                            pool, metric, layer, samples_seed, cfg["bins"], cfg["sample_size"],
                            untrained=True,
                        )
                        _emit_distribution(emitter, udist, prefix + "_untrained")
                        emitter.write(
                            f"{prefix}_trained_vs_untrained.json",
                            json.dumps(
                                {"ks": ks_statistic(dist.values, udist.values),
                                 "metric": metric, "layer": layer},
                                sort_keys=True,
                            ) + "\n",
                        )
                _emit_distribution(emitter, dist, prefix)

        for metric_a, metric_b, layer in cfg["correlations"]:
            rec = correlate(pool, metric_a, metric_b, layer, samples_seed, cfg["sample_size"])
            prefix = f"{metric_a}_vs_{metric_b}_layer{layer}"
            header = f"{metric_a},{metric_b}"
            lines = [header] + [f"{repr(float(x))},{repr(float(y))}" for x, y in rec.points]
            emitter.write(f"{prefix}_scatter.csv", "\n".join(lines) + "\n")
            emitter.write(f"{prefix}_corr.json", json.dumps(
                {"metric_a": metric_a, "metric_b": metric_b, "layer": layer,
                 "r": rec.r if rec.defined else None, "count": rec.count, "defined": rec.defined},
                sort_keys=True,
            ) + "\n")

        if cfg["heatmap"]:
            for trained, tag in ((True, "trained"), (False, "untrained")):
                if not trained and not cfg["include_untrained"]:
                    continue
                grids = []
                for member in pool.active_members():
                    batch = sample_inputs(train_ds, cfg["sample_size"], samples_seed + member.index)
                    net = member.network if trained else member.twin
                    grids.append(rnn_strength_heatmap(net, batch).grid)
                grid = np.mean(grids, axis=0)
                emitter.write(f"heatmap_{tag}.csv", _grid_csv(grid))
                emitter.write(f"heatmap_{tag}.json", json.dumps(
                    {"height": grid.shape[0], "width": grid.shape[1], "trained": trained,
                     "dataset": cfg["dataset"]["name"]},
                    sort_keys=True,
                ) + "\n")

    wall = time.perf_counter() - started
    manifest = {
        "config": cfg,
        "accuracy": accuracy,
        "files": emitter.files,
        "wall_time_seconds": wall,
        "kernel_backend": KERNEL_BACKEND,
    }
    path = os.path.join(emitter.root, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return ExperimentManifest(path, cfg, accuracy, emitter.files, wall)


def _load_manifest(path):
    if not os.path.exists(path):
        raise MetricError(f"manifest not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("config", "files"):
        if key not in doc:
            raise DataFormatError(f"{path}: not an experiment manifest (missing {key!r})")
    return doc


def _load_values(manifest_path, doc, metric, layer):
    rel = f"{metric}_layer{layer}_values.csv"
    if rel not in doc["files"]:
        raise MetricError(f"{manifest_path}: no values for metric {metric!r} at layer {layer}")
    path = os.path.join(os.path.dirname(manifest_path), rel)
    with open(path, "rb") as fh:
        data = fh.read()
    digest = hashlib.sha256(data).hexdigest()
    if digest != doc["files"][rel]:
        raise DataFormatError(f"{path}: content digest mismatch against manifest")
    lines = data.decode().strip().splitlines()[1:]
    return np.array([float(v) for v in lines])


def compare_experiments(manifest_a, manifest_b, metric, layer):
    """KS statistic plus moment deltas (b minus a) between two runs'
    pooled value sets for one metric at one layer."""
    doc_a = _load_manifest(manifest_a)
    doc_b = _load_manifest(manifest_b)
    va = _load_values(manifest_a, doc_a, metric, layer)
    vb = _load_values(manifest_b, doc_b, metric, layer)
    ma = population_moments(va)
    mb = population_moments(vb)
    return {
        "metric": metric,
        "layer": layer,
        "ks": ks_statistic(va, vb),
        "delta_mean": mb[0] - ma[0],
        "delta_std": mb[1] - ma[1],
        "delta_skewness": mb[2] - ma[2],
        "delta_kurtosis": mb[3] - ma[3],
        "n_a": int(va.size),
        "n_b": int(vb.size),
    }
