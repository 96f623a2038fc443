"""Network export/import as a JSON document.

Floats are emitted through Python's shortest round-trip repr (what json
uses natively), which preserves IEEE doubles bit-exactly within 17
significant digits, so export -> import reproduces identical parameters.
"""

import json
import os

import numpy as np

from .errors import DataFormatError, SpecError
from .network import LayerParams, Network
from .specs import ArchitectureSpec, LayerSpec

_SPEC_FIELDS = {
    "dense": ("fan_in", "fan_out"),
    "conv2d": ("in_channels", "in_height", "in_width", "out_channels", "kernel_size", "stride",
               "fan_in", "fan_out"),
    "recurrent": ("fan_in", "fan_out", "time_steps"),
}


def _spec_to_dict(spec: ArchitectureSpec):
    layers = []
    for lay in spec.layers:
        entry = {"kind": lay.kind}
        entry.update({f: getattr(lay, f) for f in _SPEC_FIELDS[lay.kind]})
        layers.append(entry)
    return {"kind": spec.kind, "activation": spec.activation, "task": spec.task, "layers": layers}


def _spec_from_dict(doc):
    try:
        layers = tuple(LayerSpec(**entry) for entry in doc["layers"])
        spec = ArchitectureSpec(kind=doc["kind"], layers=layers,
                                activation=doc["activation"], task=doc["task"])
        return spec.validate()
    except (KeyError, TypeError, SpecError) as exc:
        raise DataFormatError(f"malformed spec block: {exc}") from exc


def export_network(network: Network, path):
    network.check_shapes()
    layers = []
    for p in network.params:
        entry = {
            "kind": p.kind,
            "shape": list(p.weights.shape),
            "weights": p.weights.ravel().tolist(),
            "bias": p.bias.tolist(),
        }
        if p.recurrent_weights is not None:
            entry["recurrent_shape"] = list(p.recurrent_weights.shape)
            entry["recurrent_weights"] = p.recurrent_weights.ravel().tolist()
        layers.append(entry)
    doc = {
        "spec": _spec_to_dict(network.spec),
        "seed": network.seed,
        "init_std": network.init_std,
        "trained": network.trained,
        "layers": layers,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _array(entry, key, shape_key, name):
    if key not in entry:
        raise DataFormatError(f"{name}: missing {key!r} field")
    flat = np.asarray(entry[key], dtype=np.float64)
    if shape_key is None:
        return flat
    shape = tuple(entry.get(shape_key, ()))
    if not shape:
        raise DataFormatError(f"{name}: missing {shape_key!r} field")
    if flat.size != int(np.prod(shape)):
        raise DataFormatError(
            f"{name}: {key} length {flat.size} does not match shape {list(shape)}"
        )
    return flat.reshape(shape)


def import_network(path) -> Network:
    if not os.path.exists(path):
        raise DataFormatError(f"file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
    for key in ("spec", "seed", "init_std", "trained", "layers"):
        if key not in doc:
            raise DataFormatError(f"{path}: missing top-level field {key!r}")
    spec = _spec_from_dict(doc["spec"])
    if len(doc["layers"]) != len(spec.layers):
        raise DataFormatError(
            f"{path}: {len(doc['layers'])} layer blocks for {len(spec.layers)} spec layers"
        )
    params = []
    for i, entry in enumerate(doc["layers"], start=1):
        name = f"layer {i}"
        weights = _array(entry, "weights", "shape", name)
        bias = _array(entry, "bias", None, name)
        rec = None
        if entry.get("kind") == "recurrent" or "recurrent_weights" in entry:
            rec = _array(entry, "recurrent_weights", "recurrent_shape", name)
        params.append(LayerParams(weights=weights, bias=bias, recurrent_weights=rec))
    net = Network(
        spec=spec,
        params=params,
        trained=bool(doc["trained"]),
        seed=int(doc["seed"]),
        init_std=float(doc["init_std"]),
    )
    try:
        net.check_shapes()
    except Exception as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    return net
