"""Input-independent network metrics: link-weight mean and variance,
directed node strength (in/out/total), and within-layer strength fluctuation.

Graph reading of each layer kind:

* dense: the usual bipartite graph, one edge per weight entry, the receiving
  node's bias added to every incident edge term;
* conv2d: every kernel element stands for exactly out_height*out_width
  physical edges (valid padding), so link statistics over the edge multiset
  reduce to statistics over kernel elements; an output neuron's in-strength
  sums the whole kernel slice feeding its channel (constant across positions),
  an input neuron's out-strength sums the kernel elements of every sliding
  window that covers it (boundary-aware);
* recurrent: sources are the per-step input features, edges are the input
  map (bias per edge) plus the bias-free hidden-to-hidden map; hidden nodes
  receive both maps' columns and emit the hidden map's rows.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import MetricError
from .network import LayerParams, Network

BIAS_MODES = ("per_edge", "per_node")


@dataclass
class NodeStrengthRecord:
    layer: int
    node: int
    s_in: float
    s_out: float
    s_total: float


@dataclass
class LayerStatRecord:
    layer: int
    mean: float
    variance: float
    fluctuation_in: float
    fluctuation_out: float
    fluctuation_total: float


def _dense_link_terms(p: LayerParams):
    if p.kind != "dense":
        raise MetricError(f"expected a dense layer, got {p.kind}")
    if p.weights.size == 0:
        raise MetricError("empty layer has no links")
    return p.weights + p.bias[None, :]


def link_weight_mean(p: LayerParams) -> float:
    """Mean of the per-link terms (w_ij + b_j) over all fan_in*fan_out links."""
    return float(_dense_link_terms(p).mean())


def link_weight_variance(p: LayerParams) -> float:
    """Population variance of the per-link terms around link_weight_mean."""
    terms = _dense_link_terms(p)
    return float(terms.var())


def _link_terms_any(p: LayerParams, lay):
    if p.kind == "dense":
        return _dense_link_terms(p).ravel()
    if p.kind == "conv2d":
        # weights [C, O, m, m]; one term per kernel element, bias of the
        # receiving out-channel on each
        terms = p.weights + p.bias[None, :, None, None]
        return terms.ravel()
    # recurrent: input map with per-edge bias, hidden map bias-free
    return np.concatenate([
        (p.weights + p.bias[None, :]).ravel(),
        p.recurrent_weights.ravel(),
    ])


def layer_link_stats(network: Network, layer: int):
    """(mean, variance) of the link-term multiset of parameterized layer
    ``layer`` (1-based), for any layer kind."""
    L = len(network.spec.layers)
    if not 1 <= layer <= L:
        raise MetricError(f"layer index {layer} out of range 1..{L}")
    terms = _link_terms_any(network.params[layer - 1], network.spec.layers[layer - 1])
    if terms.size == 0:
        raise MetricError("empty layer has no links")
    return float(terms.mean()), float(terms.var())


def _in_strength(p: LayerParams, lay, bias_mode):
    """s_in for the destination nodes of parameterized layer p."""
    if p.kind == "dense":
        edges = p.weights.shape[0]
        col = p.weights.sum(axis=0)
        return col + (edges * p.bias if bias_mode == "per_edge" else p.bias)
    if p.kind == "conv2d":
        per_channel = p.weights.sum(axis=(0, 2, 3))
        edges = p.weights.shape[0] * lay.kernel_size * lay.kernel_size
        per_channel = per_channel + (edges * p.bias if bias_mode == "per_edge" else p.bias)
        oh, ow = lay.out_height, lay.out_width
        return np.repeat(per_channel, oh * ow)
    # recurrent: columns of both maps; bias rides the input-map edges only
    edges = p.weights.shape[0]
    col = p.weights.sum(axis=0) + p.recurrent_weights.sum(axis=0)
    return col + (edges * p.bias if bias_mode == "per_edge" else p.bias)


def _out_strength(p: LayerParams, lay, width):
    """s_out for the source nodes of parameterized layer p (width nodes)."""
    if p.kind == "dense":
        return p.weights.sum(axis=1)
    if p.kind == "conv2d":
        ones = np.ones((1, lay.out_channels, lay.out_height, lay.out_width))
        cover = backend.conv_grad_input(p.weights, ones, lay.in_height, lay.in_width, lay.stride)
        return cover.reshape(-1)
    return p.weights.sum(axis=1)  # recurrent sources: input-map rows


def node_strength(network: Network, layer: int, bias_mode="per_edge"):
    """NodeStrengthRecords for every node of node layer ``layer`` (0..L).

    s_in sums incoming edge terms (receiving bias once per edge, or once per
    node under bias_mode='per_node'); s_out sums outgoing raw weights. The
    input layer has s_in = 0, the output layer s_out = 0; hidden nodes of a
    recurrent layer additionally emit/receive the hidden-to-hidden edges.
    """
    if bias_mode not in BIAS_MODES:
        raise MetricError(f"bias_mode must be one of {BIAS_MODES}, got {bias_mode!r}")
    spec = network.spec
    L = len(spec.layers)
    if not 0 <= layer <= L:
        raise MetricError(f"node layer index {layer} out of range 0..{L}")
    width = spec.node_layer_width(layer)
    s_in = np.zeros(width)
    s_out = np.zeros(width)
    if layer >= 1:
        s_in = np.asarray(
            _in_strength(network.params[layer - 1], spec.layers[layer - 1], bias_mode), dtype=np.float64
        )
    if layer < L:
        s_out = np.asarray(
            _out_strength(network.params[layer], spec.layers[layer], width), dtype=np.float64
        )
    if 1 <= layer < L and network.params[layer - 1].kind == "recurrent":
        s_out = s_out + network.params[layer - 1].recurrent_weights.sum(axis=1)
    if s_in.shape != (width,) or s_out.shape != (width,):
        raise MetricError(
            f"node layer {layer}: strength vectors {s_in.shape}/{s_out.shape} do not match width {width}"
        )
    return [
        NodeStrengthRecord(layer, k, float(s_in[k]), float(s_out[k]), float(s_in[k] + s_out[k]))
        for k in range(width)
    ]


def node_strength_arrays(network: Network, layer: int, bias_mode="per_edge"):
    """(s_in, s_out) as arrays; same semantics as node_strength."""
    recs = node_strength(network, layer, bias_mode)
    return (
        np.array([r.s_in for r in recs]),
        np.array([r.s_out for r in recs]),
    )


def layer_fluctuation(strengths) -> float:
    """Population standard deviation of a layer's node strengths."""
    s = np.asarray(strengths, dtype=np.float64)
    if s.size == 0:
        raise MetricError("layer_fluctuation needs a non-empty strength list")
    return float(np.sqrt(np.mean((s - s.mean()) ** 2)))


def layer_stats(network: Network, layer: int, bias_mode="per_edge") -> LayerStatRecord:
    """Link moments of parameterized layer ``layer`` plus the fluctuation of
    its destination nodes' strengths (in/out/total components separately)."""
    mean, var = layer_link_stats(network, layer)
    s_in, s_out = node_strength_arrays(network, layer, bias_mode)
    return LayerStatRecord(
        layer,
        mean,
        var,
        layer_fluctuation(s_in),
        layer_fluctuation(s_out),
        layer_fluctuation(s_in + s_out),
    )
