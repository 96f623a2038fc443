"""Data-dependent metrics: per-neuron strength (pre-activation under inputs
sampled from the training distribution) and activation, with the conv
patch-isolation path, a quadratic-cost Toeplitz test oracle, and the
recurrent temporal unfolding.

Strength at a layer is computed by propagating the sample through all
preceding layers with the traced forward pass, then applying that layer's
own affine map explicitly. The activation matrix applies the architecture's
activation function to the strength matrix at every layer, output included
(the traced forward pass, by contrast, leaves the output layer linear).
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .data import SampleBatch
from .engine import apply_activation, forward, layer_input
from .errors import MetricError, ShapeError
from .network import LayerParams, Network


@dataclass
class NeuronMetricMatrix:
    """Per-sample, per-neuron metric values for one layer.

    values is [samples, width] for dense/conv layers (conv neurons flatten
    channel-major) and [samples, time_steps, width] for recurrent layers.
    """

    layer: int
    kind: str
    values: np.ndarray
    seed: int


@dataclass
class StrengthHeatmap:
    """Mean absolute strength attributed to each input pixel position."""

    grid: np.ndarray
    trained: bool


def _check_param_layer(network, layer, expect=None):
    L = len(network.spec.layers)
    if not 1 <= layer <= L:
        raise MetricError(f"layer index {layer} out of range 1..{L}")
    kind = network.spec.layers[layer - 1].kind
    if expect and kind != expect:
        raise MetricError(f"layer {layer} is {kind}, expected {expect}")
    return network.spec.layers[layer - 1], network.params[layer - 1]


def neuron_strength(network: Network, samples: SampleBatch, layer: int) -> NeuronMetricMatrix:
    """Pre-activation of every neuron of dense layer ``layer`` per sample."""
    _, p = _check_param_layer(network, layer, expect="dense")
    trace = forward(network, samples.inputs, samples.image_shape)
    z_prev = layer_input(trace, network.spec, layer)
    z_prev = z_prev.reshape(z_prev.shape[0], -1)
    if z_prev.shape[1] != p.weights.shape[0]:
        raise ShapeError(
            f"layer {layer}: input width {z_prev.shape[1]} does not match fan_in {p.weights.shape[0]}"
        )
    zeta = z_prev @ p.weights + p.bias
    return NeuronMetricMatrix(layer, "strength", zeta, samples.seed)


def neuron_activation(network: Network, samples: SampleBatch, layer: int) -> NeuronMetricMatrix:
    """The architecture's activation applied element-wise to the strength
    matrix. Applies at every layer, the output included (unlike the traced
    forward pass, which leaves the output layer linear)."""
    out = neuron_strength(network, samples, layer)
    return NeuronMetricMatrix(
        out.layer, "activation", apply_activation(network.spec.activation, out.values), out.seed
    )


def conv_neuron_strength(network: Network, samples: SampleBatch, layer: int) -> NeuronMetricMatrix:
    """Per-output-neuron patch strengths of conv layer ``layer``: each value
    is one (input patch . kernel) + bias, laid out channel-major over the
    output map. Patch iteration only; no Toeplitz materialization."""
    lay, p = _check_param_layer(network, layer, expect="conv2d")
    trace = forward(network, samples.inputs, samples.image_shape)
    z_prev = layer_input(trace, network.spec, layer)
    z_prev = z_prev.reshape(z_prev.shape[0], lay.in_channels, lay.in_height, lay.in_width)
    zeta = backend.conv_forward(z_prev, p.weights, p.bias, lay.stride)
    return NeuronMetricMatrix(layer, "strength", zeta.reshape(zeta.shape[0], -1), samples.seed)


def conv_toeplitz_oracle(p: LayerParams, image, stride=1):
    """Reference conv output via an explicit doubly-blocked banded matrix.

    Quadratic space; accepts inputs up to 32x32 only. image is [C, H, W]
    (a bare [H, W] is treated as single-channel). Returns the flattened
    output map [O * oh * ow].
    """
    if p.kind != "conv2d":
        raise MetricError(f"expected conv2d params, got {p.kind}")
    x = np.asarray(image, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError(f"oracle input must be [C, H, W], got shape {x.shape}")
    C, H, W = x.shape
    cw, O, m, m2 = p.weights.shape
    if cw != C:
        raise ShapeError(f"kernel expects {cw} channels, input has {C}")
    if m > H or m2 > W:
        raise MetricError(f"kernel {m}x{m2} larger than input {H}x{W}")
    if H > 32 or W > 32:
        raise MetricError(f"oracle limited to 32x32 inputs, got {H}x{W}")
    oh = (H - m) // stride + 1
    ow = (W - m) // stride + 1
    T = np.zeros((O * oh * ow, C * H * W))
    for o in range(O):
        for oy in range(oh):
            for ox in range(ow):
                row = (o * oh + oy) * ow + ox
                for c in range(C):
                    for i in range(m):
                        for j in range(m):
                            col = (c * H + oy * stride + i) * W + ox * stride + j
                            T[row, col] = p.weights[c, o, i, j]
    out = T @ x.ravel()
    out += np.repeat(p.bias, oh * ow)
    return out


def _recurrent_layer_index(network):
    for i, lay in enumerate(network.spec.layers, start=1):
        if lay.kind == "recurrent":
            return i
    raise MetricError("network has no recurrent layer")


def rnn_unfolded_strength(network: Network, samples: SampleBatch) -> NeuronMetricMatrix:
    """Per-time-step hidden strengths by explicit unrolling.

    zeta(t) = x(t) W + h(t-1) U + b with h(t-1) recomputed from scratch by
    nested recursion from the zero initial state (deliberately O(T^2); this
    is an independent code path from the loop-based forward pass).
    """
    layer = _recurrent_layer_index(network)
    lay, p = _check_param_layer(network, layer, expect="recurrent")
    trace = forward(network, samples.inputs, samples.image_shape)
    x = layer_input(trace, network.spec, layer)
    if x.ndim != 3:
        x = x.reshape(x.shape[0], lay.time_steps, lay.fan_in)
    B, T, _ = x.shape
    H = lay.fan_out
    act = network.spec.activation if layer < len(network.spec.layers) else "linear"
    zeta = np.empty((B, T, H))
    for t in range(T):
        h = np.zeros((B, H))
        for tau in range(t):
            h = apply_activation(act, x[:, tau] @ p.weights + h @ p.recurrent_weights + p.bias)
        zeta[:, t] = x[:, t] @ p.weights + h @ p.recurrent_weights + p.bias
    return NeuronMetricMatrix(layer, "strength", zeta, samples.seed)


def rnn_strength_heatmap(network: Network, samples: SampleBatch) -> StrengthHeatmap:
    """Mean |strength| per time step painted onto the input image rows."""
    if samples.image_shape is None:
        raise MetricError("heatmap needs samples with image geometry")
    _, height, width = samples.image_shape
    strengths = rnn_unfolded_strength(network, samples)
    T = strengths.values.shape[1]
    if T != height:
        raise MetricError(f"{T} time steps do not map onto {height} image rows")
    row_mass = np.abs(strengths.values).mean(axis=(0, 2))
    grid = np.repeat(row_mass[:, None], width, axis=1)
    return StrengthHeatmap(grid, network.trained)


def metric_matrix(network: Network, samples: SampleBatch, metric: str, layer: int) -> NeuronMetricMatrix:
    """Dispatch neuron_strength / neuron_activation over any layer kind."""
    if metric not in ("neuron_strength", "neuron_activation"):
        raise MetricError(f"unknown data-dependent metric {metric!r}")
    lay, _ = _check_param_layer(network, layer)
    if lay.kind == "dense":
        out = neuron_strength(network, samples, layer)
    elif lay.kind == "conv2d":
        out = conv_neuron_strength(network, samples, layer)
    else:
        out = rnn_unfolded_strength(network, samples)
    if metric == "neuron_activation":
        out = NeuronMetricMatrix(
            out.layer, "activation", apply_activation(network.spec.activation, out.values), out.seed
        )
    return out
