"""Forward evaluation with full trace capture, mini-batch SGD with momentum,
and finite-difference gradient checking.

Output-layer convention: the last parameterized layer is linear in the
forward pass (classification reads raw logits via argmax; reconstruction
reads the raw affine output). The architecture's activation applies to all
hidden layers, and inside recurrent cells.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ShapeError, SpecError, TrainingDiverged
from .network import Network

# ---------------------------------------------------------------------------
# activations


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def apply_activation(name, z):
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    raise SpecError(f"unknown activation {name!r}")


def activation_grad(name, z):
    """f'(z) evaluated at the pre-activation."""
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "sigmoid":
        s = sigmoid(z)
        return s * (1.0 - s)
    raise SpecError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# input shaping


def shape_input(batch, spec, image_shape=None):
    """Arrange a batch for the first layer.

    Flat inputs are reshaped per the first layer's geometry: [B,C,H,W] for
    conv stacks, [B,T,step] for recurrent ones (row-by-row segmentation;
    multi-channel rows are interleaved per row when image_shape is given,
    so a CIFAR step carries all three channels of one row).
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if not np.all(np.isfinite(x)):
        raise ShapeError("non-finite values in input batch")
    first = spec.layers[0]
    if first.kind == "dense":
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != first.fan_in:
            raise ShapeError(f"expected input dimension {first.fan_in}, got {flat.shape[1]}")
        return flat
    if first.kind == "conv2d":
        shape = (first.in_channels, first.in_height, first.in_width)
        if x.ndim == 4:
            if x.shape[1:] != shape:
                raise ShapeError(f"expected input shape {shape}, got {x.shape[1:]}")
            return x
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != first.fan_in:
            raise ShapeError(f"expected input dimension {first.fan_in}, got {flat.shape[1]}")
        return flat.reshape((x.shape[0],) + shape)
    # recurrent
    T, d = first.time_steps, first.fan_in
    if x.ndim == 3:
        if x.shape[1:] != (T, d):
            raise ShapeError(f"expected time-major input [batch, {T}, {d}], got {x.shape}")
        return x
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != T * d:
        raise ShapeError(f"expected input dimension {T * d}, got {flat.shape[1]}")
    if image_shape is not None and image_shape[0] > 1:
        C, H, W = image_shape
        if (H, C * W) != (T, d):
            raise ShapeError(f"image shape {image_shape} does not segment into [{T}, {d}]")
        return flat.reshape(x.shape[0], C, H, W).transpose(0, 2, 1, 3).reshape(x.shape[0], T, d)
    return flat.reshape(x.shape[0], T, d)


# ---------------------------------------------------------------------------
# forward


@dataclass
class ForwardTrace:
    """Per-layer pre-activations z and activations f(z) for one batch.

    Dense/conv layers store [batch, fan_out] (conv maps flattened
    channel-major); recurrent layers store [batch, time_steps, hidden].
    """

    inputs: np.ndarray
    pre_activations: list = field(default_factory=list)
    activations: list = field(default_factory=list)


def _rnn_loop(x, p, act_name):
    """h(t) = f(x(t) @ W + h(t-1) @ U + b), h(0) = 0. Returns (pre, h) [B,T,H]."""
    B, T, _ = x.shape
    H = p.weights.shape[1]
    pre = np.empty((B, T, H))
    h = np.empty((B, T, H))
    prev = np.zeros((B, H))
    for t in range(T):
        pre[:, t] = x[:, t] @ p.weights + prev @ p.recurrent_weights + p.bias
        prev = apply_activation(act_name, pre[:, t])
        h[:, t] = prev
    return pre, h


def _run_layers(network, x0):
    """Shared forward pass: returns (output, caches) with per-layer caches
    (kind, layer input, pre-activation, activation), all in natural shapes."""
    spec = network.spec
    caches = []
    value = x0
    n = len(spec.layers)
    for idx, (lay, p) in enumerate(zip(spec.layers, network.params)):
        act_name = "linear" if idx == n - 1 else spec.activation
        if lay.kind == "dense":
            xin = value.reshape(value.shape[0], -1)
            pre = xin @ p.weights + p.bias
            a = apply_activation(act_name, pre)
            value = a
        elif lay.kind == "conv2d":
            xin = value.reshape(value.shape[0], lay.in_channels, lay.in_height, lay.in_width)
            pre = backend.conv_forward(xin, p.weights, p.bias, lay.stride)
            a = apply_activation(act_name, pre)
            value = a
        else:
            xin = value if value.ndim == 3 else value.reshape(value.shape[0], lay.time_steps, lay.fan_in)
            pre, a = _rnn_loop(xin, p, act_name)
            value = a[:, -1]
        caches.append((lay.kind, xin, pre, a))
    return value.reshape(value.shape[0], -1), caches


def forward(network: Network, batch, image_shape=None) -> ForwardTrace:
    """Evaluate the network on a batch, capturing every layer's z and f(z)."""
    network.check_shapes()
    x0 = shape_input(batch, network.spec, image_shape)
    _, caches = _run_layers(network, x0)
    trace = ForwardTrace(inputs=x0)
    for kind, _, pre, a in caches:
        if kind == "recurrent":
            trace.pre_activations.append(pre)
            trace.activations.append(a)
        else:
            trace.pre_activations.append(pre.reshape(pre.shape[0], -1))
            trace.activations.append(a.reshape(a.shape[0], -1))
    return trace


def output_of(trace: ForwardTrace) -> np.ndarray:
    """Network output (raw logits / reconstruction) from a trace."""
    out = trace.activations[-1]
    return out[:, -1, :] if out.ndim == 3 else out


def layer_input(trace: ForwardTrace, spec, layer: int) -> np.ndarray:
    """The value fed into parameterized layer ``layer`` (1-based), flattened."""
    if not 1 <= layer <= len(spec.layers):
        raise ShapeError(f"layer index {layer} out of range 1..{len(spec.layers)}")
    if layer == 1:
        x = trace.inputs
        return x.reshape(x.shape[0], -1) if x.ndim != 3 else x
    a = trace.activations[layer - 2]
    if spec.layers[layer - 2].kind == "recurrent":
        return a[:, -1, :]
    return a


# ---------------------------------------------------------------------------
# backward


def _run_backward(network, caches, g_out):
    """Backpropagate dL/d(output) through the cached layers.

    Returns per-layer gradient lists matching LayerParams.arrays() order.
    """
    spec = network.spec
    grads = [None] * len(caches)
    g = g_out
    n = len(caches)
    for idx in range(n - 1, -1, -1):
        kind, xin, pre, a = caches[idx]
        p = network.params[idx]
        act_name = "linear" if idx == n - 1 else spec.activation
        if kind == "dense":
            gpre = g.reshape(pre.shape) * activation_grad(act_name, pre) if act_name != "linear" else g.reshape(pre.shape)
            gw = xin.T @ gpre
            gb = gpre.sum(axis=0)
            grads[idx] = [gw, gb]
            g = gpre @ p.weights.T
        elif kind == "conv2d":
            gpre = g.reshape(pre.shape)
            if act_name != "linear":
                gpre = gpre * activation_grad(act_name, pre)
            gw, gb = backend.conv_grad_weights(
                xin, gpre, spec.layers[idx].kernel_size, spec.layers[idx].stride
            )
            grads[idx] = [gw, gb]
            g = backend.conv_grad_input(
                p.weights, gpre, spec.layers[idx].in_height, spec.layers[idx].in_width, spec.layers[idx].stride
            )
        else:
            lay = spec.layers[idx]
            B, T, H = pre.shape
            gw = np.zeros_like(p.weights)
            gu = np.zeros_like(p.recurrent_weights)
            gb = np.zeros_like(p.bias)
            gx = np.empty_like(xin)
            gh = g.reshape(B, H)  # gradient on h(T)
            for t in range(T - 1, -1, -1):
                gpre = gh * activation_grad(act_name, pre[:, t]) if act_name != "linear" else gh
                gb += gpre.sum(axis=0)
                gw += xin[:, t].T @ gpre
                h_prev = a[:, t - 1] if t > 0 else np.zeros((B, H))
                gu += h_prev.T @ gpre
                gx[:, t] = gpre @ p.weights.T
                gh = gpre @ p.recurrent_weights.T
            grads[idx] = [gw, gu, gb]
            g = gx
        g = g.reshape(g.shape[0], -1)
    return grads


# ---------------------------------------------------------------------------
# losses


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits); gradient w.r.t. logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    eps = np.finfo(np.float64).tiny
    loss = -np.mean(np.log(p[np.arange(n), labels] + eps))
    grad = p
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def mse_loss(pred, target):
    """Mean over batch and features of squared error; gradient w.r.t. pred."""
    diff = pred - target
    loss = np.mean(diff * diff)
    return loss, 2.0 * diff / diff.size


LOSSES = ("softmax_cross_entropy", "mse")


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 10
    loss: str = "softmax_cross_entropy"
    init_std: float = 0.05
    seed: int = 0

    def validate(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise SpecError(f"learning_rate must be a finite non-negative real, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise SpecError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1 or self.epochs < 1:
            raise SpecError("batch_size and epochs must be positive")
        if self.loss not in LOSSES:
            raise SpecError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if not np.isfinite(self.init_std) or self.init_std <= 0:
            raise SpecError(f"init_std must be a positive real, got {self.init_std}")
        return self


@dataclass
class TrainReport:
    epoch_losses: list
    final_metric: float
    wall_time: float


def _loss_and_grad(name, out, yb):
    if name == "softmax_cross_entropy":
        return softmax_cross_entropy(out, yb)
    return mse_loss(out, yb)


def train(network: Network, dataset, config: TrainConfig) -> TrainReport:
    """Mini-batch SGD with momentum, in place. Deterministic given
    (network parameters, config.seed, dataset order)."""
    config.validate()
    network.check_shapes()
    classification = network.spec.task == "classification"
    if classification and dataset.labels is None:
        raise SpecError(f"dataset {dataset.name!r} has no labels; classification training needs them")
    if classification and config.loss == "mse":
        raise SpecError("classification training uses softmax_cross_entropy")
    if not classification and config.loss != "mse":
        raise SpecError("reconstruction training uses mse")
    X = dataset.inputs
    y = dataset.labels if classification else X
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    velocity = [[np.zeros_like(a) for a in p.arrays()] for p in network.params]
    epoch_losses = []
    start = time.perf_counter()
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            xb = shape_input(X[idx], network.spec, dataset.image_shape)
            out, caches = _run_layers(network, xb)
            loss, gout = _loss_and_grad(config.loss, out, y[idx] if classification else X[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            batch_losses.append(loss)
            if config.learning_rate == 0.0:
                continue
            grads = _run_backward(network, caches, gout)
            for p, vel, gs in zip(network.params, velocity, grads):
                for arr, v, grad in zip(p.arrays(), vel, gs):
                    v *= config.momentum
                    v -= config.learning_rate * grad
                    arr += v
        epoch_losses.append(float(np.mean(batch_losses)))
    network.trained = True
    network.check_finite()
    final = evaluate(network, dataset)
    return TrainReport(epoch_losses, final, time.perf_counter() - start)


def evaluate(network: Network, dataset, batch_size=2048) -> float:
    """Accuracy (classification) or mean squared error (reconstruction)."""
    classification = network.spec.task == "classification"
    n = dataset.inputs.shape[0]
    hits = 0
    sq_sum = 0.0
    for lo in range(0, n, batch_size):
        xb = dataset.inputs[lo : lo + batch_size]
        x0 = shape_input(xb, network.spec, dataset.image_shape)
        out, _ = _run_layers(network, x0)
        if classification:
            hits += int(np.sum(np.argmax(out, axis=1) == dataset.labels[lo : lo + batch_size]))
        else:
            diff = out - xb
            sq_sum += float(np.sum(diff * diff))
    if classification:
        return hits / n
    return sq_sum / (n * dataset.inputs.shape[1])


# ---------------------------------------------------------------------------
# gradient checking


def analytic_gradients(network: Network, x, target, loss_name):
    """Loss gradients for one (batch of) labeled sample(s), per parameter array."""
    x0 = shape_input(x, network.spec)
    out, caches = _run_layers(network, x0)
    _, gout = _loss_and_grad(loss_name, out, target)
    return _run_backward(network, caches, gout)


def grad_check(network: Network, sample, tolerance=1e-4, step=1e-5, grad_fn=None):
    """Compare analytic gradients with central finite differences.

    ``sample`` is (x, label) for classification or (x, target) /(x, None)
    for reconstruction. Returns (passed, max_relative_error).
    """
    if network.n_parameters > 10_000:
        raise SpecError(f"grad_check limited to 1e4 parameters, network has {network.n_parameters}")
    x, target = sample
    classification = network.spec.task == "classification"
    loss_name = "softmax_cross_entropy" if classification else "mse"
    if classification:
        target = np.atleast_1d(np.asarray(target))
    else:
        target = np.asarray(x if target is None else target, dtype=np.float64)
        target = target.reshape(1, -1) if target.ndim == 1 else target

    def loss_at():
        x0 = shape_input(x, network.spec)
        out, _ = _run_layers(network, x0)
        return _loss_and_grad(loss_name, out, target)[0]

    grads = grad_fn(network, x, target) if grad_fn else analytic_gradients(network, x, target, loss_name)
    max_rel = 0.0
    for p, gs in zip(network.params, grads):
        for arr, g in zip(p.arrays(), gs):
            flat = arr.ravel()
            gflat = np.asarray(g).ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                hi = loss_at()
                flat[k] = orig - step
                lo = loss_at()
                flat[k] = orig
                num = (hi - lo) / (2.0 * step)
                denom = max(abs(gflat[k]), abs(num))
                rel = abs(gflat[k] - num) if denom < 1e-10 else abs(gflat[k] - num) / denom
                max_rel = max(max_rel, rel)
    return max_rel < tolerance, max_rel
