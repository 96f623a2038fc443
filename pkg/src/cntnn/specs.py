"""Declarative network architectures: layer specs, validation, and the
default desk-scale shapes for each architecture family.

Conventions used throughout the package:

* parameterized layers are 1-based: layer ``l`` owns weight matrix ``l``
  (``network.params[l-1]``); ``L = len(spec.layers)``;
* node layers run 0..L, node layer ``l`` being the destination neurons of
  weight matrix ``l`` (node layer 0 is the input);
* conv feature maps flatten channel-major (channel, row, column);
* recurrent layers consume input row-by-row (one image row per time step,
  channels flattened within the row).
"""

from dataclasses import dataclass, field

from .errors import SpecError

KINDS = ("FC", "CNN", "RNN", "AE")
LAYER_KINDS = ("dense", "conv2d", "recurrent")
ACTIVATIONS = ("linear", "relu", "sigmoid")
TASKS = ("classification", "reconstruction")


@dataclass(frozen=True)
class LayerSpec:
    """One parameterized layer.

    dense      -- fan_in, fan_out
    conv2d     -- in_channels/in_height/in_width, out_channels, kernel_size,
                  stride (valid padding, square kernel); fan_in/fan_out are the
                  flattened feature-map sizes
    recurrent  -- fan_in (features per step), fan_out (hidden width), time_steps
    """

    kind: str
    fan_in: int = 0
    fan_out: int = 0
    kernel_size: int = 0
    stride: int = 1
    time_steps: int = 0
    in_channels: int = 0
    in_height: int = 0
    in_width: int = 0
    out_channels: int = 0

    @property
    def out_height(self):
        return (self.in_height - self.kernel_size) // self.stride + 1

    @property
    def out_width(self):
        return (self.in_width - self.kernel_size) // self.stride + 1

    def validate(self, index):
        name = f"layer {index} ({self.kind})"
        if self.kind not in LAYER_KINDS:
            raise SpecError(f"layer {index}: unknown kind {self.kind!r}")
        if self.kind == "dense":
            if self.fan_in < 1 or self.fan_out < 1:
                raise SpecError(f"{name}: fan_in/fan_out must be positive, got {self.fan_in}x{self.fan_out}")
        elif self.kind == "conv2d":
            if min(self.in_channels, self.in_height, self.in_width, self.out_channels) < 1:
                raise SpecError(f"{name}: channels and input geometry must be positive")
            if self.kernel_size < 1 or self.stride < 1:
                raise SpecError(f"{name}: kernel_size and stride must be positive")
            if self.kernel_size > min(self.in_height, self.in_width):
                raise SpecError(
                    f"{name}: kernel_size {self.kernel_size} exceeds input "
                    f"{self.in_height}x{self.in_width}"
                )
        else:
            if self.fan_in < 1 or self.fan_out < 1:
                raise SpecError(f"{name}: fan_in/fan_out must be positive")
            if self.time_steps < 1:
                raise SpecError(f"{name}: time_steps must be >= 1, got {self.time_steps}")


def dense(fan_in, fan_out):
    return LayerSpec(kind="dense", fan_in=fan_in, fan_out=fan_out)


def conv2d(in_channels, in_height, in_width, out_channels, kernel_size, stride=1):
    if kernel_size < 1 or stride < 1:
        raise SpecError("conv2d kernel_size and stride must be positive")
    if kernel_size > min(in_height, in_width):
        raise SpecError(
            f"conv2d kernel_size {kernel_size} exceeds input {in_height}x{in_width}"
        )
    oh = (in_height - kernel_size) // stride + 1
    ow = (in_width - kernel_size) // stride + 1
    return LayerSpec(
        kind="conv2d",
        fan_in=in_channels * in_height * in_width,
        fan_out=out_channels * oh * ow,
        in_channels=in_channels,
        in_height=in_height,
        in_width=in_width,
        out_channels=out_channels,
        kernel_size=kernel_size,
        stride=stride,
    )


def recurrent(fan_in, fan_out, time_steps):
    return LayerSpec(kind="recurrent", fan_in=fan_in, fan_out=fan_out, time_steps=time_steps)


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str
    layers: tuple = field(default_factory=tuple)
    activation: str = "sigmoid"
    task: str = "classification"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def depth(self):
        return len(self.layers)

    @property
    def input_dim(self):
        """Flat input dimension consumed by the first layer."""
        lay = self.layers[0]
        if lay.kind == "recurrent":
            return lay.time_steps * lay.fan_in
        return lay.fan_in

    @property
    def output_dim(self):
        return self.layers[-1].fan_out

    def validate(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown architecture kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise SpecError(f"unknown activation {self.activation!r}")
        if self.task not in TASKS:
            raise SpecError(f"unknown task {self.task!r}")
        if not self.layers:
            raise SpecError("architecture needs at least one layer")
        for i, lay in enumerate(self.layers, start=1):
            lay.validate(i)
        for i in range(len(self.layers) - 1):
            a, b = self.layers[i], self.layers[i + 1]
            # recurrent layers hand their final hidden state to the next layer
            # and consume time_steps * fan_in when fed mid-network
            produced = a.fan_out
            consumed = b.time_steps * b.fan_in if b.kind == "recurrent" else b.fan_in
            if consumed != produced:
                raise SpecError(
                    f"layers {i + 1} -> {i + 2}: fan_out {produced} does not match "
                    f"consumed input size {consumed}"
                )
        if self.kind == "AE":
            self._validate_autoencoder()
        return self

    def _validate_autoencoder(self):
        if self.task != "reconstruction":
            raise SpecError("AE architectures must use the reconstruction task")
        widths = [self.layers[0].fan_in] + [l.fan_out for l in self.layers]
        if widths != widths[::-1]:
            raise SpecError(f"AE widths {widths} are not symmetric around the bottleneck")
        if min(widths) >= widths[0]:
            raise SpecError(f"AE bottleneck width {min(widths)} is not smaller than input {widths[0]}")

    def node_layer_width(self, node_layer):
        """Neuron count at node layer 0..L (0 = input)."""
        if node_layer == 0:
            lay = self.layers[0]
            return lay.fan_in
        return self.layers[node_layer - 1].fan_out


DATASET_GEOMETRY = {
    "mnist": {"input_dim": 784, "classes": 10, "image_shape": (1, 28, 28)},
    "cifar10": {"input_dim": 3072, "classes": 10, "image_shape": (3, 32, 32)},
}

# Spec'd AE width chains (node-layer depth -> bottleneck pattern, scaled off 784).
_AE_CHAINS = {
    3: [64],
    5: [128, 32],
    7: [256, 128, 32],
    9: [256, 128, 64, 32],
}


def _fc_hidden_widths(n_weight_layers):
    """Hidden widths for an FC stack: geometric from 128 down to 64.

    Reproduces the pinned 3-layer default 784-128-64-10 and keeps every
    hidden layer at least as wide as the output for deeper stacks.
    """
    n_hidden = n_weight_layers - 1
    if n_hidden <= 0:
        return []
    if n_hidden == 1:
        return [128]
    ratio = (64 / 128) ** (1.0 / (n_hidden - 1))
    return [round(128 * ratio**i) for i in range(n_hidden)]


def default_architecture(kind, dataset="mnist", depth=3, activation="sigmoid", geometry=None):
    """The documented desk-scale default shape for each architecture family.

    ``depth`` counts parameterized layers for FC/CNN and node layers for AE
    (matching the published width chains); RNNs ignore it (one recurrent
    layer plus a dense head). ``geometry`` ({input_dim, classes, image_shape})
    overrides the named-dataset lookup, for synthetic data.
    """
    if geometry is None:
        if dataset not in DATASET_GEOMETRY:
            raise SpecError(f"no default geometry for dataset {dataset!r}")
        geometry = DATASET_GEOMETRY[dataset]
    d, classes = geometry["input_dim"], geometry["classes"]
    image_shape = geometry.get("image_shape")
    if image_shape is None and kind in ("CNN", "RNN"):
        raise SpecError(f"{kind} architectures need a dataset with image geometry")
    c, h, w = image_shape if image_shape is not None else (0, 0, 0)

    if kind == "FC":
        widths = [d] + _fc_hidden_widths(depth) + [classes]
        layers = [dense(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
        return ArchitectureSpec("FC", layers, activation, "classification").validate()

    if kind == "AE":
        if depth not in _AE_CHAINS:
            raise SpecError(f"AE depth must be one of {sorted(_AE_CHAINS)}, got {depth}")
        half = [max(1, round(b * d / 784)) if d != 784 else b for b in _AE_CHAINS[depth]]
        widths = [d] + half + half[-2::-1] + [d]
        layers = [dense(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
        return ArchitectureSpec("AE", layers, activation, "reconstruction").validate()

    if kind == "CNN":
        if depth == 3:
            plan = [(8, 1), (16, 2)]
        elif depth == 5:
            plan = [(8, 1), (16, 2), (16, 1), (32, 2)]
        else:
            raise SpecError(f"CNN depth must be 3 or 5, got {depth}")
        layers = []
        ch, hh, ww = c, h, w
        for out_ch, stride in plan:
            lay = conv2d(ch, hh, ww, out_ch, kernel_size=3, stride=stride)
            layers.append(lay)
            ch, hh, ww = out_ch, lay.out_height, lay.out_width
        layers.append(dense(ch * hh * ww, classes))
        return ArchitectureSpec("CNN", layers, activation, "classification").validate()

    if kind == "RNN":
        step_dim = c * w  # one image row per step, channels flattened
        layers = [recurrent(step_dim, 128, time_steps=h), dense(128, classes)]
        return ArchitectureSpec("RNN", layers, activation, "classification").validate()

    raise SpecError(f"unknown architecture kind {kind!r}")
