"""Network parameters and deterministic Gaussian initialization."""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SpecError
from .specs import ArchitectureSpec


@dataclass
class LayerParams:
    """Parameters of one layer.

    weights           -- dense: [fan_in, fan_out]; conv2d: [in_ch, out_ch, m, m];
                         recurrent: input map [fan_in, hidden]
    bias              -- [fan_out] / [out_ch] / [hidden]
    recurrent_weights -- hidden-to-hidden map [hidden, hidden] (recurrent only)
    """

    weights: np.ndarray
    bias: np.ndarray
    recurrent_weights: np.ndarray = None

    @property
    def kind(self):
        if self.recurrent_weights is not None:
            return "recurrent"
        return "conv2d" if self.weights.ndim == 4 else "dense"

    def arrays(self):
        out = [self.weights, self.bias]
        if self.recurrent_weights is not None:
            out.insert(1, self.recurrent_weights)
        return out

    def copy(self):
        return LayerParams(
            self.weights.copy(),
            self.bias.copy(),
            None if self.recurrent_weights is None else self.recurrent_weights.copy(),
        )


@dataclass
class Network:
    spec: ArchitectureSpec
    params: list = field(default_factory=list)
    trained: bool = False
    seed: int = 0
    init_std: float = 0.05

    @property
    def n_parameters(self):
        return sum(a.size for p in self.params for a in p.arrays())

    def copy(self):
        return Network(self.spec, [p.copy() for p in self.params], self.trained, self.seed, self.init_std)

    def check_finite(self):
        for i, p in enumerate(self.params, start=1):
            for a in p.arrays():
                if not np.all(np.isfinite(a)):
                    raise ShapeError(f"layer {i}: non-finite parameter values")
        return self

    def check_shapes(self):
        if len(self.params) != len(self.spec.layers):
            raise ShapeError(
                f"expected {len(self.spec.layers)} parameterized layers, got {len(self.params)}"
            )
        for i, (lay, p) in enumerate(zip(self.spec.layers, self.params), start=1):
            want = _weight_shape(lay)
            if p.weights.shape != want:
                raise ShapeError(f"layer {i}: weights shape {p.weights.shape}, expected {want}")
            if p.bias.shape != (_bias_dim(lay),):
                raise ShapeError(f"layer {i}: bias shape {p.bias.shape}, expected ({_bias_dim(lay)},)")
            if lay.kind == "recurrent":
                if p.recurrent_weights is None or p.recurrent_weights.shape != (lay.fan_out, lay.fan_out):
                    raise ShapeError(f"layer {i}: recurrent map must be [{lay.fan_out}, {lay.fan_out}]")
            elif p.recurrent_weights is not None:
                raise ShapeError(f"layer {i}: unexpected recurrent map on a {lay.kind} layer")
        return self


def _weight_shape(lay):
    if lay.kind == "dense":
        return (lay.fan_in, lay.fan_out)
    if lay.kind == "conv2d":
        return (lay.in_channels, lay.out_channels, lay.kernel_size, lay.kernel_size)
    return (lay.fan_in, lay.fan_out)


def _bias_dim(lay):
    return lay.out_channels if lay.kind == "conv2d" else lay.fan_out


def build_network(spec: ArchitectureSpec, init_std: float, seed: int) -> Network:
    """Draw all weights i.i.d. from Normal(0, init_std^2); biases start at zero.

    The (spec, init_std, seed) triple fully determines the parameters
    bit-for-bit: arrays are drawn layer by layer from one PCG64 stream.
    """
    if not np.isfinite(init_std) or init_std <= 0:
        raise SpecError(f"init_std must be a positive real, got {init_std}")
    spec.validate()
    rng = np.random.default_rng(seed)
    params = []
    for lay in spec.layers:
        w = rng.normal(0.0, init_std, size=_weight_shape(lay))
        u = rng.normal(0.0, init_std, size=(lay.fan_out, lay.fan_out)) if lay.kind == "recurrent" else None
        b = np.zeros(_bias_dim(lay))
        params.append(LayerParams(w, b, u))
    return Network(spec, params, trained=False, seed=seed, init_std=init_std).check_shapes()


def snapshot(network: Network) -> Network:
    """Deep copy used for untrained twins."""
    return copy.deepcopy(network)
