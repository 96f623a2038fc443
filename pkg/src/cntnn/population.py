"""Pool-level experimentation: train N identically-specified networks that
differ only in seed, pool every metric into distributions, correlate metric
families per neuron, and compare trained pools against their untrained twins.

Seed discipline: member i is built with base_seed + i, shuffles its batches
with train_config.seed + i, and draws its metric samples with
samples_seed + i. All derivations depend only on the member index, so
aggregation order cannot change any result.
"""

from dataclasses import dataclass, field

import numpy as np

from . import datametrics, topology
from .data import Dataset, sample_inputs
from .engine import TrainConfig, evaluate, train
from .errors import MetricError, SpecError, TrainingDiverged
from .network import build_network, snapshot
from .specs import ArchitectureSpec
from .stats import histogram, ks_statistic, pearson, population_moments

TOPOLOGICAL_METRICS = (
    "link_mean",
    "link_variance",
    "node_strength_in",
    "node_strength_out",
    "node_strength_total",
    "layer_fluctuation",
    "layer_fluctuation_in",
    "layer_fluctuation_out",
    "layer_fluctuation_total",
)
DATA_METRICS = ("neuron_strength", "neuron_activation")
METRICS = TOPOLOGICAL_METRICS + DATA_METRICS

PER_NEURON_METRICS = (
    "node_strength_in",
    "node_strength_out",
    "node_strength_total",
    "neuron_strength",
    "neuron_activation",
)


@dataclass
class PoolMember:
    index: int
    seed: int
    network: object
    twin: object
    report: object = None
    eval_metric: float = None
    diverged: bool = False
    error: str = ""


@dataclass
class PoolResult:
    spec: ArchitectureSpec
    members: list
    base_seed: int
    dataset: Dataset = None
    train_config: TrainConfig = None

    @property
    def networks(self):
        return [m.network for m in self.members]

    @property
    def twins(self):
        return [m.twin for m in self.members]

    @property
    def reports(self):
        return [m.report for m in self.members]

    def active_members(self):
        return [m for m in self.members if not m.diverged]


@dataclass
class MetricDistribution:
    metric: str
    layer: int
    values: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    skewness: float
    kurtosis: float

    @property
    def n(self):
        return int(self.values.size)


@dataclass
class CorrelationRecord:
    metric_pair: tuple
    layer: int
    r: float
    count: int
    defined: bool
    points: np.ndarray = field(repr=False, default=None)


def train_pool(spec: ArchitectureSpec, n: int, base_seed: int, dataset: Dataset,
               config: TrainConfig, eval_dataset: Dataset = None) -> PoolResult:
    """Build and train n networks with seeds base_seed..base_seed+n-1.

    Divergent members are kept in the pool but flagged and excluded from
    aggregation; the pool only fails if every member diverges.
    """
    if n < 1:
        raise SpecError(f"pool size must be >= 1, got {n}")
    config.validate()
    members = []
    for i in range(n):
        seed = base_seed + i
        net = build_network(spec, config.init_std, seed)
        twin = snapshot(net)
        member = PoolMember(index=i, seed=seed, network=net, twin=twin)
        member_config = TrainConfig(**{**config.__dict__, "seed": config.seed + i})
        try:
            member.report = train(net, dataset, member_config)
            if eval_dataset is not None:
                member.eval_metric = evaluate(net, eval_dataset)
        except TrainingDiverged as exc:
            member.diverged = True
            member.error = str(exc)
        members.append(member)
    pool = PoolResult(spec, members, base_seed, dataset=dataset, train_config=config)
    if not pool.active_members():
        raise TrainingDiverged(
            epoch=None, message=f"all {n} pool members diverged during training"
        )
    return pool


def _member_values(network, metric, layer, sample_batch):
    """Pooled scalar values contributed by one network."""
    if metric in ("link_mean", "link_variance"):
        mean, var = topology.layer_link_stats(network, layer)
        return np.array([mean if metric == "link_mean" else var])
    if metric.startswith("node_strength"):
        s_in, s_out = topology.node_strength_arrays(network, layer)
        if metric == "node_strength_in":
            return s_in
        if metric == "node_strength_out":
            return s_out
        return s_in + s_out
    if metric.startswith("layer_fluctuation"):
        s_in, s_out = topology.node_strength_arrays(network, layer)
        component = metric.removeprefix("layer_fluctuation").lstrip("_") or "total"
        strengths = {"in": s_in, "out": s_out, "total": s_in + s_out}[component]
        return np.array([topology.layer_fluctuation(strengths)])
    matrix = datametrics.metric_matrix(network, sample_batch, metric, layer)
    return matrix.values.ravel()


def _distribution(metric, layer, values, bins):
    if values.size == 0:
        raise MetricError(f"no values pooled for {metric} at layer {layer}")
    edges, counts = histogram(values, bins)
    mean, std, skew, kurt = population_moments(values)
    return MetricDistribution(metric, layer, values, edges, counts, mean, std, skew, kurt)


def aggregate_metric(pool: PoolResult, metric: str, layer: int, samples_seed: int,
                     bins: int = 100, sample_size: int = 100, untrained: bool = False) -> MetricDistribution:
    """Pool a metric's values over every non-divergent member.

    Data-dependent metrics draw a fresh SampleBatch per member from the
    pool's training dataset (seed = samples_seed + member index). Layer is a
    parameterized-layer index for link and data metrics, a node-layer index
    for node_strength and layer_fluctuation.
    """
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}, expected one of {METRICS}")
    needs_samples = metric in DATA_METRICS
    if needs_samples and pool.dataset is None:
        raise MetricError(f"metric {metric!r} needs the pool's training dataset")
    chunks = []
    for member in pool.active_members():
        batch = (
            sample_inputs(pool.dataset, sample_size, samples_seed + member.index)
            if needs_samples
            else None
        )
        net = member.twin if untrained else member.network
        chunks.append(_member_values(net, metric, layer, batch))
    return _distribution(metric, layer, np.concatenate(chunks), bins)


def _per_neuron(network, metric, layer, sample_batch):
    """One value per neuron of the layer, for scatter pairing: topological
    strengths directly, data metrics averaged over samples (and time)."""
    if metric not in PER_NEURON_METRICS:
        raise MetricError(f"metric {metric!r} is not per-neuron; cannot correlate")
    if metric.startswith("node_strength"):
        s_in, s_out = topology.node_strength_arrays(network, layer)
        return {"node_strength_in": s_in, "node_strength_out": s_out,
                "node_strength_total": s_in + s_out}[metric]
    matrix = datametrics.metric_matrix(network, sample_batch, metric, layer)
    v = matrix.values
    return v.mean(axis=tuple(range(v.ndim - 1)))


def correlate(pool: PoolResult, metric_a: str, metric_b: str, layer: int,
              samples_seed: int, sample_size: int = 100) -> CorrelationRecord:
    """Pearson correlation between two per-neuron metrics at one layer.

    Points are (network, neuron) pairs pooled across members. For data
    metrics the node-layer index of ``layer``'s destination neurons is the
    same index, so the pairing is positional per neuron.
    """
    xs, ys = [], []
    for member in pool.active_members():
        batch = None
        if metric_a in DATA_METRICS or metric_b in DATA_METRICS:
            if pool.dataset is None:
                raise MetricError("correlating data metrics needs the pool's training dataset")
            batch = sample_inputs(pool.dataset, sample_size, samples_seed + member.index)
        a = _per_neuron(member.network, metric_a, layer, batch)
        b = _per_neuron(member.network, metric_b, layer, batch)
        if a.shape != b.shape:
            raise MetricError(
                f"metrics {metric_a}/{metric_b} at layer {layer} pair {a.size} vs {b.size} neurons"
            )
        xs.append(a)
        ys.append(b)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    points = np.column_stack([x, y])
    r = pearson(x, y)
    if r is None:
        return CorrelationRecord((metric_a, metric_b), layer, float("nan"), x.size, False, points)
    return CorrelationRecord((metric_a, metric_b), layer, r, x.size, True, points)


def compare_trained_untrained(pool: PoolResult, metric: str, layer: int, samples_seed: int,
                              bins: int = 100, sample_size: int = 100):
    """(trained distribution, untrained distribution, KS statistic), with the
    same per-member sample seeds on both sides."""
    trained = aggregate_metric(pool, metric, layer, samples_seed, bins, sample_size)
    untrained = aggregate_metric(pool, metric, layer, samples_seed, bins, sample_size, untrained=True)
    return trained, untrained, ks_statistic(trained.values, untrained.values)
