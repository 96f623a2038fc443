"""Pools of small neural networks analyzed as weighted graphs.

Train FC/CNN/RNN/AE stacks from scratch (numpy, with optional compiled conv
kernels), then compute two metric families on them: topological ones read
off the parameters (link-weight moments, directed node strength, layer
fluctuation) and data-dependent ones read off sampled inputs (per-neuron
strength and activation, with conv patch isolation and recurrent temporal
unfolding), plus pooled distributions, correlations, and trained-vs-untrained
comparisons.
"""

from .backend import KERNEL_BACKEND
from .data import (
    Dataset,
    SampleBatch,
    dataset_from_root,
    load_cifar10,
    load_dataset,
    load_mnist,
    sample_inputs,
    save_dataset,
    synthetic_dataset,
)
from .datametrics import (
    NeuronMetricMatrix,
    StrengthHeatmap,
    conv_neuron_strength,
    conv_toeplitz_oracle,
    metric_matrix,
    neuron_activation,
    neuron_strength,
    rnn_strength_heatmap,
    rnn_unfolded_strength,
)
from .engine import (
    ForwardTrace,
    TrainConfig,
    TrainReport,
    evaluate,
    forward,
    grad_check,
    train,
)
from .errors import (
    ConfigError,
    DataFormatError,
    MetricError,
    ShapeError,
    SpecError,
    TrainingDiverged,
)
from .experiment import (
    ExperimentManifest,
    compare_experiments,
    load_config,
    resolve_config,
    run_experiment,
)
from .network import LayerParams, Network, build_network, snapshot
from .population import (
    CorrelationRecord,
    MetricDistribution,
    PoolMember,
    PoolResult,
    aggregate_metric,
    compare_trained_untrained,
    correlate,
    train_pool,
)
from .serialize import export_network, import_network
from .specs import (
    ArchitectureSpec,
    LayerSpec,
    conv2d,
    default_architecture,
    dense,
    recurrent,
)
from .stats import histogram, ks_statistic, pearson, population_moments
from .topology import (
    LayerStatRecord,
    NodeStrengthRecord,
    layer_fluctuation,
    layer_link_stats,
    layer_stats,
    link_weight_mean,
    link_weight_variance,
    node_strength,
    node_strength_arrays,
)

__version__ = "0.1.0"
