"""Acceptance gate: one test per shipped criterion, one printed verdict each.

Criteria that need MNIST or CIFAR-10 files skip with an actionable message
when the data is absent; everything else runs on synthetic inputs. The
CIFAR-10 run is the long one and only activates with CNT_RUN_EXTENDED=1.
"""

import json
import os
import time

import numpy as np
import pytest

import conftest
from cntnn import (
    TrainConfig,
    aggregate_metric,
    build_network,
    compare_trained_untrained,
    conv_neuron_strength,
    conv_toeplitz_oracle,
    grad_check,
    ks_statistic,
    layer_link_stats,
    layer_fluctuation,
    neuron_activation,
    neuron_strength,
    node_strength,
    node_strength_arrays,
    pearson,
    rnn_strength_heatmap,
    rnn_unfolded_strength,
    run_experiment,
    sample_inputs,
    train_pool,
)
from cntnn.data import SampleBatch, dataset_from_root
from cntnn.engine import apply_activation, forward
from cntnn.specs import ArchitectureSpec, conv2d, dense, default_architecture, recurrent
from cntnn.stats import histogram

from conftest import (
    DATA_ROOT,
    cifar_present,
    fc_spec,
    make_net,
    mnist_present,
    small_cnn_spec,
    small_rnn_spec,
)

POOL_SIZE = 5


def report(n, ok, desc):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {desc}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def skip_report(n, reason):
    line = f"ACCEPTANCE {n}: SKIP - {reason}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    pytest.skip(reason)


def mnist_gate(n):
    if not (mnist_present("train") and mnist_present("test")):
        skip_report(
            n,
            f"MNIST files not found under {DATA_ROOT!r} (set CNT_DATA_ROOT); expected "
            "train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte, "
            "t10k-labels-idx1-ubyte (optionally .gz)",
        )


# ------------------------------------------------------------- shared pools
#
# Criteria 1, 2 and 8 reuse the same trained pools, so they are memoized at
# module level rather than retrained per test.

_CACHE = {}


def _mnist_data():
    if "data" not in _CACHE:
        _CACHE["data"] = (
            dataset_from_root("mnist", DATA_ROOT, "train"),
            dataset_from_root("mnist", DATA_ROOT, "test"),
        )
    return _CACHE["data"]


def _mnist_pool(kind, depth=3, pool_size=POOL_SIZE):
    key = (kind, depth, pool_size)
    if key not in _CACHE:
        train_ds, test_ds = _mnist_data()
        spec = default_architecture(kind, "mnist", depth=depth)
        loss = "mse" if kind == "AE" else "softmax_cross_entropy"
        cfg = TrainConfig(loss=loss, seed=0)
        _CACHE[key] = train_pool(spec, pool_size, 0, train_ds, cfg, eval_dataset=test_ds)
    return _CACHE[key]


# --------------------------------------------------------------- criterion 1

def test_criterion_1_mnist_fc_accuracy():
    mnist_gate(1)
    pool = _mnist_pool("FC")
    accs = [m.eval_metric for m in pool.members]
    ok = all(0.85 <= a <= 0.97 for a in accs)
    report(1, ok, f"FC pool of {POOL_SIZE} test accuracies {['%.4f' % a for a in accs]} in [0.85, 0.97]")


# --------------------------------------------------------------- criterion 2

def test_criterion_2_mnist_cnn_rnn_ae():
    mnist_gate(2)
    cnn = [m.eval_metric for m in _mnist_pool("CNN").members]
    rnn = [m.eval_metric for m in _mnist_pool("RNN").members]
    ae = [m.eval_metric for m in _mnist_pool("AE").members]
    ok = all(a >= 0.85 for a in cnn) and all(a >= 0.80 for a in rnn) and all(a <= 0.08 for a in ae)
    report(
        2, ok,
        f"CNN acc min {min(cnn):.4f} >= 0.85, RNN acc min {min(rnn):.4f} >= 0.80, "
        f"AE mse max {max(ae):.4f} <= 0.08",
    )


# --------------------------------------------------------------- criterion 3

def test_criterion_3_cifar_ranges():
    if not os.environ.get("CNT_RUN_EXTENDED"):
        skip_report(3, "extended CIFAR-10 run disabled (set CNT_RUN_EXTENDED=1 to enable)")
    if not (cifar_present("train") and cifar_present("test")):
        skip_report(
            3,
            f"CIFAR-10 batches not found under {DATA_ROOT!r} (set CNT_DATA_ROOT); expected "
            "data_batch_1.bin .. data_batch_5.bin and test_batch.bin",
        )
    data = (
        dataset_from_root("cifar10", DATA_ROOT, "train"),
        dataset_from_root("cifar10", DATA_ROOT, "test"),
    )
    bands = {"FC": (0.25, 0.45), "CNN": (0.45, 0.65), "RNN": (0.35, 0.50)}
    results = {}
    ok = True
    for kind, (lo, hi) in bands.items():
        spec = default_architecture(kind, "cifar10")
        cfg = TrainConfig(init_std=0.5, epochs=20, seed=0)
        pool = train_pool(spec, POOL_SIZE, 0, data[0], cfg, eval_dataset=data[1])
        accs = [m.eval_metric for m in pool.members]
        results[kind] = accs
        ok = ok and all(lo <= a <= hi for a in accs)
    report(3, ok, f"CIFAR-10 accuracy bands {bands} vs {results}")


# --------------------------------------------------------------- criterion 4

def test_criterion_4_conv_toeplitz_equivalence():
    rng = np.random.default_rng(42)
    worst = 0.0
    checked = 0
    for kernel in (1, 2, 3):
        for stride in (1, 2):
            for _ in range(100):
                h = int(rng.integers(kernel, 13))
                w = int(rng.integers(kernel, 13))
                channels = int(rng.integers(1, 3))
                out_channels = int(rng.integers(1, 4))
                conv = conv2d(channels, h, w, out_channels, kernel, stride)
                spec = ArchitectureSpec(
                    "CNN", [conv, dense(conv.fan_out, 2)], "relu", "classification"
                ).validate()
                net = build_network(spec, 0.5, int(rng.integers(1 << 30)))
                net.params[0].bias[:] = rng.normal(size=out_channels)
                x = rng.normal(size=(1, channels * h * w))
                got = conv_neuron_strength(
                    net, SampleBatch(x, np.arange(1), 0, (channels, h, w)), 1
                ).values[0]
                want = conv_toeplitz_oracle(net.params[0], x[0].reshape(channels, h, w), stride)
                worst = max(worst, float(np.max(np.abs(got - want))))
                checked += 1
    report(4, worst < 1e-10, f"patch isolation vs Toeplitz oracle on {checked} instances, max |diff| {worst:.2e}")


# --------------------------------------------------------------- criterion 5

def test_criterion_5_rnn_unfolding_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 6))
        hidden = int(rng.integers(1, 9))
        steps = int(rng.integers(1, 9))
        activation = ("linear", "relu", "sigmoid")[int(rng.integers(3))]
        spec = ArchitectureSpec(
            "RNN", [recurrent(d, hidden, steps), dense(hidden, 2)], activation, "classification"
        ).validate()
        net = build_network(spec, 0.5, int(rng.integers(1 << 30)))
        net.params[0].bias[:] = rng.normal(size=hidden)
        x = rng.normal(size=(2, steps * d))
        shape = (1, steps, d)
        unfolded = rnn_unfolded_strength(net, SampleBatch(x, np.arange(2), 0, shape)).values
        loop = forward(net, x, image_shape=shape).pre_activations[0]
        worst = max(worst, float(np.max(np.abs(unfolded - loop))))
    report(5, worst < 1e-10, f"unfolded vs loop pre-activations on 100 instances, max |diff| {worst:.2e}")


# --------------------------------------------------------------- criterion 6

def test_criterion_6_gradient_checks():
    rng = np.random.default_rng(3)
    worst = 0.0
    ok = True
    for activation in ("linear", "relu", "sigmoid"):
        specs = [
            fc_spec([6, 5, 3], activation=activation),
            small_cnn_spec(activation=activation),
            small_rnn_spec(activation=activation),
        ]
        for spec in specs:
            net = make_net(spec, seed=int(rng.integers(1 << 30)), init_std=0.4)
            x = rng.normal(size=(2, spec.input_dim))
            y = rng.integers(0, spec.output_dim, size=2)
            if activation == "relu":
                # keep pre-activations away from the kink so the numeric
                # derivative is well defined
                for _ in range(50):
                    trace = forward(net, x)
                    if all(np.min(np.abs(p)) > 1e-6 for p in trace.pre_activations):
                        break
                    x = rng.normal(size=(2, spec.input_dim))
            passed, max_rel = grad_check(net, (x, y), tolerance=1e-4)
            worst = max(worst, max_rel)
            ok = ok and passed
    report(6, ok and worst < 1e-4, f"dense/conv/recurrent x 3 activations, max relative error {worst:.2e}")


# --------------------------------------------------------------- criterion 7

def test_criterion_7_metric_invariant_suite():
    rng = np.random.default_rng(11)
    started = time.perf_counter()
    checks = []

    # Eq. 1-2 double-loop oracle equivalence up to 32x32
    for _ in range(5):
        n_in, n_out = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        net = make_net(fc_spec([n_in, n_out, 2]))
        net.params[0].bias[:] = rng.normal(size=n_out)
        w, b = net.params[0].weights, net.params[0].bias
        terms = [w[i, j] + b[j] for i in range(n_in) for j in range(n_out)]
        mean = sum(terms) / len(terms)
        var = sum((t - mean) ** 2 for t in terms) / len(terms)
        got_mean, got_var = layer_link_stats(net, 1)
        checks.append(abs(got_mean - mean) < 1e-12 and abs(got_var - var) < 1e-12)

    # node-strength decomposition, every kind and node layer
    for net in (make_net(fc_spec([5, 4, 3])), make_net(small_cnn_spec()), make_net(small_rnn_spec())):
        for layer in range(len(net.spec.layers) + 1):
            checks.append(all(r.s_total == r.s_in + r.s_out for r in node_strength(net, layer)))

    # fluctuation translation invariance
    s = rng.normal(size=9)
    checks.append(abs(layer_fluctuation(s + 3.25) - layer_fluctuation(s)) < 1e-12)

    # strength/activation functional link for every activation kind
    x = rng.normal(size=(4, 5))
    for activation in ("linear", "relu", "sigmoid"):
        net = make_net(fc_spec([5, 4, 3], activation=activation))
        sb = SampleBatch(x, np.arange(4), 0)
        s_m = neuron_strength(net, sb, 1).values
        a_m = neuron_activation(net, sb, 1).values
        checks.append(np.allclose(a_m, apply_activation(activation, s_m), atol=1e-12))

    # scaling covariance
    net = make_net(fc_spec([4, 5, 3]))
    net.params[0].bias[:] = rng.normal(size=5)
    scaled = net.copy()
    for p in scaled.params:
        p.weights *= -2.0
        p.bias *= -2.0
    m0, v0 = layer_link_stats(net, 1)
    m1, v1 = layer_link_stats(scaled, 1)
    s0 = np.concatenate(node_strength_arrays(net, 1))
    s1 = np.concatenate(node_strength_arrays(scaled, 1))
    checks.append(abs(m1 + 2.0 * m0) < 1e-10 and abs(v1 - 4.0 * v0) < 1e-10)
    checks.append(np.allclose(s1, -2.0 * s0, atol=1e-10))
    checks.append(
        abs(layer_fluctuation(s1) - 2.0 * layer_fluctuation(s0)) < 1e-10
    )

    # Pearson and KS bounds on random inputs
    for _ in range(10):
        a = rng.normal(size=20)
        b = rng.normal(size=20) * rng.uniform(0.1, 5)
        r = pearson(a, b)
        checks.append(r is None or -1.0 <= r <= 1.0)
        ks = ks_statistic(a, rng.normal(size=15))
        checks.append(0.0 <= ks <= 1.0)

    # histogram conservation
    v = rng.normal(size=333)
    _, counts = histogram(v, bins=37)
    checks.append(int(counts.sum()) == 333)

    elapsed = time.perf_counter() - started
    report(7, all(checks) and elapsed < 60, f"{len(checks)} invariant checks in {elapsed:.2f}s")


# --------------------------------------------------------------- criterion 8

def test_criterion_8a_rnn_heatmap_ordering():
    mnist_gate("8a")
    pool = _mnist_pool("RNN")
    grids = []
    for m in pool.active_members():
        sb = sample_inputs(pool.dataset, 100, 100_000 + m.index)
        grids.append(rnn_strength_heatmap(m.network, sb).grid)
    grid = np.mean(grids, axis=0)
    central = grid[7:21].mean()
    outer = np.concatenate([grid[:7], grid[21:]]).mean()
    _, _, ks = compare_trained_untrained(pool, "neuron_strength", 1, samples_seed=100_000)
    ok = central > outer and ks > 0.05
    report(
        "8a", ok,
        f"heatmap central rows {central:.4f} > outer rows {outer:.4f}; trained-vs-untrained KS {ks:.3f} > 0.05",
    )


def _band_fractions(values):
    v = np.asarray(values)
    extremes = np.mean((v <= 0.1) | (v >= 0.9))
    mid = np.mean((v >= 0.45) & (v <= 0.55))
    return float(extremes), float(mid)


def test_criterion_8b_activation_band_ordering():
    mnist_gate("8b")
    fc = _mnist_pool("FC")
    rnn = _mnist_pool("RNN")
    fc_values = aggregate_metric(fc, "neuron_activation", len(fc.spec.layers), 100_000).values
    rnn_values = aggregate_metric(rnn, "neuron_activation", 1, 100_000).values
    fc_ext, fc_mid = _band_fractions(fc_values)
    _, rnn_mid = _band_fractions(rnn_values)
    ok = fc_ext > fc_mid and rnn_mid > fc_mid
    report(
        "8b", ok,
        f"FC extremes {fc_ext:.3f} > FC mid-band {fc_mid:.3f}; RNN mid-band {rnn_mid:.3f} > FC mid-band",
    )


def test_criterion_8c_depth_divergence():
    mnist_gate("8c")
    ae3 = _mnist_pool("AE", depth=3, pool_size=3)
    ae7 = _mnist_pool("AE", depth=7, pool_size=3)
    fc3 = _mnist_pool("FC", depth=3, pool_size=3)
    fc7 = _mnist_pool("FC", depth=7, pool_size=3)
    ks_ae = ks_statistic(
        aggregate_metric(ae3, "neuron_activation", 1, 100_000).values,
        aggregate_metric(ae7, "neuron_activation", 1, 100_000).values,
    )
    ks_fc = ks_statistic(
        aggregate_metric(fc3, "neuron_activation", 1, 100_000).values,
        aggregate_metric(fc7, "neuron_activation", 1, 100_000).values,
    )
    report("8c", ks_ae > ks_fc, f"AE 3-vs-7-layer KS {ks_ae:.3f} > matched FC KS {ks_fc:.3f}")


# --------------------------------------------------------------- criterion 9

def test_criterion_9_rerun_determinism(tmp_path):
    started = time.perf_counter()
    raw = {
        "output_dir": "placeholder",
        "dataset": {"name": "synthetic", "count": 256, "feature_dim": 8, "class_count": 3},
        "architecture": {"kind": "FC"},
        "pool": {"size": 2},
        "train": {"epochs": 2, "learning_rate": 0.2, "momentum": 0.0, "batch_size": 64},
        "correlations": [["node_strength_in", "neuron_strength", 1]],
        "include_untrained": True,
    }
    config = tmp_path / "smoke.json"
    config.write_text(json.dumps(raw))
    m1 = run_experiment(str(config), overrides={"out": str(tmp_path / "a")})
    m2 = run_experiment(str(config), overrides={"out": str(tmp_path / "b")})
    elapsed = time.perf_counter() - started
    same = m1.files == m2.files
    report(9, same and elapsed < 60,
           f"{len(m1.files)} files, digests identical across reruns, {elapsed:.2f}s")
