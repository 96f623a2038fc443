"""Link-weight moments, node strength, and layer fluctuation.

Every derived value is checked against an explicit edge-enumeration oracle:
the layer is expanded into its literal list of (edge term) reals and the
metric recomputed with plain loops.
"""

import numpy as np
import pytest

from cntnn import (
    MetricError,
    Network,
    build_network,
    layer_fluctuation,
    layer_link_stats,
    layer_stats,
    link_weight_mean,
    link_weight_variance,
    node_strength,
    node_strength_arrays,
)
from cntnn.network import LayerParams
from cntnn.specs import ArchitectureSpec, conv2d, dense, recurrent

from conftest import fc_spec, make_net, small_cnn_spec, small_rnn_spec


# ---------------------------------------------------------------- oracles

def dense_edge_terms(w, b):
    terms = []
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            terms.append(w[i, j] + b[j])
    return terms


def conv_edge_terms(lay, w, b):
    """One term per physical edge of the unrolled convolution graph."""
    terms = []
    for _y in range(lay.out_height):
        for _x in range(lay.out_width):
            for c in range(w.shape[0]):
                for o in range(w.shape[1]):
                    for i in range(lay.kernel_size):
                        for j in range(lay.kernel_size):
                            terms.append(w[c, o, i, j] + b[o])
    return terms


def recurrent_edge_terms(w, u, b):
    terms = []
    for i in range(w.shape[0]):
        for k in range(w.shape[1]):
            terms.append(w[i, k] + b[k])
    for h in range(u.shape[0]):
        for k in range(u.shape[1]):
            terms.append(u[h, k])
    return terms


def loop_stats(terms):
    n = len(terms)
    mean = sum(terms) / n
    var = sum((t - mean) ** 2 for t in terms) / n
    return mean, var


def dense_layer(w, b):
    return LayerParams(np.asarray(w, dtype=float), np.asarray(b, dtype=float))


# ------------------------------------------------------- link mean/variance

def test_link_mean_zero_network():
    assert link_weight_mean(dense_layer(np.zeros((3, 4)), np.zeros(4))) == 0.0


def test_link_mean_constant_weights():
    assert link_weight_mean(dense_layer(np.full((5, 2), 2.5), np.zeros(2))) == pytest.approx(2.5)


def test_link_mean_handworked_example():
    p = dense_layer([[1.0, -1.0], [2.0, 0.0]], [0.0, 0.0])
    oracle_mean, _ = loop_stats(dense_edge_terms(p.weights, p.bias))
    assert oracle_mean == pytest.approx(0.5)
    assert link_weight_mean(p) == pytest.approx(0.5)


def test_link_variance_constant_weights():
    assert link_weight_variance(dense_layer(np.full((4, 4), 3.0), np.zeros(4))) == 0.0


def test_link_variance_handworked_example():
    p = dense_layer([[1.0, -1.0]], [0.0, 0.0])
    _, oracle_var = loop_stats(dense_edge_terms(p.weights, p.bias))
    assert oracle_var == pytest.approx(1.0)
    assert link_weight_variance(p) == pytest.approx(1.0)


def test_link_variance_bias_translation_invariance(rng):
    w = rng.normal(size=(6, 5))
    b = rng.normal(size=5)
    before = link_weight_variance(dense_layer(w, b))
    after = link_weight_variance(dense_layer(w, b + 7.25))
    assert after == pytest.approx(before, abs=1e-12)


@pytest.mark.parametrize("n_in,n_out", [(1, 1), (2, 3), (7, 5), (32, 32)])
def test_link_stats_match_double_loop(n_in, n_out, rng):
    w = rng.normal(size=(n_in, n_out))
    b = rng.normal(size=n_out)
    p = dense_layer(w, b)
    mean, var = loop_stats(dense_edge_terms(w, b))
    assert abs(link_weight_mean(p) - mean) < 1e-12
    assert abs(link_weight_variance(p) - var) < 1e-12


def test_link_variance_nonnegative(rng):
    for _ in range(20):
        w = rng.normal(size=(4, 6)) * rng.uniform(0.1, 50)
        b = rng.normal(size=6)
        assert link_weight_variance(dense_layer(w, b)) >= 0.0


def test_link_stats_reject_empty_layer():
    with pytest.raises(MetricError, match="empty"):
        link_weight_mean(dense_layer(np.zeros((0, 3)), np.zeros(3)))
    with pytest.raises(MetricError, match="empty"):
        link_weight_variance(dense_layer(np.zeros((0, 3)), np.zeros(3)))


def test_link_stats_reject_non_dense():
    net = make_net(small_cnn_spec())
    with pytest.raises(MetricError, match="dense"):
        link_weight_mean(net.params[0])


def test_layer_link_stats_conv_matches_edge_enumeration(rng):
    net = make_net(small_cnn_spec(h=5, w=7, out_channels=3, kernel=2, stride=2))
    lay = net.spec.layers[0]
    p = net.params[0]
    p.bias[:] = rng.normal(size=p.bias.shape)
    mean, var = loop_stats(conv_edge_terms(lay, p.weights, p.bias))
    got_mean, got_var = layer_link_stats(net, 1)
    assert abs(got_mean - mean) < 1e-12
    assert abs(got_var - var) < 1e-12


def test_layer_link_stats_recurrent_matches_edge_enumeration(rng):
    net = make_net(small_rnn_spec(d=3, hidden=4, steps=2))
    p = net.params[0]
    p.bias[:] = rng.normal(size=p.bias.shape)
    mean, var = loop_stats(recurrent_edge_terms(p.weights, p.recurrent_weights, p.bias))
    got_mean, got_var = layer_link_stats(net, 1)
    assert abs(got_mean - mean) < 1e-12
    assert abs(got_var - var) < 1e-12


def test_layer_link_stats_rejects_bad_index():
    net = make_net(fc_spec([3, 2]))
    for bad in (0, 2, -1):
        with pytest.raises(MetricError, match="out of range"):
            layer_link_stats(net, bad)


# ------------------------------------------------------------ node strength

def test_node_strength_handworked_example():
    # one hidden node fed by column [1, 2] with bias 0.5, emitting row [3, -1]
    spec = fc_spec([2, 1, 2])
    net = build_network(spec, 0.5, 0)
    net.params[0].weights[:] = np.array([[1.0], [2.0]])
    net.params[0].bias[:] = np.array([0.5])
    net.params[1].weights[:] = np.array([[3.0, -1.0]])
    (rec,) = node_strength(net, 1)
    assert rec.s_in == pytest.approx(4.0)
    assert rec.s_out == pytest.approx(2.0)
    assert rec.s_total == pytest.approx(6.0)


def test_node_strength_zero_network():
    net = make_net(fc_spec([3, 4, 2]))
    for p in net.params:
        p.weights[:] = 0.0
        p.bias[:] = 0.0
    for layer in range(3):
        for rec in node_strength(net, layer):
            assert rec.s_in == 0.0 and rec.s_out == 0.0 and rec.s_total == 0.0


def test_node_strength_boundary_conventions():
    net = make_net(fc_spec([3, 4, 2]))
    assert all(r.s_in == 0.0 for r in node_strength(net, 0))
    assert all(r.s_out == 0.0 for r in node_strength(net, 2))


def test_node_strength_decomposition_exact():
    nets = [
        make_net(fc_spec([5, 4, 3])),
        make_net(small_cnn_spec()),
        make_net(small_rnn_spec()),
    ]
    for net in nets:
        for p in net.params:
            p.bias[:] = np.random.default_rng(7).normal(size=p.bias.shape)
        for layer in range(len(net.spec.layers) + 1):
            for rec in node_strength(net, layer):
                assert rec.s_total == rec.s_in + rec.s_out  # exact, not approx


def test_node_strength_dense_matches_enumeration(rng):
    net = make_net(fc_spec([6, 5, 3]))
    for p in net.params:
        p.bias[:] = rng.normal(size=p.bias.shape)
    w0, b0 = net.params[0].weights, net.params[0].bias
    w1 = net.params[1].weights
    s_in, s_out = node_strength_arrays(net, 1)
    for k in range(5):
        want_in = sum(w0[i, k] + b0[k] for i in range(6))
        want_out = sum(w1[k, j] for j in range(3))
        assert abs(s_in[k] - want_in) < 1e-12
        assert abs(s_out[k] - want_out) < 1e-12


def test_node_strength_per_node_bias_mode(rng):
    net = make_net(fc_spec([6, 5, 3]))
    net.params[0].bias[:] = rng.normal(size=5)
    per_edge, _ = node_strength_arrays(net, 1, bias_mode="per_edge")
    per_node, _ = node_strength_arrays(net, 1, bias_mode="per_node")
    col = net.params[0].weights.sum(axis=0)
    np.testing.assert_allclose(per_edge, col + 6 * net.params[0].bias, atol=1e-12)
    np.testing.assert_allclose(per_node, col + net.params[0].bias, atol=1e-12)


def test_node_strength_rejects_bad_bias_mode():
    net = make_net(fc_spec([3, 2]))
    with pytest.raises(MetricError, match="bias_mode"):
        node_strength(net, 1, bias_mode="never")


def test_node_strength_rejects_bad_layer():
    net = make_net(fc_spec([3, 2]))
    for bad in (-1, 2):
        with pytest.raises(MetricError, match="out of range"):
            node_strength(net, bad)


def test_conv_out_neuron_in_strength_matches_enumeration(rng):
    net = make_net(small_cnn_spec(h=5, w=6, out_channels=2, kernel=3, stride=1))
    lay = net.spec.layers[0]
    p = net.params[0]
    p.bias[:] = rng.normal(size=p.bias.shape)
    s_in, _ = node_strength_arrays(net, 1)
    assert s_in.shape == (lay.fan_out,)
    idx = 0
    for o in range(lay.out_channels):
        want = sum(
            p.weights[c, o, i, j] + p.bias[o]
            for c in range(p.weights.shape[0])
            for i in range(lay.kernel_size)
            for j in range(lay.kernel_size)
        )
        for _pos in range(lay.out_height * lay.out_width):
            assert abs(s_in[idx] - want) < 1e-12
            idx += 1


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_input_node_out_strength_matches_enumeration(stride, rng):
    net = make_net(small_cnn_spec(h=6, w=7, out_channels=2, kernel=3, stride=stride))
    lay = net.spec.layers[0]
    w = net.params[0].weights
    _, s_out = node_strength_arrays(net, 0)
    cover = np.zeros((lay.in_channels, lay.in_height, lay.in_width))
    for oy in range(lay.out_height):
        for ox in range(lay.out_width):
            for c in range(lay.in_channels):
                for o in range(lay.out_channels):
                    for i in range(lay.kernel_size):
                        for j in range(lay.kernel_size):
                            cover[c, oy * stride + i, ox * stride + j] += w[c, o, i, j]
    np.testing.assert_allclose(s_out, cover.reshape(-1), atol=1e-12)


def test_recurrent_hidden_strength_matches_enumeration(rng):
    net = make_net(small_rnn_spec(d=3, hidden=4, steps=5, classes=2))
    for p in net.params:
        p.bias[:] = rng.normal(size=p.bias.shape)
    w, u, b = net.params[0].weights, net.params[0].recurrent_weights, net.params[0].bias
    head = net.params[1].weights
    s_in, s_out = node_strength_arrays(net, 1)
    for k in range(4):
        want_in = sum(w[i, k] + b[k] for i in range(3)) + sum(u[h, k] for h in range(4))
        want_out = sum(u[k, h] for h in range(4)) + sum(head[k, j] for j in range(2))
        assert abs(s_in[k] - want_in) < 1e-12
        assert abs(s_out[k] - want_out) < 1e-12


def test_recurrent_source_nodes():
    net = make_net(small_rnn_spec(d=3, hidden=4))
    s_in, s_out = node_strength_arrays(net, 0)
    assert s_in.shape == (3,)  # per-step features, not steps*features
    np.testing.assert_array_equal(s_in, np.zeros(3))
    np.testing.assert_allclose(s_out, net.params[0].weights.sum(axis=1), atol=1e-12)


def test_terminal_recurrent_layer_has_zero_out_strength():
    spec = ArchitectureSpec(
        "RNN", [recurrent(3, 4, 5)], "sigmoid", "classification"
    ).validate()
    net = build_network(spec, 0.5, 0)
    _, s_out = node_strength_arrays(net, 1)
    np.testing.assert_array_equal(s_out, np.zeros(4))


# -------------------------------------------------------- layer fluctuation

def test_fluctuation_constant_strengths():
    assert layer_fluctuation([1.0, 1.0, 1.0]) == 0.0


def test_fluctuation_handworked_example():
    assert layer_fluctuation([0.0, 2.0]) == pytest.approx(1.0)


def test_fluctuation_singleton():
    for s in (-3.0, 0.0, 42.0):
        assert layer_fluctuation([s]) == 0.0


def test_fluctuation_rejects_empty():
    with pytest.raises(MetricError, match="non-empty"):
        layer_fluctuation([])


def test_fluctuation_translation_invariance(rng):
    s = rng.normal(size=11)
    assert layer_fluctuation(s + 5.5) == pytest.approx(layer_fluctuation(s), abs=1e-12)


# --------------------------------------------------------------- properties

@pytest.mark.parametrize("c", [2.0, -3.0, 0.5])
def test_scaling_covariance(c, rng):
    net = make_net(fc_spec([4, 5, 3]))
    for p in net.params:
        p.bias[:] = rng.normal(size=p.bias.shape)
    scaled = net.copy()
    for p in scaled.params:
        p.weights *= c
        p.bias *= c
    for layer in (1, 2):
        mean, var = layer_link_stats(net, layer)
        mean_c, var_c = layer_link_stats(scaled, layer)
        assert mean_c == pytest.approx(c * mean, abs=1e-10)
        assert var_c == pytest.approx(c * c * var, abs=1e-10)
        s_in, s_out = node_strength_arrays(net, layer)
        s_in_c, s_out_c = node_strength_arrays(scaled, layer)
        np.testing.assert_allclose(s_in_c, c * s_in, atol=1e-10)
        np.testing.assert_allclose(s_out_c, c * s_out, atol=1e-10)
        rec = layer_stats(net, layer)
        rec_c = layer_stats(scaled, layer)
        assert rec_c.fluctuation_in == pytest.approx(abs(c) * rec.fluctuation_in, abs=1e-10)
        assert rec_c.fluctuation_out == pytest.approx(abs(c) * rec.fluctuation_out, abs=1e-10)
        assert rec_c.fluctuation_total == pytest.approx(abs(c) * rec.fluctuation_total, abs=1e-10)


def test_layer_stats_record_fields():
    net = make_net(fc_spec([4, 3, 2]))
    rec = layer_stats(net, 1)
    assert rec.layer == 1
    assert rec.variance >= 0.0
    assert rec.fluctuation_in >= 0.0 and rec.fluctuation_out >= 0.0
    s_in, s_out = node_strength_arrays(net, 1)
    assert rec.fluctuation_total == pytest.approx(layer_fluctuation(s_in + s_out))


def test_network_copy_isolated_from_metric_input():
    net = make_net(fc_spec([3, 2]))
    before = layer_link_stats(net, 1)
    _ = node_strength(net, 1)
    assert layer_link_stats(net, 1) == before
    assert isinstance(net, Network)
