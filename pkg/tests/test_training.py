"""Tests for the sign-based training loop: schedule, delta algebra against
hand computations, a finite-difference gradient oracle, and convergence."""

import copy

import numpy as np
import pytest
from numpy.testing import assert_allclose

from forgetsim.crossbar import CrossbarLayer, ReadErrorModel
from forgetsim.datasets import make_circle, make_zvn
from forgetsim.network import Network, mse_loss
from forgetsim.training import (
    TrainConfig,
    classification_accuracy,
    hidden_deltas,
    lr_schedule,
    manhattan_step,
    output_deltas,
    train,
)


def build_network(sizes, beta, seed, init_std_volts, append_bias):
    rng = np.random.default_rng(seed)
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layer = CrossbarLayer(a + (1 if append_bias else 0), b, beta=beta)
        layer.init_random(rng, init_std_volts)
        layers.append(layer)
    return Network(layers, gamma=0.1, append_bias=append_bias)


def zvn_network(seed):
    return build_network([10, 3], 1.0, seed, 0.05, append_bias=False)


def circle_network(seed, beta=2.0, init_std_volts=0.7):
    return build_network([2, 4, 2, 1], beta, seed, init_std_volts, append_bias=True)


# ---------------------------------------------------------------------------
# learning-rate schedule


def test_schedule_reference_values():
    cfg = TrainConfig()
    assert lr_schedule(0, 1.0, cfg) == pytest.approx(0.03)
    assert lr_schedule(19, 1.0, cfg) == pytest.approx(0.021)
    assert lr_schedule(0, 2.0, cfg) == pytest.approx(0.015)


def test_schedule_non_increasing():
    cfg = TrainConfig(epochs=200)
    etas = [lr_schedule(e, 1.0, cfg) for e in range(200)]
    assert all(a >= b for a, b in zip(etas, etas[1:]))


def test_schedule_step_boundaries():
    cfg = TrainConfig()
    assert lr_schedule(18, 1.0, cfg) == pytest.approx(0.03)
    assert lr_schedule(19, 1.0, cfg) == pytest.approx(0.03 * 0.7)
    assert lr_schedule(39, 1.0, cfg) == pytest.approx(0.03 * 0.7**2)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(eta0=0.0)
    with pytest.raises(ValueError):
        TrainConfig(decay=1.5)
    with pytest.raises(ValueError):
        TrainConfig(step_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)


# ---------------------------------------------------------------------------
# delta algebra


def test_output_deltas_zero_error():
    net = zvn_network(0)
    X, T = make_zvn()
    out, trace = net.infer(X)
    delta, agg = output_deltas(out, trace, net.gamma)  # targets equal outputs
    assert_allclose(delta, 0.0)
    assert_allclose(agg, 0.0)


def test_output_deltas_linear_regime():
    # single synapse with zero weight: output 0, tanh'(0) = 1, delta = target
    layer = CrossbarLayer(1, 1, beta=1.0)
    layer.program_weight_targets(np.array([[0.0]]))
    net = Network([layer], gamma=0.1)
    _, trace = net.infer(np.array([[0.5]]))
    delta, agg = output_deltas(np.array([[0.5]]), trace, net.gamma)
    assert_allclose(delta, [[0.5]])
    assert_allclose(agg, [[0.25]])  # x * delta = 0.5 * 0.5


def test_deltas_saturate():
    layer = CrossbarLayer(1, 1, beta=2.0)
    layer.program_weight_targets(np.array([[2.0]]))
    net = Network([layer], gamma=0.1)
    _, trace = net.infer(np.array([[1.0]]))  # pre-activation 2 gammas deep in tanh
    delta, _ = output_deltas(np.array([[-1.0]]), trace, net.gamma)
    assert np.all(np.abs(delta) < 0.15)


def test_hidden_deltas_match_hand_computed_chain():
    w1, w2, beta = 1.5, -0.8, 2.0
    l1 = CrossbarLayer(1, 1, beta=beta)
    l1.program_weight_targets(np.array([[w1]]))
    l2 = CrossbarLayer(1, 1, beta=beta)
    l2.program_weight_targets(np.array([[w2]]))
    net = Network([l1, l2], gamma=0.1)
    x, t = 0.6, 1.0
    out, trace = net.infer(np.array([[x]]))

    y1 = np.tanh(w1 * x)
    o = np.tanh(w2 * y1)
    assert_allclose(out, [[o]], rtol=1e-12)

    d2, agg2 = output_deltas(np.array([[t]]), trace, net.gamma)
    d2_hand = (t - o) * (1 - o**2)
    assert_allclose(d2, [[d2_hand]], rtol=1e-12)
    assert_allclose(agg2, [[y1 * d2_hand]], rtol=1e-12)

    d1, agg1 = hidden_deltas(d2, l2, trace, 0, net.gamma)
    d1_hand = d2_hand * beta * w2 * (1 - y1**2)
    assert_allclose(d1, [[d1_hand]], rtol=1e-12)
    assert_allclose(agg1, [[x * d1_hand]], rtol=1e-12)


def test_hidden_deltas_drop_bias_slot():
    net = circle_network(0)
    X, T = make_circle(20, 0)
    _, trace = net.infer(X)
    delta, _ = output_deltas(T, trace, net.gamma)
    d_hidden, agg = hidden_deltas(delta, net.layers[2], trace, 1, net.gamma)
    assert d_hidden.shape == (20, 2)  # bias input has no upstream neuron
    assert agg.shape == (5, 2)


def test_hidden_deltas_fresh_noise():
    net = circle_network(0)
    X, T = make_circle(20, 0)
    _, trace = net.infer(X)
    delta, _ = output_deltas(T, trace, net.gamma)
    noise = ReadErrorModel(std=0.0025, enabled=True)
    rng = np.random.default_rng(5)
    a, _ = hidden_deltas(delta, net.layers[2], trace, 1, net.gamma, noise, rng)
    b, _ = hidden_deltas(delta, net.layers[2], trace, 1, net.gamma, noise, rng)
    assert np.any(a != b)


# ---------------------------------------------------------------------------
# manhattan step


def test_step_moves_weights_by_eta_quanta():
    net = circle_network(0)
    X, T = make_circle(50, 1)
    before = [W.copy() for W in net.weight_matrices()]
    eta = 0.01
    manhattan_step(net, X, T, eta)
    for W0, W1 in zip(before, net.weight_matrices()):
        step = W1 - W0
        quanta = np.unique(np.round(step / eta).astype(int))
        assert set(quanta) <= {-1, 0, 1}
        assert_allclose(step, np.round(step / eta) * eta, atol=1e-12)


def test_step_returns_pre_update_loss():
    net = circle_network(0)
    X, T = make_circle(50, 1)
    out, _ = net.infer(X)
    expected = mse_loss(out, T)
    summary = manhattan_step(net, X, T, 0.01)
    assert summary.loss == pytest.approx(expected, rel=1e-12)


def test_zero_eta_is_a_no_op():
    net = circle_network(0)
    X, T = make_circle(50, 1)
    before = [W.copy() for W in net.weight_matrices()]
    summary = manhattan_step(net, X, T, 0.0)
    for W0, W1 in zip(before, net.weight_matrices()):
        assert np.array_equal(W0, W1)
    assert summary.signs[-1] is not None


def test_balanced_aggregate_means_no_pulse():
    # same input with opposite targets through a zero weight: the two
    # increments cancel exactly and sgn(0) must suppress the pulse
    layer = CrossbarLayer(1, 1, beta=1.0)
    layer.program_weight_targets(np.array([[0.0]]))
    net = Network([layer], gamma=0.1)
    X = np.array([[0.4], [0.4]])
    T = np.array([[0.5], [-0.5]])
    before = net.weight_matrices()[0].copy()
    summary = manhattan_step(net, X, T, 0.05)
    assert_allclose(summary.signs[0], [[0.0]])
    assert np.array_equal(net.weight_matrices()[0], before)


# ---------------------------------------------------------------------------
# gradient-sign oracle


def finite_difference_gradients(network, X, T, step=1e-5):
    """Central differences of the MSE loss w.r.t. each dimensionless weight."""
    grads = []
    for li, W in enumerate(network.weight_matrices()):
        G = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                probe = W.copy()
                probe[i, j] = W[i, j] + step
                network.layers[li].program_weight_targets(probe)
                out, _ = network.infer(X)
                lp = mse_loss(out, T)
                probe[i, j] = W[i, j] - step
                network.layers[li].program_weight_targets(probe)
                out, _ = network.infer(X)
                lm = mse_loss(out, T)
                G[i, j] = (lp - lm) / (2 * step)
        network.layers[li].program_weight_targets(W)
        grads.append(G)
    return grads


def test_signs_match_finite_difference_gradient():
    net = circle_network(0)
    X, T = make_circle(100, 1)
    signs = manhattan_step(copy.deepcopy(net), X, T, 1e-6).signs
    grads = finite_difference_gradients(net, X, T)
    agree = total = 0
    for s, g in zip(signs, grads):
        mask = np.abs(g) > 1e-6
        agree += int(np.sum(np.sign(s[mask]) == -np.sign(g[mask])))
        total += int(np.sum(mask))
    assert total > 20
    assert agree / total >= 0.95


# ---------------------------------------------------------------------------
# training loop


def test_train_trace_schema():
    net = zvn_network(0)
    X, T = make_zvn()
    tr = train(net, X, T, TrainConfig(epochs=5))
    assert tr.columns == ["epoch", "eta", "loss", "accuracy", "wall_time_model_s"]
    assert len(tr.rows) == 5
    assert_allclose(tr.column("eta"), 0.03)
    assert_allclose(tr.column("wall_time_model_s"), 0.1 * np.arange(1, 6))


def test_train_deterministic():
    X, T = make_zvn()
    a = train(zvn_network(3), X, T, TrainConfig(epochs=8))
    b = train(zvn_network(3), X, T, TrainConfig(epochs=8))
    assert a.rows == b.rows


def test_zvn_seed0_reaches_perfect_accuracy_quickly():
    X, T = make_zvn()
    tr = train(zvn_network(0), X, T, TrainConfig(epochs=10))
    assert tr.column("accuracy").max() == 1.0


def test_descent_tendency_on_zvn():
    X, T = make_zvn()
    good = total = 0
    for seed in range(5):
        tr = train(zvn_network(seed), X, T, TrainConfig(epochs=10))
        losses = tr.column("loss")
        good += int(np.sum(np.diff(losses) <= 0))
        total += losses.size - 1
    assert good / total >= 0.8


def test_accuracy_readouts():
    one_hot = classification_accuracy(
        np.array([[0.9, -0.8, 0.1], [0.2, 0.5, -0.1]]),
        np.array([[1, -1, -1], [-1, 1, -1]]),
    )
    assert one_hot == 1.0
    signed = classification_accuracy(np.array([[0.3], [-0.2]]), np.array([[1], [1]]))
    assert signed == 0.5


def test_discharge_during_training_hurts_final_loss():
    X, T = make_circle(100, 1)
    cfg_ideal = TrainConfig(epochs=150, eta0=0.24, update_pulse_s=0.0)
    cfg_leaky = TrainConfig(
        epochs=150, eta0=0.24, discharge_between_updates=True, update_pulse_s=3.0
    )
    ideal = train(circle_network(0, beta=4.0, init_std_volts=0.6), X, T, cfg_ideal)
    leaky = train(circle_network(0, beta=4.0, init_std_volts=0.6), X, T, cfg_leaky)
    assert ideal.final("loss") < 0.01
    assert leaky.final("loss") > ideal.final("loss")


def test_noise_changes_training_path():
    X, T = make_circle(100, 1)
    noisy_cfg = TrainConfig(
        epochs=5, eta0=0.12, read_noise=ReadErrorModel(std=0.0025, enabled=True)
    )
    a = train(circle_network(0), X, T, noisy_cfg, rng=np.random.default_rng(0))
    b = train(circle_network(0), X, T, noisy_cfg, rng=np.random.default_rng(1))
    assert a.column("loss").tolist() != b.column("loss").tolist()
