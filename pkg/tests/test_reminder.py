"""Tests for the reminder-pulse calibration map: construction invariants,
bilinear lookup, restoration fidelity, and serialization."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import forgetsim.reminder as reminder_mod
from forgetsim.crossbar import CrossbarLayer
from forgetsim.device import DeviceParams, step_discharge_array
from forgetsim.network import Network
from forgetsim.reminder import (
    W_START_GRID,
    apply_reminder,
    build_map,
    load_map,
    lookup,
    params_hash,
    save_map,
)

P = DeviceParams()


@pytest.fixture(scope="module")
def rmap():
    return build_map(P)


def synapse_network(w, beta=2.0):
    layer = CrossbarLayer(len(w), 1, beta=beta)
    layer.program_weight_targets(np.asarray(w, dtype=float).reshape(-1, 1))
    return Network([layer], gamma=0.1)


# ---------------------------------------------------------------------------
# map construction


def test_default_start_grid():
    assert_allclose(W_START_GRID, np.linspace(0.0, 1.0, 11))


def test_map_shape_and_time_grid(rmap):
    assert rmap.times.shape[0] >= 200
    assert np.all(np.diff(rmap.times) > 0)
    assert rmap.times[0] <= 0.1 and rmap.times[-1] == pytest.approx(20000.0)
    assert rmap.w_current.shape == (rmap.times.size, W_START_GRID.size)
    assert rmap.delta.shape == rmap.w_current.shape


def test_zero_start_row_is_identically_zero(rmap):
    assert np.all(rmap.delta[:, 0] == 0.0)
    assert np.all(rmap.w_current[:, 0] == 0.0)


def test_deltas_nonnegative_and_growing(rmap):
    assert np.all(rmap.delta >= 0.0)
    assert np.all(np.diff(rmap.delta, axis=0) >= -1e-15)


def test_headline_delta_anchor(rmap):
    d = lookup(rmap, 1.0, 20000.0)
    assert 0.5 <= d <= 0.75


def test_short_time_deltas_negligible(rmap):
    for w in np.linspace(0.0, 1.0, 21):
        assert lookup(rmap, w, 1.0) <= 1e-3
        assert lookup(rmap, w, 0.0) <= 1e-3


def test_too_few_samples_rejected():
    with pytest.raises(ValueError):
        build_map(P, n_time_samples=150)


def test_non_monotone_trajectory_detected(monkeypatch):
    def bad_step(v, params, dt, max_substep_s=1.0):
        return np.asarray(v) * 1.01  # grows instead of decaying

    monkeypatch.setattr(reminder_mod, "step_discharge_array", bad_step)
    with pytest.raises(RuntimeError):
        build_map(P, n_time_samples=200)


# ---------------------------------------------------------------------------
# lookup


def test_lookup_zero_weight_is_zero(rmap):
    for t in (0.0, 1.0, 100.0, 20000.0):
        assert lookup(rmap, 0.0, t) == 0.0


def test_lookup_exact_grid_nodes(rmap):
    for i in (0, 10, 100, rmap.times.size - 1):
        t = rmap.times[i]
        for j in (1, 5, 10):
            w = rmap.w_current[i, j]
            assert_allclose(lookup(rmap, w, t), rmap.delta[i, j], rtol=1e-10, atol=1e-14)


def test_lookup_odd_symmetry(rmap):
    for w in (0.15, 0.5, 0.83):
        for t in (50.0, 700.0, 12000.0):
            assert_allclose(lookup(rmap, -w, t), -lookup(rmap, w, t), rtol=1e-12)


def test_lookup_rejects_out_of_range_weight(rmap):
    with pytest.raises(ValueError):
        lookup(rmap, 1.001, 100.0)
    with pytest.raises(ValueError):
        lookup(rmap, -1.2, 100.0)
    lookup(rmap, 1.0, 100.0)
    lookup(rmap, -1.0, 100.0)


def test_lookup_clamps_time_to_grid(rmap):
    assert lookup(rmap, 0.7, 50000.0) == lookup(rmap, 0.7, 20000.0)
    assert lookup(rmap, 0.7, 0.0) == lookup(rmap, 0.7, rmap.times[0])


def test_lookup_vectorized_matches_scalar(rmap):
    w = np.array([-0.9, -0.2, 0.0, 0.4, 1.0])
    vec = lookup(rmap, w, 300.0)
    for wi, di in zip(w, vec):
        assert_allclose(di, lookup(rmap, float(wi), 300.0), rtol=1e-12)


def test_lookup_interpolates_between_rows(rmap):
    # halfway between two adjacent time rows the value lies between them
    i = 50
    t_mid = 0.5 * (rmap.times[i] + rmap.times[i + 1])
    w = 0.8
    lo = lookup(rmap, w, rmap.times[i])
    hi = lookup(rmap, w, rmap.times[i + 1])
    mid = lookup(rmap, w, t_mid)
    assert min(lo, hi) - 1e-12 <= mid <= max(lo, hi) + 1e-12


# ---------------------------------------------------------------------------
# applying reminders


@pytest.mark.parametrize("t", [50.0, 100.0, 500.0, 5000.0])
def test_restoration_fidelity(rmap, t):
    w0 = np.arange(-1.0, 1.0 + 1e-9, 0.05)
    net = synapse_network(w0)
    net.discharge(t)
    apply_reminder(net, rmap, t)
    w1 = net.layers[0].weights().ravel()
    assert np.max(np.abs(w1 - w0)) <= 0.02


def test_reminder_idempotent_at_zero_elapsed(rmap):
    net = synapse_network(np.array([0.9, 0.3, -0.6]))
    net.discharge(800.0)
    apply_reminder(net, rmap, 800.0)
    w_after_first = net.layers[0].weights().copy()
    apply_reminder(net, rmap, 0.0)
    moved = np.abs(net.layers[0].weights() - w_after_first)
    assert np.max(moved) <= 1e-3


def test_pipeline_odd_symmetry(rmap):
    w = np.array([0.85, 0.4, -0.15])
    pos = synapse_network(w.copy())
    neg = synapse_network(-w.copy())
    for net in (pos, neg):
        net.discharge(900.0)
        apply_reminder(net, rmap, 900.0)
    assert_allclose(
        pos.layers[0].weights(), -neg.layers[0].weights(), rtol=1e-10, atol=1e-12
    )


def test_reminder_with_measurement_noise_still_restores(rmap):
    w0 = np.array([0.8, -0.5, 0.2])
    net = synapse_network(w0.copy())
    net.discharge(600.0)
    apply_reminder(net, rmap, 600.0, read_noise_std=0.0025, rng=np.random.default_rng(0))
    w1 = net.layers[0].weights().ravel()
    assert np.max(np.abs(w1 - w0)) <= 0.03


def test_reminder_does_not_touch_zero_weights(rmap):
    net = synapse_network(np.array([0.0, 0.0]))
    net.discharge(1000.0)
    apply_reminder(net, rmap, 1000.0)
    assert_allclose(net.layers[0].weights(), 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# serialization


def test_map_round_trip(tmp_path, rmap):
    path = tmp_path / "map.csv"
    save_map(rmap, path)
    loaded = load_map(path, expected_params=P)
    assert loaded.device_hash == rmap.device_hash
    assert loaded.times.shape == rmap.times.shape
    for w in (0.3, 0.75, 1.0):
        for t in (60.0, 900.0, 18000.0):
            assert_allclose(lookup(loaded, w, t), lookup(rmap, w, t), rtol=1e-9)


def test_map_header_contains_device_hash(tmp_path, rmap):
    path = tmp_path / "map.csv"
    save_map(rmap, path)
    first = path.read_text().splitlines()[0]
    assert first.startswith("#")
    assert params_hash(P) in first


def test_load_map_rejects_mismatched_device(tmp_path, rmap):
    path = tmp_path / "map.csv"
    save_map(rmap, path)
    other = DeviceParams(k_shuttle=5e-7)
    with pytest.raises(ValueError):
        load_map(path, expected_params=other)


def test_discharged_weight_plus_delta_recovers_start(rmap):
    # core bookkeeping identity of the map: w_start = w_current + delta
    recon = rmap.w_current + rmap.delta
    assert_allclose(recon, np.broadcast_to(rmap.w_starts, recon.shape), atol=1e-9)


def test_map_consistent_with_direct_simulation(rmap):
    # independent oracle: one synapse discharged 3000 s, map must predict
    # exactly the weight lost by the device integrator
    w0 = 0.6
    v0 = np.array([w0 / 2.0])  # anti-symmetric split across the pair
    v1 = step_discharge_array(v0, P, 3000.0)
    w_cur = 2.0 * float(v1[0])
    predicted = lookup(rmap, w_cur, 3000.0)
    assert_allclose(predicted, w0 - w_cur, atol=2e-3)
