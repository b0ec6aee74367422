import math

import numpy as np
import pytest

from vlp.geometry import LedTransmitter, channel_coeff
from vlp.radiometry import (MeasurementSet, NoiseModel, noiseless_received, rng_stream,
                            simulate_batch, simulate_measurements, transmit_power)
from vlp.scene import default_scene


def test_transmit_power():
    led = LedTransmitter(np.array([0, 0, 3.0]), initial_power=10.0, decay_rate=1e-5)
    assert transmit_power(led, 10000) == pytest.approx(10 * math.exp(-0.1), rel=1e-15)
    assert transmit_power(led, 10000) == pytest.approx(9.0484, abs=1e-4)
    assert transmit_power(led.with_decay(0.0), 123456.0) == 10.0
    assert transmit_power(led, 0.0) == 10.0
    with pytest.raises(ValueError):
        transmit_power(led, -1.0)


def test_noiseless_received_composes_models(scene):
    P = noiseless_received(scene.leds, scene.receiver, scene.true_position, 10000)
    centre = scene.leds[4]
    assert np.array_equal(centre.position, [0, 0, 3])
    h = channel_coeff(centre, scene.true_position, scene.receiver)
    assert P[4] == pytest.approx(1.0 * 10 * math.exp(-0.1) * h, rel=1e-14)

    no_decay = default_scene(decay_rate=0.0)
    P0 = noiseless_received(no_decay.leds, no_decay.receiver, no_decay.true_position, 77777.0)
    hs = np.array([channel_coeff(led, no_decay.true_position, no_decay.receiver)
                   for led in no_decay.leds])
    np.testing.assert_allclose(P0, 10 * hs, rtol=1e-14)


def test_noiseless_received_decreasing_in_time(scene):
    ts = np.linspace(0, 60000, 13)
    P = np.array([noiseless_received(scene.leds, scene.receiver, scene.true_position, t) for t in ts])
    assert np.all(np.diff(P, axis=0) < 0)


def test_vanishing_noise(scene):
    mean = noiseless_received(scene.leds, scene.receiver, scene.true_position, 10000)
    m = simulate_measurements(scene.leds, scene.receiver, scene.true_position, 10000,
                              NoiseModel.equal(1e-300, 9), seed=3)
    assert np.max(np.abs(m.powers - mean)) < 1e-10


def test_determinism_and_key_sensitivity(scene):
    args = (scene.leds, scene.receiver, scene.true_position, 10000, scene.noise)
    a = simulate_measurements(*args, seed=42)
    b = simulate_measurements(*args, seed=42)
    c = simulate_measurements(*args, seed=43)
    assert np.array_equal(a.powers, b.powers)
    assert not np.array_equal(a.powers, c.powers)
    # negative seeds are accepted
    simulate_measurements(*args, seed=-5)


def test_batch_rows_match_single_draws(scene):
    mean = noiseless_received(scene.leds, scene.receiver, scene.true_position, 10000)
    keys = [(9, 2, k) for k in range(5)]
    P = simulate_batch(mean, scene.noise, keys)
    for k, key in enumerate(keys):
        single = simulate_measurements(scene.leds, scene.receiver, scene.true_position, 10000,
                                       scene.noise, seed=key)
        assert np.array_equal(P[k], single.powers)


def test_noise_statistics():
    n = 100_000
    sigma2 = np.array([1e-12, 4e-12, 0.25e-12])
    mean = np.array([5e-5, 3e-5, 1e-5])
    draws = simulate_batch(mean, NoiseModel(sigma2), [(1, k) for k in range(n)])
    sd = np.sqrt(sigma2)
    assert np.all(np.abs(draws.mean(0) - mean) < 4 * sd / math.sqrt(n))
    assert np.all(np.abs(draws.var(0, ddof=1) / sigma2 - 1) < 0.05)
    corr = np.corrcoef(draws.T)
    assert np.max(np.abs(corr[np.triu_indices(3, 1)])) < 0.02


def test_streams_are_order_independent():
    a = [rng_stream(1, 0, k).standard_normal(3) for k in range(4)]
    b = [rng_stream(1, 0, k).standard_normal(3) for k in reversed(range(4))][::-1]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_measurement_set_validation():
    with pytest.raises(ValueError):
        MeasurementSet(np.zeros(3), 1.0, 4)
    with pytest.raises(ValueError):
        MeasurementSet(np.zeros(3), -1.0, 3)
    with pytest.raises(ValueError):
        NoiseModel(np.array([1e-12, 0.0]))
    # negative powers are legal
    MeasurementSet(np.array([-1.0, 2.0]), 0.0, 2)
