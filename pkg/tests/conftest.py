import numpy as np
import pytest

from vlp.estimators import SearchGrid
from vlp.scene import default_scene


def fd_gradient(f, p, step=1e-5):
    p = np.asarray(p, float)
    E = np.eye(len(p))
    return np.array([(f(p + step * E[k]) - f(p - step * E[k])) / (2 * step) for k in range(len(p))])


def fd_jacobian(f, p, step=1e-5):
    """Central-difference Jacobian of a vector function; row k = d f / d p_k."""
    p = np.asarray(p, float)
    E = np.eye(len(p))
    return np.array([(f(p + step * E[k]) - f(p - step * E[k])) / (2 * step) for k in range(len(p))])


def random_room_geometry(rng, n):
    """Receiver positions in the room's lower half and tilted unit orientations."""
    pos = rng.uniform([-1.8, -1.8, 0.1], [1.8, 1.8, 2.0], size=(n, 3))
    tilt = rng.normal(scale=0.15, size=(n, 3)) + [0, 0, 1]
    tilt /= np.linalg.norm(tilt, axis=1, keepdims=True)
    return pos, tilt


@pytest.fixture(scope="session")
def scene():
    return default_scene(sigma2=1e-12, decay_rate=1e-5, t_hours=10000.0)


@pytest.fixture(scope="session")
def grid(scene):
    return SearchGrid(scene.led_array, scene.receiver, scene.receiver.region)


def score_samples(scene, kind, point, n=100_000, seed=404):
    """Per-draw score vectors under the true measurement law.

    ``kind`` is 1 (decay-free model at ``point``), 2 (position + common rate at
    the truth) or 3 (position, known rates, at the truth).
    """
    from vlp.geometry import lambertian_gain
    from vlp.radiometry import noiseless_received, simulate_batch

    mean = noiseless_received(scene.leds, scene.receiver, scene.true_position, scene.t_hours)
    P = simulate_batch(mean, scene.noise, [(seed, k) for k in range(n)])
    w = 1.0 / scene.noise.variances
    P0 = np.array([led.initial_power for led in scene.leds]) * scene.receiver.responsivity
    h, g = lambertian_gain(scene.led_array, scene.receiver, np.asarray(point, float), 1)
    if kind == 1:
        return ((P - P0 * h) * P0 * w) @ g
    rates = np.array([led.decay_rate for led in scene.leds])
    amp = P0 * np.exp(-rates * scene.t_hours)
    J = amp[:, None] * g
    if kind == 2:
        J = np.column_stack([J, -scene.t_hours * amp * h])
    return ((P - mean) * w) @ J


def matches_second_moment(S, M, n_se=3.0):
    """Elementwise |mean(s s^T) - M| <= n_se standard errors."""
    prod = S[:, :, None] * S[:, None, :]
    emp = prod.mean(0)
    se = prod.std(0, ddof=1) / np.sqrt(len(S))
    return bool(np.all(np.abs(emp - M) <= n_se * se)), emp, se
