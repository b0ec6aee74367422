import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlp.geometry import (Box, GeometryError, LedArray, LedTransmitter, ReceiverModel,
                          channel_coeff, channel_derivatives, channel_grad, channel_hessian,
                          lambertian_gain)

from conftest import fd_gradient, fd_jacobian, random_room_geometry

RX = ReceiverModel()
CENTRE_LED = LedTransmitter(np.array([0.0, 0.0, 3.0]))


def test_on_axis_value():
    # m = 1, both vertical: (2 A dz dz) / (2 pi dz^4)
    dz = 3.0 - 0.85
    expected = 2 * 1e-4 * dz * dz / (2 * math.pi * dz**4)
    assert channel_coeff(CENTRE_LED, [0, 0, 0.85], RX) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(6.886e-6, rel=1e-4)


def test_orthogonal_receiver_gives_zero():
    rx = ReceiverModel(orientation=np.array([1.0, 0.0, 0.0]))
    # LED directly above: (l_T - l_R) . n_R = 0
    assert channel_coeff(CENTRE_LED, [0, 0, 0.85], rx) == 0.0


def test_linear_in_pd_area():
    p = [0.3, -0.7, 1.1]
    h1 = channel_coeff(CENTRE_LED, p, ReceiverModel(pd_area=1e-4))
    h2 = channel_coeff(CENTRE_LED, p, ReceiverModel(pd_area=2e-4))
    h7 = channel_coeff(CENTRE_LED, p, ReceiverModel(pd_area=7e-4))
    assert h2 == pytest.approx(2 * h1, rel=1e-15)
    assert h7 == pytest.approx(7 * h1, rel=1e-15)


def test_negative_gain_is_not_clamped():
    # receiver above the LED plane facing down: one cosine factor flips sign
    down = ReceiverModel(orientation=np.array([0.0, 0.0, -1.0]))
    assert channel_coeff(CENTRE_LED, [0.5, 0.0, 3.4], down) < 0


def test_domain_errors():
    with pytest.raises(GeometryError):
        channel_coeff(CENTRE_LED, [0, 0, 3], RX)
    frac = LedTransmitter(np.array([0.0, 0.0, 3.0]), lambertian_order=1.5)
    with pytest.raises(GeometryError):
        channel_grad(frac, [0.2, 0.1, 3.5], RX)
    # same LED is fine below the plane
    assert channel_coeff(frac, [0.2, 0.1, 1.0], RX) > 0


def test_invalid_types():
    with pytest.raises(ValueError):
        LedTransmitter(np.array([0, 0, 3.0]), orientation=np.array([0, 0, -2.0]))
    with pytest.raises(ValueError):
        LedTransmitter(np.array([0, 0, 3.0]), initial_power=0.0)
    with pytest.raises(ValueError):
        ReceiverModel(pd_area=0.0)
    with pytest.raises(ValueError):
        Box([0, 0, 0], [1, 0, 1])


def test_gradient_on_axis_is_vertical():
    g = channel_grad(CENTRE_LED, [0, 0, 0.85], RX)
    assert g[0] == 0.0 and g[1] == 0.0
    assert g[2] > 0  # moving up brings the receiver closer


def test_gradient_regression_fixture():
    # central differences of channel_coeff, step 1e-5 m
    fd = np.array([-2.1893295634e-06, -2.1893295634e-06, 4.1979121516e-06])
    g = channel_grad(CENTRE_LED, [0.5, 0.5, 0.85], RX)
    np.testing.assert_allclose(g, fd, rtol=1e-8)


def test_hessian_regression_fixture():
    # second central differences of channel_coeff, step 1e-4 m
    fd = np.array([[-3.0964749460e-06, 1.2821841384e-06, 3.4768064401e-06],
                   [1.2821841384e-06, -3.0964749460e-06, 3.4768064401e-06],
                   [3.4768064401e-06, 3.4768064401e-06, 4.2404324553e-06]])
    H = channel_hessian(LedTransmitter(np.array([1.0, 1.0, 3.0])), [0.5, 0.5, 0.85], RX)
    np.testing.assert_allclose(H, fd, rtol=1e-6)


@pytest.mark.parametrize("order", [1.0, 2.0, 1.5, 3.7])
def test_derivatives_match_finite_differences(order):
    rng = np.random.default_rng(int(order * 10))
    pos, tilt = random_room_geometry(rng, 25)
    for p, n in zip(pos, tilt):
        rx = ReceiverModel(orientation=n)
        led = LedTransmitter(np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 3.0]),
                             lambertian_order=order)
        g = channel_grad(led, p, rx)
        fd = fd_gradient(lambda x: channel_coeff(led, x, rx), p)
        keep = np.abs(g) > 1e-18
        assert np.all(np.abs(g - fd)[keep] < 1e-6 * np.linalg.norm(g))
        H = channel_hessian(led, p, rx)
        fdH = fd_jacobian(lambda x: channel_grad(led, x, rx), p)
        assert np.abs(H - fdH).max() < 1e-5 * np.abs(H).max()
        assert np.abs(H - H.T).max() <= 1e-10 * np.abs(H).max()


def test_vertical_m1_closed_form():
    rng = np.random.default_rng(7)
    for _ in range(10):
        p = rng.uniform([-2, -2, 0], [2, 2, 2.5])
        r2 = p[0] ** 2 + p[1] ** 2
        dz = 3.0 - p[2]
        expected = 1e-4 * dz**2 / (math.pi * (r2 + dz**2) ** 2)
        assert channel_coeff(CENTRE_LED, p, RX) == pytest.approx(expected, rel=1e-12)


def test_vectorised_kernel_matches_scalar_api():
    leds = [LedTransmitter(np.array([x, y, 3.0]), lambertian_order=m)
            for x, y, m in [(-1, 1, 1), (0, 0, 2), (1, -1, 1.3)]]
    pts = np.array([[0.1, 0.2, 0.9], [-1.2, 0.4, 1.5]])
    h, g, H = lambertian_gain(LedArray.from_leds(leds), RX, pts, order=2)
    for a, p in enumerate(pts):
        for i, led in enumerate(leds):
            d = channel_derivatives(led, p, RX)
            assert h[a, i] == pytest.approx(d.h, rel=1e-14)
            np.testing.assert_allclose(g[a, i], d.grad, rtol=1e-13)
            np.testing.assert_allclose(H[a, i], d.hessian, rtol=1e-13, atol=1e-22)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-1.9, 1.9), y=st.floats(-1.9, 1.9), z=st.floats(0.0, 2.8),
       c=st.floats(0.01, 100.0))
def test_area_scaling_property(x, y, z, c):
    p = [x, y, z]
    h1 = channel_coeff(CENTRE_LED, p, ReceiverModel(pd_area=1e-4))
    hc = channel_coeff(CENTRE_LED, p, ReceiverModel(pd_area=c * 1e-4))
    assert hc == pytest.approx(c * h1, rel=1e-13, abs=1e-300)
