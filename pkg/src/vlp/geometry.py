"""Lambertian line-of-sight channel gain and its spatial derivatives.

Every function comes in two flavours: a scalar one taking a single
:class:`LedTransmitter` and receiver position (validating its inputs), and a
vectorised kernel :func:`lambertian_gain` that evaluates all LEDs at many
positions at once and is what the estimators and bounds run on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-12


class GeometryError(ValueError):
    """Receiver/LED configuration for which the channel formula is undefined."""


def as_vec3(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    return arr


def as_unit(v, name: str = "orientation") -> np.ndarray:
    arr = as_vec3(v, name)
    if abs(np.linalg.norm(arr) - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must be unit norm, |{name}| = {np.linalg.norm(arr)!r}")
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]`` in metres."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_vec3(self.lo, "box lo")
        hi = as_vec3(self.hi, "box hi")
        if np.any(hi <= lo):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def inflate(self, margin: float) -> "Box":
        return Box(self.lo - margin, self.hi + margin)

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class LedTransmitter:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    lambertian_order: float = 1.0
    initial_power: float = 10.0  # W
    decay_rate: float = 0.0  # 1/hour

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "LED position"))
        object.__setattr__(self, "orientation", as_unit(self.orientation, "LED orientation"))
        if not self.lambertian_order >= 1:
            raise ValueError(f"Lambertian order must be >= 1, got {self.lambertian_order}")
        if not self.initial_power > 0:
            raise ValueError(f"initial power must be > 0, got {self.initial_power}")
        if not self.decay_rate >= 0:
            raise ValueError(f"decay rate must be >= 0, got {self.decay_rate}")

    def with_decay(self, rate: float) -> "LedTransmitter":
        return LedTransmitter(self.position, self.orientation, self.lambertian_order,
                              self.initial_power, rate)


@dataclass(frozen=True)
class ReceiverModel:
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    pd_area: float = 1e-4  # m^2
    responsivity: float = 1.0  # A/W
    region: Box = field(default_factory=lambda: Box([-2.0, -2.0, 0.0], [2.0, 2.0, 3.0]))

    def __post_init__(self):
        object.__setattr__(self, "orientation", as_unit(self.orientation, "receiver orientation"))
        if not self.pd_area > 0:
            raise ValueError(f"PD area must be > 0, got {self.pd_area}")
        if not self.responsivity > 0:
            raise ValueError(f"responsivity must be > 0, got {self.responsivity}")


@dataclass(frozen=True)
class ChannelDerivatives:
    h: float
    grad: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class LedArray:
    """Column-stacked LED parameters for vectorised evaluation."""

    positions: np.ndarray  # (N, 3)
    orientations: np.ndarray  # (N, 3)
    orders: np.ndarray  # (N,)
    initial_powers: np.ndarray  # (N,)
    decay_rates: np.ndarray  # (N,)

    @classmethod
    def from_leds(cls, leds) -> "LedArray":
        leds = list(leds)
        if not leds:
            raise ValueError("at least one LED is required")
        return cls(
            positions=np.array([led.position for led in leds]),
            orientations=np.array([led.orientation for led in leds]),
            orders=np.array([float(led.lambertian_order) for led in leds]),
            initial_powers=np.array([float(led.initial_power) for led in leds]),
            decay_rates=np.array([float(led.decay_rate) for led in leds]),
        )

    def __len__(self):
        return len(self.orders)


def _safe_pow(base, expo, coef):
    # base**expo where the multiplying coefficient is non-zero, else 0 (avoids 0 * inf)
    out = np.zeros(np.broadcast(base, expo, coef).shape)
    mask = np.broadcast_to(coef != 0, out.shape)
    b = np.broadcast_to(base, out.shape)
    e = np.broadcast_to(expo, out.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[mask] = b[mask] ** e[mask]
    return out


def lambertian_gain(leds: LedArray, rx: ReceiverModel, positions, order: int = 0):
    """Channel gains of every LED at every position.

    Parameters
    ----------
    leds : LedArray
    rx : ReceiverModel
    positions : array_like, shape (..., 3)
    order : {0, 1, 2}
        Highest derivative to return.

    Returns
    -------
    h : ndarray (..., N)
    grad : ndarray (..., N, 3), only if ``order >= 1``
    hess : ndarray (..., N, 3, 3), only if ``order == 2``

    Invalid points (receiver on top of an LED, or a fractional Lambertian
    order with the receiver behind the LED plane) come back as NaN.
    """
    pos = np.asarray(positions, dtype=float)
    d = pos[..., None, :] - leds.positions  # l_R - l_T, (..., N, 3)
    nT = leds.orientations
    nR = rx.orientation
    m = leds.orders
    K = (m + 1) * rx.pd_area / (2 * np.pi)

    a = np.einsum("...k,...k->...", d, nT)  # irradiance projection
    c = -(d @ nR)  # incidence projection
    rho = np.sqrt(np.einsum("...k,...k->...", d, d))

    with np.errstate(divide="ignore", invalid="ignore"):
        am = a ** m
        u = am * c
        v = rho ** (m + 3)
        h = K * u / v
    bad = (rho == 0) | ((a < 0) & (m != np.round(m)))
    h = np.where(bad, np.nan, h)
    if order == 0:
        return h

    am1 = _safe_pow(a, m - 1, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        # du/dl_n and dv/dl_n
        du = (m * c * am1)[..., None] * nT - am[..., None] * nR
        dv = ((m + 3) * rho ** (m + 1))[..., None] * d
        grad = K[:, None] * (du / v[..., None] - (u / v**2)[..., None] * dv)
    grad = np.where(bad[..., None], np.nan, grad)
    if order == 1:
        return h, grad

    am2 = _safe_pow(a, m - 2, m * (m - 1))
    q = rho ** (m + 5)
    # d2u/dl_m dl_n
    nTnT = nT[:, :, None] * nT[:, None, :]
    nTnR = nT[:, :, None] * nR[None, None, :]
    sym = nTnR + np.swapaxes(nTnR, -1, -2)
    d2u = ((m * (m - 1) * c * am2)[..., None, None] * nTnT
           - (m * am1)[..., None, None] * sym)
    # b_n = (m+3) d_n u ;  db_n/dl_m = (m+3) (delta_mn u + d_n du_m), stored [m, n]
    eye = np.eye(3)
    db = (m + 3)[:, None, None] * (u[..., None, None] * eye
                                   + du[..., :, None] * d[..., None, :])
    dq = ((m + 5) * rho ** (m + 3))[..., None] * d
    b = ((m + 3) * u)[..., None] * d
    with np.errstate(divide="ignore", invalid="ignore"):
        hess = K[:, None, None] * (
            d2u / v[..., None, None]
            - dv[..., :, None] * du[..., None, :] / (v**2)[..., None, None]
            - db / q[..., None, None]
            + dq[..., :, None] * b[..., None, :] / (q**2)[..., None, None]
        )
    hess = np.where(bad[..., None, None], np.nan, hess)
    return h, grad, hess


def _check(led: LedTransmitter, rx_pos, rx: ReceiverModel) -> np.ndarray:
    p = as_vec3(rx_pos, "receiver position")
    d = p - led.position
    if np.linalg.norm(d) == 0:
        raise GeometryError(f"receiver coincides with LED at {led.position}")
    m = float(led.lambertian_order)
    if d @ led.orientation < 0 and m != round(m):
        raise GeometryError(
            f"receiver behind LED plane with non-integer Lambertian order {m}")
    return p


def channel_coeff(led: LedTransmitter, rx_pos, rx: ReceiverModel) -> float:
    """Raw Lambertian LOS gain (not clamped, may be <= 0 outside the LOS half-spaces)."""
    p = _check(led, rx_pos, rx)
    return float(lambertian_gain(LedArray.from_leds([led]), rx, p)[0])


def channel_grad(led: LedTransmitter, rx_pos, rx: ReceiverModel) -> np.ndarray:
    p = _check(led, rx_pos, rx)
    _, g = lambertian_gain(LedArray.from_leds([led]), rx, p, order=1)
    return g[0]


def channel_hessian(led: LedTransmitter, rx_pos, rx: ReceiverModel) -> np.ndarray:
    p = _check(led, rx_pos, rx)
    _, _, H = lambertian_gain(LedArray.from_leds([led]), rx, p, order=2)
    return H[0]


def channel_derivatives(led: LedTransmitter, rx_pos, rx: ReceiverModel) -> ChannelDerivatives:
    p = _check(led, rx_pos, rx)
    h, g, H = lambertian_gain(LedArray.from_leds([led]), rx, p, order=2)
    return ChannelDerivatives(float(h[0]), g[0], H[0])
