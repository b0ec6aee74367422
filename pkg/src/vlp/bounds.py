"""Theoretical limits on position error for the three knowledge scenarios.

Scenario 1 (decay ignored) uses the misspecified CRB around the pseudo-true
point, plus the squared bias to bound error about the true position.
Scenarios 2 and 3 use ordinary Fisher information: 4 x 4 with the common decay
rate as a nuisance parameter, and 3 x 3 with known rates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import SingularityError
from .estimators import Scenario, SearchGrid, SearchOptions, refine
from .geometry import as_vec3, lambertian_gain
from .radiometry import decayed_powers
from .scene import Scene

COND_LIMIT = 1e12
PSEUDO_TRUE_MARGIN = 0.5  # m added to the room on every side
PSEUDO_TRUE_OPTIONS = SearchOptions(grid_shape=(41, 41, 31), xtol=1e-6, max_iter=2000)


@dataclass(frozen=True)
class PseudoTrueResult:
    point: np.ndarray
    kl_value: float
    bias: np.ndarray  # true position - point


@dataclass(frozen=True)
class BoundReport:
    scenario: Scenario
    fim: np.ndarray | None = None
    crb_trace: float | None = None
    mcrb: np.ndarray | None = None
    lb: np.ndarray | None = None
    pseudo_true: PseudoTrueResult | None = None
    a_matrix: np.ndarray | None = None
    b_matrix: np.ndarray | None = None

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        out = {"scenario": int(self.scenario), "fim": arr(self.fim), "crb_trace_m2": self.crb_trace}
        if self.scenario == Scenario.MISMATCH:
            out.update(
                mcrb_m2=arr(self.mcrb), lb_m2=arr(self.lb),
                mcrb_trace_m2=float(np.trace(self.mcrb)), lb_trace_m2=float(np.trace(self.lb)),
                pseudo_true_m=arr(self.pseudo_true.point), bias_m=arr(self.pseudo_true.bias),
                kl_value=self.pseudo_true.kl_value,
                a_matrix=arr(self.a_matrix), b_matrix=arr(self.b_matrix))
        return out


def _gains(scene: Scene, l_R, order: int):
    out = lambertian_gain(scene.led_array, scene.receiver, as_vec3(l_R, "position"), order)
    out = out if isinstance(out, tuple) else (out,)
    if not all(np.all(np.isfinite(x)) for x in out):
        raise SingularityError(f"channel undefined at {l_R}")
    return out


def _true_means(scene: Scene) -> np.ndarray:
    """Expected received powers under the true (decaying) model."""
    h = _gains(scene, scene.true_position, 0)[0]
    return scene.receiver.responsivity * decayed_powers(scene.leds, scene.t_hours) * h


def _undecayed_amp(scene: Scene) -> np.ndarray:
    return scene.receiver.responsivity * np.array([led.initial_power for led in scene.leds])


def checked_inverse(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Inverse guarded by the condition number of the unit-diagonal rescaled matrix.

    Rescaling by the diagonal makes the check independent of the parameters'
    units (metres vs 1/hour).
    """
    M = np.asarray(M, float)
    diag = np.abs(np.diag(M))
    if np.any(diag == 0) or not np.all(np.isfinite(M)):
        rank = int(np.linalg.matrix_rank(M)) if np.all(np.isfinite(M)) else None
        raise SingularityError(f"{what} is singular (rank {rank} of {len(M)})",
                               condition=np.inf, rank=rank)
    s = 1.0 / np.sqrt(diag)
    Ms = M * s[:, None] * s[None, :]
    cond = float(np.linalg.cond(Ms))
    if not cond < COND_LIMIT:
        rank = int(np.linalg.matrix_rank(Ms, tol=len(M) * np.finfo(float).eps * np.abs(Ms).max() * 10))
        raise SingularityError(f"{what} is ill-conditioned: condition number {cond:.3e} "
                               f"(rank {rank} of {len(M)})", condition=cond, rank=rank)
    return s[:, None] * np.linalg.inv(Ms) * s[None, :]


def kl_objective(l_R, scene: Scene) -> float:
    """KL divergence from the true measurement law to the decay-free model at ``l_R``."""
    h = lambertian_gain(scene.led_array, scene.receiver, as_vec3(l_R, "position"))
    if not np.all(np.isfinite(h)):
        return np.inf
    r = _true_means(scene) - _undecayed_amp(scene) * h
    return float(0.5 * np.sum(r * r / scene.noise.variances))


def pseudo_true(scene: Scene, options: SearchOptions = PSEUDO_TRUE_OPTIONS,
                margin: float = PSEUDO_TRUE_MARGIN) -> PseudoTrueResult:
    """Minimiser of :func:`kl_objective` over the room inflated by ``margin``."""
    box = scene.receiver.region.inflate(margin)
    grid = SearchGrid(scene.led_array, scene.receiver, box, options.grid_shape)
    E = _true_means(scene)
    A = grid.gains * _undecayed_amp(scene)
    w = 1.0 / scene.noise.variances
    obj = 0.5 * (((E - A) ** 2) @ w)
    x0 = grid.points[np.argmin(obj)]
    x, f, _ = refine(lambda x: kl_objective(x, scene), x0, box, grid.spacing,
                     options.xtol, options.max_iter)

    # Gauss-Newton polish on the weighted residuals; the zero-decay case then
    # lands on the true position to rounding precision.
    sd = np.sqrt(scene.noise.variances)
    c = _undecayed_amp(scene)

    def resid(p):
        return (E - c * _gains(scene, p, 0)[0]) / sd

    def jac(p):
        return -(c / sd)[:, None] * _gains(scene, p, 1)[1]

    try:
        sol = least_squares(resid, x, jac=jac, bounds=(box.lo, box.hi), method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        fx = kl_objective(sol.x, scene)
        if fx <= f:
            x, f = sol.x, fx
    except SingularityError:
        pass
    return PseudoTrueResult(x, max(f, 0.0), scene.true_position - x)


def matrix_A(scene: Scene, l_R0) -> np.ndarray:
    """Expected Hessian of the misspecified log-likelihood at ``l_R0`` under the true law."""
    h, g, H = _gains(scene, l_R0, 2)
    c = _undecayed_amp(scene)
    w = 1.0 / scene.noise.variances
    E = _true_means(scene)
    coef_hess = E * c * w - c * c * w * h
    A = (np.einsum("i,imn->mn", coef_hess, H)
         - np.einsum("i,im,in->mn", c * c * w, g, g))
    return 0.5 * (A + A.T)


def matrix_B(scene: Scene, l_R0) -> np.ndarray:
    """Second moment of the misspecified score at ``l_R0`` under the true law."""
    h, g = _gains(scene, l_R0, 1)
    c = _undecayed_amp(scene)
    w = 1.0 / scene.noise.variances
    r = _true_means(scene) - c * h
    diag = (c * w) ** 2 * (scene.noise.variances + r * r)
    B = np.einsum("i,im,in->mn", diag, g, g)
    # cross terms i != j
    cr = c * w * r
    u = np.einsum("i,im->im", cr, g)
    B += np.outer(u.sum(0), u.sum(0)) - np.einsum("im,in->mn", u, u)
    return 0.5 * (B + B.T)


def mcrb(scene: Scene, pt: PseudoTrueResult | None = None) -> BoundReport:
    pt = pt or pseudo_true(scene)
    A = matrix_A(scene, pt.point)
    B = matrix_B(scene, pt.point)
    Ainv = checked_inverse(A, "matrix A")
    M = Ainv @ B @ Ainv
    M = 0.5 * (M + M.T)
    lb = M + np.outer(pt.bias, pt.bias)
    return BoundReport(Scenario.MISMATCH, mcrb=M, lb=lb, pseudo_true=pt, a_matrix=A, b_matrix=B)


def fim_scenario2(scene: Scene, l_R, alpha: float) -> np.ndarray:
    """Fisher information for (x, y, z, alpha) with one common decay rate."""
    t = scene.t_hours
    h, g = _gains(scene, l_R, 1)
    Rp = scene.receiver.responsivity
    P0 = np.array([led.initial_power for led in scene.leds])
    w = 1.0 / scene.noise.variances
    decay = np.exp(-alpha * t)
    # d(mean_i)/dTheta = Rp P0_i e^{-alpha t} [grad h_i, -t h_i]
    J = np.empty((len(h), 4))
    J[:, :3] = (Rp * P0 * decay)[:, None] * g
    J[:, 3] = -t * Rp * P0 * decay * h
    F = J.T @ (w[:, None] * J)
    return 0.5 * (F + F.T)


def crb_scenario2(scene: Scene, l_R, alpha: float) -> float:
    inv = checked_inverse(fim_scenario2(scene, l_R, alpha), "scenario-2 FIM")
    return float(np.trace(inv[:3, :3]))


def fim_scenario3(scene: Scene, l_R) -> np.ndarray:
    _, g = _gains(scene, l_R, 1)
    amp = scene.receiver.responsivity * decayed_powers(scene.leds, scene.t_hours)
    w = 1.0 / scene.noise.variances
    F = np.einsum("i,im,in->mn", amp * amp * w, g, g)
    return 0.5 * (F + F.T)


def crb_scenario3(scene: Scene, l_R) -> float:
    return float(np.trace(checked_inverse(fim_scenario3(scene, l_R), "scenario-3 FIM")))


def bound_report(scene: Scene, scenario) -> BoundReport:
    """Bounds at the scene's true position (scenario 2 uses the first LED's rate as common)."""
    scenario = Scenario(scenario)
    if scenario == Scenario.MISMATCH:
        return mcrb(scene)
    if scenario == Scenario.MODEL_ONLY:
        alpha = scene.leds[0].decay_rate
        F = fim_scenario2(scene, scene.true_position, alpha)
        return BoundReport(scenario, fim=F, crb_trace=crb_scenario2(scene, scene.true_position, alpha))
    F = fim_scenario3(scene, scene.true_position)
    return BoundReport(scenario, fim=F, crb_trace=crb_scenario3(scene, scene.true_position))
