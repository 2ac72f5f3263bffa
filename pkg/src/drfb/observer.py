"""Adaptive Luenberger observer for state of charge and crossover flux.

    xhat'     = A(Q) xhat + E Psi(shat) thetahat + B I + L ytilde
    thetahat' = Lambda^-1 (Psi(shat) F ytilde - 0.5 sigma thetahat |ytilde|)

with ``ytilde = y - xhat[1]`` and ``shat`` the estimated cell state of charge
clipped to ``[-0.2, 1.2]``. States and parameters are integrated jointly by
RK4 at the telemetry step, measurements and inputs held over the step.
"""

from __future__ import annotations

import logging
import warnings
from math import exp, hypot, isfinite
from dataclasses import dataclass

import numpy as np

from .basis import RbfBasis, evaluate
from .battery import BatteryParams, ModelMatrices, SaturationWarning, invert_output
from .errors import DimensionError, DivergenceError, InvalidParameterError, TelemetryError

logger = logging.getLogger(__name__)

S_CLIP = (-0.2, 1.2)
DIVERGENCE_NORM = 10.0


@dataclass(frozen=True)
class ObserverConfig:
    gain_l: np.ndarray
    f_scalar: float
    lambda_inv: np.ndarray
    sigma: float = 0.1
    dt: float = 1.0

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lambda_inv, dtype=float))
        if lam.shape[0] != lam.shape[1]:
            raise DimensionError("lambda_inv must be square")
        if not np.allclose(lam, lam.T):
            raise InvalidParameterError("lambda_inv must be symmetric")
        if np.linalg.eigvalsh(lam)[0] <= 0:
            raise InvalidParameterError("lambda_inv must be positive definite")
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be >= 0")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        gain = np.asarray(self.gain_l, dtype=float)
        if gain.shape != (2,):
            raise DimensionError("gain_l must have two entries")
        object.__setattr__(self, "lambda_inv", lam)
        object.__setattr__(self, "gain_l", gain)

    @classmethod
    def from_gains(cls, sol, lambda_inv, sigma=0.1, dt=1.0, m=None):
        """Build from a :class:`GainSolution`; scalar ``lambda_inv`` means ``lambda_inv * I_m``."""
        lam = np.asarray(lambda_inv, dtype=float)
        if lam.ndim == 0:
            if m is None:
                raise DimensionError("basis size m needed for a scalar lambda_inv")
            lam = lam * np.eye(m)
        return cls(sol.l_vec, float(sol.f_scalar), lam, sigma, dt)

    @property
    def m(self):
        return self.lambda_inv.shape[0]


@dataclass(frozen=True)
class ObserverState:
    x_hat: np.ndarray
    theta_hat: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class EstimateRecord:
    t: float
    x_hat: np.ndarray
    theta_hat: np.ndarray
    y_tilde: float
    q_x_hat: float


@dataclass
class EstimateSeries:
    """Column-wise log of a run; indexing yields :class:`EstimateRecord`."""

    t: np.ndarray
    x_hat: np.ndarray          # (n, 2)
    theta_hat: np.ndarray      # (n, m)
    y_tilde: np.ndarray
    q_x_hat: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.t.size

    def __getitem__(self, k):
        return EstimateRecord(float(self.t[k]), self.x_hat[k], self.theta_hat[k],
                              float(self.y_tilde[k]), float(self.q_x_hat[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def s_hat(self):
        return np.clip(self.x_hat[:, 1], *S_CLIP)


def adaptation(cfg: ObserverConfig, psi_hat, y_tilde, theta_hat):
    """Parameter update rate ``Lambda^-1 (psi F ytilde - sigma thetahat |ytilde| / 2)``."""
    psi_hat = np.asarray(psi_hat, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if psi_hat.shape != (cfg.m,) or theta_hat.shape != (cfg.m,):
        raise DimensionError(f"expected vectors of length {cfg.m}")
    return cfg.lambda_inv @ (psi_hat * (cfg.f_scalar * y_tilde)
                             - 0.5 * cfg.sigma * theta_hat * abs(y_tilde))


class _Kernel:
    """Scalar RK4 integrator for the joint state/parameter system.

    Plain floats and lists: for two states and a handful of basis functions
    this is several times faster than small numpy arrays.
    """

    def __init__(self, cfg, m, basis):
        if basis.m != cfg.m:
            raise DimensionError(f"basis has m = {basis.m}, lambda_inv is {cfg.m}x{cfg.m}")
        self.e1, self.e2 = float(m.e[0]), float(m.e[1])
        self.b1, self.b2 = float(m.b[0]), float(m.b[1])
        self.g = float(m.flow_gain)
        self.l1, self.l2 = float(cfg.gain_l[0]), float(cfg.gain_l[1])
        self.f = float(cfg.f_scalar)
        self.half_sigma = 0.5 * float(cfg.sigma)
        lam = cfg.lambda_inv
        scalar = float(lam[0, 0])
        self.lam_scalar = scalar if np.array_equal(lam, scalar * np.eye(cfg.m)) else None
        self.lam_rows = lam.tolist()
        self.centers = basis.centers.tolist()
        self.inv_width = 1.0 / basis.width
        self.m = cfg.m

    def psi(self, x2):
        s = S_CLIP[0] if x2 < S_CLIP[0] else (S_CLIP[1] if x2 > S_CLIP[1] else x2)
        w = self.inv_width
        z = [-(s - c) * (s - c) * w for c in self.centers]
        zmax = max(z)
        ez = [exp(v - zmax) for v in z]
        tot = sum(ez)
        return [v / tot for v in ez]

    def rhs(self, x1, x2, th, y, cur, r):
        psi = self.psi(x2)
        yt = y - x2
        flux = sum(p * t for p, t in zip(psi, th))
        dx1 = self.e1 * flux + self.b1 * cur + self.l1 * yt
        dx2 = r * (x1 - x2) + self.e2 * flux + self.b2 * cur + self.l2 * yt
        fy = self.f * yt
        leak = self.half_sigma * abs(yt)
        v = [p * fy - leak * t for p, t in zip(psi, th)]
        if self.lam_scalar is not None:
            lam = self.lam_scalar
            dth = [lam * vi for vi in v]
        else:
            dth = [sum(a * b for a, b in zip(row, v)) for row in self.lam_rows]
        return dx1, dx2, dth

    def rk4(self, x1, x2, th, y, cur, q_flow, dt):
        r = q_flow * self.g
        h = 0.5 * dt
        a1, a2, at = self.rhs(x1, x2, th, y, cur, r)
        b1, b2, bt = self.rhs(x1 + h * a1, x2 + h * a2, [t + h * d for t, d in zip(th, at)], y, cur, r)
        c1, c2, ct = self.rhs(x1 + h * b1, x2 + h * b2, [t + h * d for t, d in zip(th, bt)], y, cur, r)
        d1, d2, dtt = self.rhs(x1 + dt * c1, x2 + dt * c2, [t + dt * d for t, d in zip(th, ct)],
                               y, cur, r)
        k = dt / 6.0
        x1 += k * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        x2 += k * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        th = [t + k * (p + 2.0 * q + 2.0 * u + w) for t, p, q, u, w in zip(th, at, bt, ct, dtt)]
        return x1, x2, th


def step(cfg: ObserverConfig, params: BatteryParams, matrices: ModelMatrices, basis: RbfBasis,
         st: ObserverState, y: float, current: float, q_flow: float) -> ObserverState:
    """Advance the observer by ``cfg.dt`` with measured ``y = soc_cell``."""
    if not np.isfinite([y, current, q_flow]).all():
        raise InvalidParameterError("observer inputs must be finite")
    if not q_flow > 0:
        raise InvalidParameterError("flow rate must be positive")
    ker = _Kernel(cfg, matrices, basis)
    theta = np.asarray(st.theta_hat, dtype=float)
    if theta.shape != (ker.m,):
        raise DimensionError(f"theta_hat must have length {ker.m}")
    x1, x2, th = ker.rk4(float(st.x_hat[0]), float(st.x_hat[1]), theta.tolist(),
                         float(y), float(current), float(q_flow), cfg.dt)
    if not (isfinite(x1) and isfinite(x2)) or hypot(x1, x2) > DIVERGENCE_NORM:
        raise DivergenceError(f"state estimate diverged at t = {st.t + cfg.dt:g} s")
    return ObserverState(np.array([x1, x2]), np.array(th), st.t + cfg.dt)


def run(cfg: ObserverConfig, params: BatteryParams, matrices: ModelMatrices, basis: RbfBasis,
        trace, init: ObserverState) -> EstimateSeries:
    """Run the observer over a telemetry trace.

    The trace is resampled to ``cfg.dt`` if needed; voltages are inverted to
    ``y = soc_cell`` through the open-circuit output map. One record is
    emitted per grid instant, holding the estimate *before* that instant's
    measurement is applied.
    """
    from .telemetry import resample

    m = basis.m
    theta0 = np.broadcast_to(np.asarray(init.theta_hat, dtype=float), (m,)).copy()
    if len(trace) == 0:
        return EstimateSeries(np.zeros(0), np.zeros((0, 2)), np.zeros((0, m)),
                              np.zeros(0), np.zeros(0), np.zeros(0))
    if len(trace) > 1:
        gap = float(np.max(np.diff(trace.t)))
        if gap > 10.0 * cfg.dt:
            raise TelemetryError(f"telemetry gap of {gap:g} s exceeds 10 * dt = {10 * cfg.dt:g} s")
    if trace.dt_resampled is None or not np.isclose(trace.dt_resampled, cfg.dt):
        trace = resample(trace, cfg.dt)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SaturationWarning)
        y = np.asarray(invert_output(params, trace.voltage, trace.current), dtype=float)
    if caught:
        logger.warning("%d measurement(s) saturate the voltage inversion", len(caught))

    n = len(trace)
    ker = _Kernel(cfg, matrices, basis)
    xs = [None] * n
    ths = [None] * n
    x1, x2 = (float(v) for v in init.x_hat)
    th = theta0.tolist()
    dt = cfg.dt
    ys, cur, flow = y.tolist(), trace.current.tolist(), trace.flow.tolist()
    for k in range(n):
        xs[k] = (x1, x2)
        ths[k] = th
        if k == n - 1:
            break
        x1, x2, th = ker.rk4(x1, x2, th, ys[k], cur[k], flow[k], dt)
        if not (isfinite(x1) and isfinite(x2)) or hypot(x1, x2) > DIVERGENCE_NORM:
            raise DivergenceError(f"state estimate diverged at t = {trace.t[k + 1]:g} s")
    xs = np.array(xs)
    ths = np.array(ths).reshape(n, m)
    s_hat = np.clip(xs[:, 1], *S_CLIP)
    q_hat = np.sum(evaluate(basis, s_hat) * ths, axis=1)
    return EstimateSeries(t=trace.t.copy(), x_hat=xs, theta_hat=ths, y_tilde=y - xs[:, 1],
                          q_x_hat=q_hat, y=y)
