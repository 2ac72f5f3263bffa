"""Isothermal lumped-parameter model of a disproportionation redox flow battery.

States are ``x = [soc, soc_cell]``: the state of charge of the whole
reservoir and of the half-cell reactor volume. Internal units are seconds,
litres, moles and amperes; helpers below convert the lab units (mL, mL/min,
L/min) at ingestion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import constants
from scipy.special import expit

from .errors import DomainError, InstabilityError, InvalidParameterError, UnsupportedModeError

FARADAY = constants.physical_constants["Faraday constant"][0]
GAS_CONSTANT = constants.R

# lab settings of the self-discharge experiment
FLOW_RATE = 9.0 / 1000.0 / 60.0          # 9 mL/min in L/s
K_MT = 5.6142e-8 / 60.0                  # 5.6142e-8 L/min in L/s
FULL_CHARGE = 1.0 - 1e-6


def ml_to_l(v):
    return v / 1000.0


def ml_per_min_to_l_per_s(q):
    return q / 1000.0 / 60.0


def per_min_to_per_s(k):
    return k / 60.0


class SaturationWarning(UserWarning):
    """Inverted state of charge sits within 1e-6 of 0 or 1."""


@dataclass(frozen=True)
class BatteryParams:
    """Physical constants and geometry of one half of the battery.

    Volumes are in litres, ``c0`` in mol/L, ``temperature`` in kelvin.
    Defaults reproduce the lab cell (17.6 mL reservoir, 0.6985 mL half-cell,
    0.1 M V(acac)3, felt porosity 0.87, 2.2 V equilibrium potential, 275 K).
    """

    v_res: float = ml_to_l(17.6)
    v_cell: float = ml_to_l(0.6985)
    c0: float = 0.1
    epsilon: float = 0.87
    e0_cell: float = 2.2
    temperature: float = 275.0
    faraday: float = FARADAY
    gas_constant: float = GAS_CONSTANT

    def __post_init__(self):
        for name in ("v_res", "v_cell", "c0", "epsilon", "e0_cell",
                     "temperature", "faraday", "gas_constant"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidParameterError(f"{name} must be finite and > 0, got {val!r}")
        if self.epsilon > 1:
            raise InvalidParameterError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.v_cell >= self.v_res:
            raise InvalidParameterError("v_cell must be smaller than v_res")

    @property
    def nernst_slope(self):
        """``2RT/F`` in volts."""
        return 2.0 * self.gas_constant * self.temperature / self.faraday


@dataclass(frozen=True)
class ModelMatrices:
    """``xdot = A(Q) x + E q_x + B I`` and ``y = C x``."""

    flow_gain: float          # 1 / (epsilon * v_cell), multiplies Q in A(Q)
    b: np.ndarray
    e: np.ndarray
    c_row: np.ndarray

    def a_of_q(self, q_flow):
        r = q_flow * self.flow_gain
        return np.array([[0.0, 0.0], [r, -r]])


@dataclass(frozen=True)
class LinearCrossover:
    """Crossover baseline ``q_x = k_mt * c0 * soc_cell`` with ``k_mt`` in L/s."""

    k_mt: float = K_MT

    def __post_init__(self):
        if not (math.isfinite(self.k_mt) and self.k_mt >= 0):
            raise InvalidParameterError(f"k_mt must be >= 0, got {self.k_mt!r}")


def assemble_matrices(p: BatteryParams) -> ModelMatrices:
    if not isinstance(p, BatteryParams):
        raise InvalidParameterError("expected BatteryParams")
    e = np.array([-1.0 / (p.c0 * p.v_res), -1.0 / (p.epsilon * p.c0 * p.v_cell)])
    e.setflags(write=False)
    b = e / p.faraday
    b.setflags(write=False)
    c = np.array([0.0, 1.0])
    c.setflags(write=False)
    return ModelMatrices(flow_gain=1.0 / (p.epsilon * p.v_cell), b=b, e=e, c_row=c)


def dynamics(m: ModelMatrices, x, q_flow, current=0.0, q_x=0.0):
    """Time derivative of ``[soc, soc_cell]``."""
    x = np.asarray(x, dtype=float)
    return m.a_of_q(q_flow) @ x + m.e * q_x + m.b * current


def _check_open_circuit(current):
    if np.any(np.asarray(current) != 0):
        raise UnsupportedModeError(
            "output map is only defined at open circuit (current = 0); "
            "no overpotential model is available")


def nernst_output(p: BatteryParams, soc_cell, current=0.0):
    """Open-circuit cell voltage ``E0 + (2RT/F) ln(s / (1 - s))``."""
    _check_open_circuit(current)
    s = np.asarray(soc_cell, dtype=float)
    if np.any(~((s > 0) & (s < 1))):
        raise DomainError("soc_cell must lie strictly inside (0, 1)")
    v = p.e0_cell + p.nernst_slope * np.log(s / (1.0 - s))
    return float(v) if v.ndim == 0 else v


def invert_output(p: BatteryParams, v_out, current=0.0):
    """Recover ``soc_cell`` from an open-circuit voltage (logistic inverse)."""
    _check_open_circuit(current)
    s = expit((np.asarray(v_out, dtype=float) - p.e0_cell) / p.nernst_slope)
    if np.any((s < 1e-6) | (s > 1.0 - 1e-6)):
        warnings.warn("inverted soc_cell within 1e-6 of the interval ends", SaturationWarning,
                      stacklevel=2)
    return float(s) if s.ndim == 0 else s


def linear_crossover_flux(lc: LinearCrossover, p: BatteryParams, soc_cell):
    s = np.asarray(soc_cell, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise DomainError("soc_cell must lie in [0, 1]")
    q = lc.k_mt * p.c0 * s
    return float(q) if q.ndim == 0 else q


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    soc: np.ndarray
    soc_cell: np.ndarray
    voltage: np.ndarray        # NaN where the open-circuit output map is undefined
    q_x: np.ndarray
    current: np.ndarray
    flow: np.ndarray


def _zoh_inputs(inputs, n, dt, t0=0.0):
    """Expand ``inputs`` to per-step (current, flow) arrays held zero-order.

    ``inputs`` is either ``(current, flow)`` constants or a sequence of
    ``(t, current, flow)`` rows sorted by time.
    """
    grid = t0 + dt * np.arange(n)
    arr = np.asarray(inputs, dtype=float)
    if arr.ndim == 1:
        return np.full(n, arr[0]), np.full(n, arr[1])
    idx = np.searchsorted(arr[:, 0], grid + 1e-9 * dt, side="right") - 1
    idx = np.clip(idx, 0, len(arr) - 1)
    return arr[idx, 1], arr[idx, 2]


def simulate(p: BatteryParams, m: ModelMatrices, crossover: Callable[[float], float] | None,
             inputs=(0.0, FLOW_RATE), x0: Sequence[float] = (FULL_CHARGE, FULL_CHARGE),
             dt: float = 0.1, t_end: float = 3600.0) -> Trajectory:
    """Fixed-step RK4 integration of the battery model.

    Parameters
    ----------
    crossover : callable or None
        Maps ``soc_cell`` to the crossover flux in mol/s. ``None`` means no
        crossover.
    inputs : tuple or array
        ``(current [A], flow [L/s])`` or rows ``(t, current, flow)``; held
        zero-order between samples.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    n = int(round(t_end / dt)) + 1
    current, flow = _zoh_inputs(inputs, n, dt)
    if np.any(flow <= 0):
        raise InvalidParameterError("flow rate must be positive")
    if dt * flow.max() * m.flow_gain >= 0.5:
        raise InvalidParameterError("dt too large for the reactor exchange rate (dt*A21 >= 0.5)")
    x1, x2 = (float(v) for v in x0)
    for v in (x1, x2):
        if not -0.05 <= v <= 1.05:
            raise InvalidParameterError("initial state outside the valid range")
    qx_of = crossover if crossover is not None else (lambda s: 0.0)
    e1, e2 = float(m.e[0]), float(m.e[1])
    b1, b2 = float(m.b[0]), float(m.b[1])
    g = m.flow_gain

    soc = np.empty(n)
    cell = np.empty(n)
    qx = np.empty(n)
    soc[0], cell[0] = x1, x2
    qx[0] = qx_of(x2)
    half = 0.5 * dt
    for k in range(n - 1):
        cur = current[k]
        r = flow[k] * g
        f1 = b1 * cur
        f2 = b2 * cur
        # stage 1 reuses the flux already recorded for this grid point
        q = qx[k]
        k1a = e1 * q + f1
        k1b = r * (x1 - x2) + e2 * q + f2
        ya, yb = x1 + half * k1a, x2 + half * k1b
        q = qx_of(yb)
        k2a = e1 * q + f1
        k2b = r * (ya - yb) + e2 * q + f2
        ya, yb = x1 + half * k2a, x2 + half * k2b
        q = qx_of(yb)
        k3a = e1 * q + f1
        k3b = r * (ya - yb) + e2 * q + f2
        ya, yb = x1 + dt * k3a, x2 + dt * k3b
        q = qx_of(yb)
        k4a = e1 * q + f1
        k4b = r * (ya - yb) + e2 * q + f2
        x1 += dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        x2 += dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        if not (-0.05 <= x1 <= 1.05 and -0.05 <= x2 <= 1.05):
            raise InstabilityError(f"state left [-0.05, 1.05] at t = {(k + 1) * dt:g} s")
        soc[k + 1], cell[k + 1] = x1, x2
        qx[k + 1] = qx_of(x2)

    t = dt * np.arange(n)
    voltage = np.full(n, np.nan)
    ok = (current == 0) & (cell > 0) & (cell < 1)
    voltage[ok] = p.e0_cell + p.nernst_slope * np.log(cell[ok] / (1.0 - cell[ok]))
    return Trajectory(t=t, soc=soc, soc_cell=cell, voltage=voltage, q_x=qx,
                      current=current, flow=flow)


def linear_crossover_callback(lc: LinearCrossover, p: BatteryParams):
    """Fast scalar closure of :func:`linear_crossover_flux` for :func:`simulate`."""
    gain = lc.k_mt * p.c0
    return lambda s: gain * s
