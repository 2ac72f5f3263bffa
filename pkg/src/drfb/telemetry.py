"""Telemetry traces: CSV ingestion, validation, resampling and synthetic twins.

CSV layout (header must match exactly, ``#`` lines are comments)::

    t_s,voltage_V,current_A,flow_mL_min

Flow is converted to L/s on load and back to mL/min on write.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .battery import (FLOW_RATE, BatteryParams, LinearCrossover, assemble_matrices,
                      linear_crossover_callback, ml_per_min_to_l_per_s, simulate)
from .errors import InvalidParameterError, TelemetryError

HEADER = ("t_s", "voltage_V", "current_A", "flow_mL_min")
MAX_GAP_FACTOR = 10.0


@dataclass(frozen=True)
class TelemetrySample:
    t: float
    voltage: float
    current: float
    flow: float          # L/s


@dataclass
class TelemetryTrace:
    t: np.ndarray
    voltage: np.ndarray
    current: np.ndarray
    flow: np.ndarray     # L/s
    dt_resampled: float | None = None
    source: str = "file"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "voltage", "current", "flow"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if not (self.t.size == self.voltage.size == self.current.size == self.flow.size):
            raise TelemetryError("trace columns differ in length")

    def __len__(self):
        return self.t.size

    def __getitem__(self, k):
        return TelemetrySample(float(self.t[k]), float(self.voltage[k]),
                               float(self.current[k]), float(self.flow[k]))

    @classmethod
    def from_samples(cls, samples, **kw):
        rows = np.array([[s.t, s.voltage, s.current, s.flow] for s in samples], dtype=float)
        rows = rows.reshape(-1, 4)
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], **kw)


def validate(trace: TelemetryTrace, lines=None):
    """Check sample invariants and time ordering; ``lines`` maps rows to file lines."""
    def where(k):
        return None if lines is None else lines[k]

    for k in range(len(trace)):
        vals = (trace.t[k], trace.voltage[k], trace.current[k], trace.flow[k])
        if not all(math.isfinite(v) for v in vals):
            raise TelemetryError(f"row {k}: non-finite value", where(k))
        if not trace.flow[k] > 0:
            raise TelemetryError(f"row {k}: flow must be positive", where(k))
        if not 0 < trace.voltage[k] < 5:
            raise TelemetryError(f"row {k}: voltage {trace.voltage[k]} outside (0, 5) V", where(k))
        if k and not trace.t[k] > trace.t[k - 1]:
            raise TelemetryError(f"row {k}: time {trace.t[k]:g} does not increase "
                                 f"(previous {trace.t[k - 1]:g})", where(k))
    check_gaps(trace)


def check_gaps(trace: TelemetryTrace, limit=None):
    """Reject spacings above ``limit`` (default 10x the median spacing)."""
    if len(trace) < 3:
        return
    dts = np.diff(trace.t)
    if limit is None:
        limit = MAX_GAP_FACTOR * float(np.median(dts))
    k = int(np.argmax(dts))
    if dts[k] > limit * (1 + 1e-9):
        raise TelemetryError(f"gap of {dts[k]:g} s after t = {trace.t[k]:g} s exceeds {limit:g} s")


def load_csv(path) -> TelemetryTrace:
    rows, lines = [], []
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if not header_seen:
                if tuple(fields) != HEADER:
                    raise TelemetryError(
                        f"header {line!r} does not match {','.join(HEADER)!r} "
                        "(check column units)", lineno)
                header_seen = True
                continue
            if len(fields) != 4:
                raise TelemetryError(f"expected 4 fields, got {len(fields)}", lineno)
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise TelemetryError(f"cannot parse {line!r} as numbers", lineno) from None
            lines.append(lineno)
    if not header_seen:
        raise TelemetryError("missing header line")
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    trace = TelemetryTrace(arr[:, 0], arr[:, 1], arr[:, 2], ml_per_min_to_l_per_s(arr[:, 3]),
                           source="file", meta={"path": str(path)})
    validate(trace, lines)
    return trace


def write_csv(trace: TelemetryTrace, path, comment=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            for c in str(comment).splitlines():
                fh.write(f"# {c}\n")
        fh.write(",".join(HEADER) + "\n")
        cols = (trace.t, trace.voltage, trace.current, trace.flow * 1000.0 * 60.0)
        for row in zip(*(c.tolist() for c in cols)):
            fh.write(",".join(map(repr, row)) + "\n")
    return Path(path)


def resample(trace: TelemetryTrace, dt: float) -> TelemetryTrace:
    """Put the trace on a uniform ``dt`` grid starting at its first sample.

    Voltage is interpolated linearly; current and flow are held zero-order.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    if len(trace) == 0:
        return TelemetryTrace([], [], [], [], dt_resampled=dt, source=trace.source, meta=dict(trace.meta))
    check_gaps(trace)
    t0, t1 = trace.t[0], trace.t[-1]
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    grid = t0 + dt * np.arange(n)
    if trace.t.size == n and np.allclose(trace.t, grid, rtol=0, atol=1e-9 * dt):
        grid = trace.t.copy()
    volt = np.interp(grid, trace.t, trace.voltage)
    idx = np.searchsorted(trace.t, grid + 1e-9 * dt, side="right") - 1
    return TelemetryTrace(grid, volt, trace.current[idx], trace.flow[idx], dt_resampled=dt,
                          source=trace.source, meta=dict(trace.meta))


def synthesize_trace(params: BatteryParams, k_mt: float, x0=(1 - 1e-6, 1 - 1e-6), dt=1.0,
                     t_end=86400.0, noise_w=0.0, seed=0, flow=FLOW_RATE, return_truth=False):
    """Open-circuit self-discharge telemetry with the linear crossover.

    ``k_mt`` is in L/s. Voltage noise is uniform on ``[-3 noise_w, 3 noise_w]``
    and drawn from a generator seeded with ``seed``. With
    ``return_truth=True`` the simulated trajectory is returned as well.
    """
    if noise_w < 0:
        raise InvalidParameterError("noise_w must be >= 0")
    m = assemble_matrices(params)
    traj = simulate(params, m, linear_crossover_callback(LinearCrossover(k_mt), params),
                    (0.0, flow), x0, dt, t_end)
    trace = trace_from_trajectory(traj, dt, noise_w, seed)
    trace.meta["k_mt"] = k_mt
    return (trace, traj) if return_truth else trace


def trace_from_trajectory(traj, dt, noise_w=0.0, seed=0) -> TelemetryTrace:
    """Telemetry as a sensor would record a simulated :class:`Trajectory`."""
    if noise_w < 0:
        raise InvalidParameterError("noise_w must be >= 0")
    volt = traj.voltage.copy()
    if noise_w > 0:
        rng = np.random.default_rng(seed)
        volt = volt + rng.uniform(-3.0 * noise_w, 3.0 * noise_w, size=volt.size)
    return TelemetryTrace(traj.t, volt, traj.current, traj.flow, dt_resampled=dt,
                          source="synthetic", meta={"noise_w": noise_w, "seed": seed})
