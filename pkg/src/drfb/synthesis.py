"""Polytopic LMI-LME synthesis of the observer gain ``L`` and injection scalar ``F``.

Decision variables after eliminating the equality ``P E = C^T F``
(``C = [0, 1]`` forces ``p12 = -p11 E1 / E2`` and ``F = p12 E1 + p22 E2``)::

    x = [p11, p22, z1, z2, w1, w2, alpha_bar, gamma_z, gamma_f]

and the program is

    min  alpha_bar + kappa_z gamma_z + kappa_f gamma_f
    s.t. [-Ai'P - P Ai + C'Z' + Z C - beta I - W,  P; P, alpha_bar I] >= 0,  i = 1, 2
         [gamma_z I, Z; Z', gamma_z] >= 0,  [gamma_f, F; F, gamma_f] >= 0
         P >= 0,  W >= diag(omega_floor)
         [r P, (P Ai - Z C)'; P Ai - Z C, r P] >= 0,  i = 1, 2     (r = max_bandwidth)

The last pair confines the closed-loop spectrum of ``Ai - L C`` to the disk
of radius ``r``. Without it the infimum is approached only as ``F -> 0``,
where ``P`` turns singular and ``L = P^-1 Z`` blows up; the optimal value is
practically unchanged by the cap. ``max_bandwidth=None`` drops the pair.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .battery import FLOW_RATE, ModelMatrices
from .errors import InfeasibleError, InvalidParameterError, NumericalFailureError

VAR_NAMES = ("p11", "p22", "z1", "z2", "w1", "w2", "alpha_bar", "gamma_z", "gamma_f")
N_VARS = len(VAR_NAMES)


@dataclass(frozen=True)
class SynthesisConfig:
    q_min: float = 0.9 * FLOW_RATE
    q_max: float = 1.1 * FLOW_RATE
    beta: float = 1e-4
    kappa_z: float = 1.0
    kappa_f: float = 1e-5
    omega_floor: tuple = (1e-6, 1e-6)
    tol: float = 1e-8
    max_bandwidth: float | None = 1.0     # 1/s

    def __post_init__(self):
        if not 0 < self.q_min <= self.q_max:
            raise InvalidParameterError("need 0 < q_min <= q_max")
        if not self.beta > 0:
            raise InvalidParameterError("beta must be positive")
        if self.kappa_z < 0 or self.kappa_f < 0:
            raise InvalidParameterError("kappa weights must be nonnegative")
        if len(self.omega_floor) != 2 or min(self.omega_floor) <= 0:
            raise InvalidParameterError("omega_floor must hold two positive entries")
        if self.max_bandwidth is not None and not self.max_bandwidth > 0:
            raise InvalidParameterError("max_bandwidth must be positive or None")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class GainSolution:
    p_mat: np.ndarray
    z_vec: np.ndarray
    f_scalar: float
    w_mat: np.ndarray
    alpha_bar: float
    gamma_z: float
    gamma_f: float
    margins: list
    l_vec: np.ndarray = None
    objective: float = float("nan")
    beta: float = float("nan")

    def __post_init__(self):
        self.p_mat = np.asarray(self.p_mat, dtype=float)
        self.z_vec = np.asarray(self.z_vec, dtype=float)
        self.w_mat = np.asarray(self.w_mat, dtype=float)
        if self.l_vec is None:
            self.l_vec = np.linalg.solve(self.p_mat, self.z_vec)
        self.l_vec = np.asarray(self.l_vec, dtype=float)

    @property
    def alpha(self):
        return 1.0 / self.alpha_bar

    def lme_residual(self, m: ModelMatrices):
        return float(np.linalg.norm(self.p_mat @ m.e - m.c_row * self.f_scalar))

    def to_dict(self):
        return {
            "p": self.p_mat.tolist(),
            "z": self.z_vec.tolist(),
            "l": self.l_vec.tolist(),
            "f": self.f_scalar,
            "w": self.w_mat.tolist(),
            "alpha_bar": self.alpha_bar,
            "gamma_z": self.gamma_z,
            "gamma_f": self.gamma_f,
            "margins": list(self.margins),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(p_mat=d["p"], z_vec=d["z"], f_scalar=float(d["f"]), w_mat=d["w"],
                   alpha_bar=float(d["alpha_bar"]), gamma_z=float(d["gamma_z"]),
                   gamma_f=float(d["gamma_f"]), margins=list(d["margins"]), l_vec=d["l"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class SdpAssembly:
    """The SDP plus the data needed to map its variables back to gains."""

    problem: sdp.SdpProblem
    ratio_p12: float          # p12 = ratio_p12 * p11
    f_coeffs: tuple           # F = f_coeffs[0] * p11 + f_coeffs[1] * p22
    block_names: list = field(default_factory=list)


def eliminate_lme(e):
    """Coefficients of the analytic LME elimination for ``C = [0, 1]``.

    Returns ``(r, (f1, f2))`` with ``p12 = r p11`` and ``F = f1 p11 + f2 p22``.
    """
    e1, e2 = float(e[0]), float(e[1])
    if e2 == 0:
        raise InvalidParameterError("E2 = 0: the equality constraint cannot be eliminated")
    r = -e1 / e2
    return r, (r * e1, e2)


def _unpack(x, r, fc):
    p11, p22, z1, z2, w1, w2, ab, gz, gf = x
    p = np.array([[p11, r * p11], [r * p11, p22]])
    z = np.array([z1, z2])
    w = np.diag([w1, w2])
    f = fc[0] * p11 + fc[1] * p22
    return p, z, w, f, ab, gz, gf


def vertex_block(a, p, z, w_bar, alpha_bar, c_row):
    """Left-hand side of one vertex LMI for given variable values."""
    zc = np.outer(z, c_row)
    top = -a.T @ p - p @ a + zc.T + zc - w_bar
    return np.block([[top, p], [p, alpha_bar * np.eye(2)]])


def disk_block(a, p, z, radius, c_row):
    """Spectrum of ``a - L C`` (with ``Z = P L``) inside ``|lambda| < radius``."""
    g = p @ a - np.outer(z, c_row)
    return np.block([[radius * p, g.T], [g, radius * p]])


def _blocks_at(x, cfg, m, r, fc, with_const):
    """All LMI blocks at ``x``; ``with_const=False`` drops the constant terms."""
    p, z, w, f, ab, gz, gf = _unpack(x, r, fc)
    beta = cfg.beta if with_const else 0.0
    omega = np.diag(cfg.omega_floor) if with_const else np.zeros((2, 2))
    out = []
    for q in (cfg.q_min, cfg.q_max):
        out.append(vertex_block(m.a_of_q(q), p, z, beta * np.eye(2) + w, ab, m.c_row))
    zb = np.zeros((3, 3))
    zb[:2, :2] = gz * np.eye(2)
    zb[:2, 2] = zb[2, :2] = z
    zb[2, 2] = gz
    out.append(zb)
    out.append(np.array([[gf, f], [f, gf]]))
    out.append(p)
    out.append(w - omega)
    if cfg.max_bandwidth is not None:
        for q in (cfg.q_min, cfg.q_max):
            out.append(disk_block(m.a_of_q(q), p, z, cfg.max_bandwidth, m.c_row))
    return out


BLOCK_NAMES = ["vertex_qmin", "vertex_qmax", "norm_z", "norm_f", "p_pos", "w_floor",
               "disk_qmin", "disk_qmax"]


def assemble(cfg: SynthesisConfig, m: ModelMatrices) -> SdpAssembly:
    r, fc = eliminate_lme(m.e)
    zero = np.zeros(N_VARS)
    consts = _blocks_at(zero, cfg, m, r, fc, with_const=True)
    coeffs = [[] for _ in consts]
    for k in range(N_VARS):
        unit = np.zeros(N_VARS)
        unit[k] = 1.0
        for i, mat in enumerate(_blocks_at(unit, cfg, m, r, fc, with_const=False)):
            coeffs[i].append(mat)
    blocks = [sdp.AffineBlock(c0, np.array(ck), name)
              for c0, ck, name in zip(consts, coeffs, BLOCK_NAMES)]
    objective = np.zeros(N_VARS)
    objective[6:] = [1.0, cfg.kappa_z, cfg.kappa_f]
    return SdpAssembly(sdp.SdpProblem(N_VARS, objective, blocks), r, fc, list(BLOCK_NAMES))


def synthesize(cfg: SynthesisConfig, m: ModelMatrices, max_iter=200) -> GainSolution:
    """Solve the polytopic program and return certified gains.

    Raises
    ------
    InfeasibleError
        Phase 1 found no strictly feasible point; carries the suggested
        beta back-off schedule.
    NumericalFailureError
        The barrier iterations stalled.
    """
    asm = assemble(cfg, m)
    sol = sdp.solve(asm.problem, tol=cfg.tol, max_iter=max_iter)
    if sol.status == "infeasible":
        raise InfeasibleError(
            f"no strictly feasible gains for beta = {cfg.beta:g} "
            f"(worst block eigenvalue {min(sol.block_min_eigs):.3g}); "
            f"try beta = {cfg.beta / 10:g}, {cfg.beta / 100:g}, {cfg.beta / 1000:g}",
            residual=min(sol.block_min_eigs),
            suggested_betas=[cfg.beta / 10 ** k for k in (1, 2, 3)])
    if sol.status != "optimal":
        raise NumericalFailureError(
            f"barrier method stalled after {sol.iterations} iterations "
            f"(worst block eigenvalue {min(sol.block_min_eigs):.3g})")
    p, z, w, f, ab, gz, gf = _unpack(sol.x, asm.ratio_p12, asm.f_coeffs)
    return GainSolution(p_mat=p, z_vec=z, f_scalar=float(f), w_mat=w, alpha_bar=float(ab),
                        gamma_z=float(gz), gamma_f=float(gf), margins=sol.block_min_eigs,
                        objective=sol.objective_value, beta=cfg.beta)


def synthesize_with_backoff(cfg: SynthesisConfig, m: ModelMatrices, retries=3):
    """Retry :func:`synthesize` with ``beta / 10`` up to ``retries`` times."""
    err = None
    for k in range(retries + 1):
        trial = cfg.replace(beta=cfg.beta / 10 ** k)
        try:
            return synthesize(trial, m)
        except InfeasibleError as exc:
            err = exc
    raise err


def solution_blocks(sol: GainSolution, cfg: SynthesisConfig, m: ModelMatrices):
    """Re-assemble every constraint block at a returned solution."""
    w_bar = cfg.beta * np.eye(2) + sol.w_mat
    out = [vertex_block(m.a_of_q(q), sol.p_mat, sol.z_vec, w_bar, sol.alpha_bar, m.c_row)
           for q in (cfg.q_min, cfg.q_max)]
    z = sol.z_vec
    out.append(np.array([[sol.gamma_z, 0, z[0]], [0, sol.gamma_z, z[1]], [z[0], z[1], sol.gamma_z]]))
    out.append(np.array([[sol.gamma_f, sol.f_scalar], [sol.f_scalar, sol.gamma_f]]))
    out.append(sol.p_mat)
    out.append(sol.w_mat - np.diag(cfg.omega_floor))
    if cfg.max_bandwidth is not None:
        for q in (cfg.q_min, cfg.q_max):
            out.append(disk_block(m.a_of_q(q), sol.p_mat, sol.z_vec, cfg.max_bandwidth, m.c_row))
    return out


@dataclass
class CertificateReport:
    flows: np.ndarray
    margins: np.ndarray            # min eigenvalue of the vertex-form block at each flow
    riccati_margins: np.ndarray    # same with the sqrt(alpha) P / identity form
    min_margin: float
    min_vertex_margin: float
    lme_residual: float
    sign_consistent: bool

    @property
    def certified(self):
        return self.min_margin >= -1e-9 and self.lme_residual <= 1e-10


def certify(sol: GainSolution, cfg: SynthesisConfig, m: ModelMatrices, grid_n=101) -> CertificateReport:
    """Re-check the Lyapunov LMI at ``grid_n`` flows spanning ``[q_min, q_max]``.

    Both the program's vertex form (``P`` off-diagonal, ``alpha_bar I``
    corner) and the congruent ``sqrt(alpha) P`` / ``I`` form are evaluated;
    they share inertia, so their signs must agree.
    """
    flows = np.linspace(cfg.q_min, cfg.q_max, grid_n)
    w_bar = cfg.beta * np.eye(2) + sol.w_mat
    sqa = math.sqrt(sol.alpha)
    margins, riccati = [], []
    for q in flows:
        a = m.a_of_q(q)
        margins.append(sdp.min_eig(vertex_block(a, sol.p_mat, sol.z_vec, w_bar, sol.alpha_bar, m.c_row)))
        zc = np.outer(sol.z_vec, m.c_row)
        top = -a.T @ sol.p_mat - sol.p_mat @ a + zc.T + zc - w_bar
        riccati.append(sdp.min_eig(np.block([[top, sqa * sol.p_mat], [sqa * sol.p_mat, np.eye(2)]])))
    margins = np.array(margins)
    riccati = np.array(riccati)
    consistent = bool(np.all((margins >= 0) == (riccati >= 0)))
    return CertificateReport(flows=flows, margins=margins, riccati_margins=riccati,
                             min_margin=float(margins.min()),
                             min_vertex_margin=float(min(margins[0], margins[-1])),
                             lme_residual=sol.lme_residual(m), sign_consistent=consistent)
