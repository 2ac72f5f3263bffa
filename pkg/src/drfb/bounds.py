"""Runtime numbers for the observer's stability analysis.

The Lyapunov argument bounds the estimation error in terms of a handful of
norms of the model, the gains and the basis. This module evaluates them:

    delta_bar = |P E| (2 (1 - rho) g_psi g_theta + eps_bar) + |Z| w_bar
    gamma     = rho g_E g_theta g_psi_tilde g_s_tilde        (need gamma^2 <= alpha beta)
    gamma1    = g_theta + 2 g_F g_psi_tilde w_bar / (sigma g_C)
    gamma2    = g_theta + 2 g_F g_psi / sigma
    r_x       = (sigma g_C gamma1^2 + 8 delta_bar) / (4 (1 - varrho) g_W)
    r_theta   = max(gamma2, gamma1 / 2 + sqrt(gamma1^2 / 4 + 2 delta_bar / (sigma g_C)))

All norms are spectral 2-norms and ``g_W`` is the smallest eigenvalue of ``W``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .basis import RbfBasis, evaluate, fit_theta, lipschitz_bound
from .battery import K_MT, BatteryParams, LinearCrossover, ModelMatrices, linear_crossover_flux
from .errors import InvalidParameterError
from .synthesis import GainSolution

NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class BoundAssumptions:
    gamma_theta: float
    w_bar: float = 1e-3
    eps_bar: float = 0.0
    gamma_s_tilde: float = 1.0
    rho: float = 0.5
    varrho: float = 0.5

    def __post_init__(self):
        for name in ("gamma_theta", "w_bar", "eps_bar", "gamma_s_tilde"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")
        for name in ("rho", "varrho"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class BasisBounds:
    """Sup-norm and Lipschitz constant of the regressor."""

    gamma_psi: float
    gamma_psi_tilde: float

    @classmethod
    def of(cls, basis: RbfBasis):
        # nonnegative weights summing to one: |Psi|_2 <= |Psi|_1 = 1
        return cls(gamma_psi=1.0, gamma_psi_tilde=lipschitz_bound(basis))


def default_assumptions(params: BatteryParams, basis: RbfBasis, k_mt=K_MT, n_samples=200,
                        **overrides) -> BoundAssumptions:
    """Bounds fitted to the linear crossover law over ``s`` in ``[0, 1]``.

    ``gamma_theta`` is twice the norm of the least-squares weights and
    ``eps_bar`` the largest residual of that fit.
    """
    s = np.linspace(0.0, 1.0, n_samples)
    q = linear_crossover_flux(LinearCrossover(k_mt), params, s)
    theta = fit_theta(basis, s, q)
    resid = np.abs(evaluate(basis, s) @ theta - q)
    values = dict(gamma_theta=2.0 * float(np.linalg.norm(theta)), eps_bar=float(resid.max()))
    values.update(overrides)
    return BoundAssumptions(**values)


def delta_bar(assume: BoundAssumptions, sol: GainSolution, m: ModelMatrices, bb: BasisBounds):
    pe = float(np.linalg.norm(sol.p_mat @ m.e))
    z = float(np.linalg.norm(sol.z_vec))
    return pe * (2.0 * (1.0 - assume.rho) * bb.gamma_psi * assume.gamma_theta + assume.eps_bar) \
        + z * assume.w_bar


def cross_term_gamma(assume: BoundAssumptions, m: ModelMatrices, bb: BasisBounds, alpha, beta):
    """Return ``(gamma, compatible)`` with ``compatible`` meaning ``gamma^2 <= alpha beta``."""
    gamma = assume.rho * float(np.linalg.norm(m.e)) * assume.gamma_theta \
        * bb.gamma_psi_tilde * assume.gamma_s_tilde
    return gamma, bool(gamma * gamma <= alpha * beta)


def uub_radii(assume: BoundAssumptions, sol: GainSolution, delta, sigma, bb: BasisBounds,
              gamma_c=1.0):
    """Ultimate-bound radii ``(r_x, r_theta, gamma1, gamma2)``.

    With ``sigma == 0`` the leakage-based terms are undefined and all four
    come back as ``None``.
    """
    if assume.varrho >= 1.0:
        raise InvalidParameterError("varrho = 1 leaves no decay margin for the state radius")
    gamma_w = float(np.linalg.eigvalsh(sol.w_mat)[0])
    if gamma_w <= 0:
        raise InvalidParameterError(f"W must be positive definite, smallest eigenvalue {gamma_w}")
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    if sigma == 0:
        return None, None, None, None
    gamma_f = abs(sol.f_scalar)
    g1 = assume.gamma_theta + 2.0 * gamma_f * bb.gamma_psi_tilde * assume.w_bar / (sigma * gamma_c)
    g2 = assume.gamma_theta + 2.0 * gamma_f * bb.gamma_psi / sigma
    r_x = (sigma * gamma_c * g1 * g1 + 8.0 * delta) / (4.0 * (1.0 - assume.varrho) * gamma_w)
    r_theta = max(g2, 0.5 * g1 + math.sqrt(0.25 * g1 * g1 + 2.0 * delta / (sigma * gamma_c)))
    return r_x, r_theta, g1, g2


@dataclass
class BoundReport:
    gamma_psi: float
    gamma_psi_tilde: float
    gamma_e: float
    gamma_c: float
    gamma_f: float
    gamma_w: float
    gamma: float
    delta_bar: float
    gamma1: float | None
    gamma2: float | None
    r_x_tilde: float | None
    r_theta_tilde: float | None
    alpha: float
    beta: float
    compatible: bool
    gamma_max: float          # largest gamma with gamma^2 <= alpha beta
    sigma: float

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if v is None:
                d[k] = NOT_APPLICABLE
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def report(assume: BoundAssumptions, sol: GainSolution, m: ModelMatrices, basis: RbfBasis,
           sigma, beta) -> BoundReport:
    bb = BasisBounds.of(basis)
    gamma_c = float(np.linalg.norm(m.c_row))
    delta = delta_bar(assume, sol, m, bb)
    gamma, ok = cross_term_gamma(assume, m, bb, sol.alpha, beta)
    r_x, r_theta, g1, g2 = uub_radii(assume, sol, delta, sigma, bb, gamma_c)
    return BoundReport(
        gamma_psi=bb.gamma_psi, gamma_psi_tilde=bb.gamma_psi_tilde,
        gamma_e=float(np.linalg.norm(m.e)), gamma_c=gamma_c, gamma_f=abs(sol.f_scalar),
        gamma_w=float(np.linalg.eigvalsh(sol.w_mat)[0]), gamma=gamma, delta_bar=delta,
        gamma1=g1, gamma2=g2, r_x_tilde=r_x, r_theta_tilde=r_theta,
        alpha=sol.alpha, beta=beta, compatible=ok, gamma_max=math.sqrt(sol.alpha * beta),
        sigma=sigma,
    )


def excitation_gram(basis: RbfBasis, s_hat, dt):
    """Eigenvalues (ascending) of the regressor Gram integral over an estimate history.

    A smallest eigenvalue near zero means some weight directions were never
    excited, so their estimates carry no information about the true flux.
    """
    psi = evaluate(basis, np.asarray(s_hat, dtype=float))
    return np.linalg.eigvalsh(dt * psi.T @ psi)
