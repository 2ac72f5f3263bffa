"""Normalized Gaussian radial basis for the crossover-flux approximation.

``q_x(s) ~= Psi(s) @ theta`` where ``Psi`` is a softmax of Gaussians, so the
activations are nonnegative and sum to one at every ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import DimensionError, InvalidParameterError

CONVENTIONS = ("sigma2", "denominator")


@dataclass(frozen=True)
class RbfBasis:
    """Centres, variance and width convention of the basis.

    With ``convention="sigma2"`` the kernel is ``exp(-(s-c)^2 / (2 variance))``;
    ``"denominator"`` uses ``exp(-(s-c)^2 / variance)``.
    """

    centers: np.ndarray
    variance: float
    convention: str = "sigma2"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        if c.ndim != 1 or c.size < 1:
            raise InvalidParameterError("centers must be a non-empty vector")
        if np.any(np.diff(c) <= 0):
            raise InvalidParameterError("centers must be strictly increasing")
        if not self.variance > 0:
            raise InvalidParameterError("variance must be positive")
        if self.convention not in CONVENTIONS:
            raise InvalidParameterError(f"convention must be one of {CONVENTIONS}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def m(self):
        return self.centers.size

    @property
    def width(self):
        """Denominator of the Gaussian exponent."""
        return 2.0 * self.variance if self.convention == "sigma2" else self.variance

    def logits(self, s):
        d = np.asarray(s, dtype=float)[..., None] - self.centers
        return -(d * d) / self.width


def uniform_basis(m=7, lo=0.05, hi=0.95, variance=0.0081, convention="sigma2") -> RbfBasis:
    if m < 2:
        raise InvalidParameterError("uniform_basis needs m >= 2")
    if not lo < hi:
        raise InvalidParameterError("need lo < hi")
    return RbfBasis(np.linspace(lo, hi, m), variance, convention)


def evaluate(b: RbfBasis, s):
    """Activations ``Psi(s)``; shape ``(m,)`` for scalar ``s``, ``(..., m)`` otherwise."""
    return softmax(b.logits(s), axis=-1)


def derivative(b: RbfBasis, s):
    """``dPsi/ds`` computed in closed form."""
    psi = evaluate(b, s)
    dz = -2.0 * (np.asarray(s, dtype=float)[..., None] - b.centers) / b.width
    return psi * (dz - np.sum(psi * dz, axis=-1, keepdims=True))


def grid_lipschitz(deriv, lo=-0.2, hi=1.2, step=1e-4):
    """Upper bound on ``sup ||f'(s)||`` over ``[lo, hi]`` from grid samples.

    ``deriv`` maps a 1-d array of points to derivatives (shape ``(n,)`` or
    ``(n, m)``). Between grid points the norm can exceed the sampled maximum
    by at most ``step/2 * sup ||f''||``; the curvature is estimated from
    differences of the sampled derivatives and doubled for safety.
    """
    n = int(np.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, n)
    h = grid[1] - grid[0]
    d = np.asarray(deriv(grid), dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    norms = np.linalg.norm(d, axis=1)
    curvature = np.max(np.linalg.norm(np.diff(d, axis=0), axis=1)) / h
    return float(norms.max() + h * curvature)


def lipschitz_bound(b: RbfBasis, lo=-0.2, hi=1.2, step=1e-4):
    """Certified Lipschitz constant of ``Psi`` (zero for a single function)."""
    if b.m == 1:
        return 0.0
    return grid_lipschitz(lambda s: derivative(b, s), lo, hi, step)


def flux(b: RbfBasis, theta, s):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (b.m,):
        raise DimensionError(f"theta has shape {theta.shape}, basis has m = {b.m}")
    return evaluate(b, s) @ theta


def fit_theta(b: RbfBasis, s_samples, q_samples):
    """Least-squares weights reproducing samples ``q(s)``."""
    design = evaluate(b, np.asarray(s_samples, dtype=float))
    theta, *_ = np.linalg.lstsq(design, np.asarray(q_samples, dtype=float), rcond=None)
    return theta
