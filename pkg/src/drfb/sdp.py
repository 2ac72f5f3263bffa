"""Small dense semidefinite programs solved by a log-det barrier method.

Problems have the form::

    minimize    c @ x
    subject to  F_i(x) = F_i0 + sum_k x_k F_ik  >= 0   (PSD, every block i)

Blocks are at most a few rows; everything is dense. The solver runs a
phase-1 problem for a strictly feasible start, then follows the central path
with ``t <- 10 t`` and damped Newton centering.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

logger = logging.getLogger(__name__)

MU = 10.0
MAX_VARS = 64
MAX_BLOCK = 8


def min_eig(a, tol=1e-12, max_sweeps=100):
    """Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is below ``tol`` (and
    below ``1e-14 * ||a||_F``, which keeps tiny-scaled matrices accurate).
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("min_eig needs a square matrix")
    scale = np.linalg.norm(a)
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(scale, 1.0)):
        raise DimensionError("min_eig needs a symmetric matrix")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    stop = min(tol, 1e-14 * scale) if scale > 0 else 0.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= stop:
            break
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-300 * abs(diff):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
                rotated = True
        if not rotated:
            break
    return float(np.min(np.diag(a)))


@dataclass
class AffineBlock:
    """``F(x) = const + sum_k x_k coeffs[k]`` with symmetric pieces."""

    const: np.ndarray
    coeffs: np.ndarray            # shape (n_vars, s, s)
    name: str = ""

    def __post_init__(self):
        self.const = np.atleast_2d(np.asarray(self.const, dtype=float))
        s = self.const.shape[0]
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1, s, s)
        if self.const.shape != (s, s) or s < 1:
            raise DimensionError("block constant must be square")
        for mat in (self.const, *self.coeffs):
            if not np.array_equal(mat, mat.T):
                raise DimensionError(f"block {self.name!r} has a non-symmetric matrix")

    @property
    def size(self):
        return self.const.shape[0]

    def __call__(self, x):
        return self.const + np.tensordot(np.asarray(x, dtype=float), self.coeffs, axes=1)


@dataclass
class SdpProblem:
    n_vars: int
    objective: np.ndarray
    blocks: list
    var_bounds: tuple | None = None      # (lo, hi) arrays, +-inf allowed

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.n_vars,):
            raise DimensionError("objective length differs from n_vars")
        if self.n_vars > MAX_VARS:
            raise DimensionError(f"at most {MAX_VARS} variables supported")
        for blk in self.blocks:
            if blk.coeffs.shape[0] != self.n_vars:
                raise DimensionError(f"block {blk.name!r} has wrong number of coefficients")
            if blk.size > MAX_BLOCK:
                raise DimensionError(f"block {blk.name!r} larger than {MAX_BLOCK}x{MAX_BLOCK}")

    def all_blocks(self):
        """Blocks including 1x1 blocks generated from the box bounds."""
        out = list(self.blocks)
        if self.var_bounds is not None:
            lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), (self.n_vars,))
                      for v in self.var_bounds)
            for k in range(self.n_vars):
                e = np.zeros((self.n_vars, 1, 1))
                if np.isfinite(lo[k]):
                    e[k] = 1.0
                    out.append(AffineBlock([[-lo[k]]], e.copy(), f"lo[{k}]"))
                if np.isfinite(hi[k]):
                    e[k] = -1.0
                    out.append(AffineBlock([[hi[k]]], e.copy(), f"hi[{k}]"))
        return out


@dataclass
class SdpSolution:
    x: np.ndarray
    objective_value: float
    block_min_eigs: list
    iterations: int
    status: str                      # "optimal" | "infeasible" | "stalled"
    history: list = field(default_factory=list)   # objective after each outer step


@dataclass
class Phase1Result:
    x: np.ndarray
    s: float
    feasible: bool
    iterations: int


class _Barrier:
    """Value, gradient and Hessian of ``-sum log det F_i(x)``."""

    def __init__(self, blocks):
        self.blocks = blocks

    def factor(self, x):
        chols = []
        for blk in self.blocks:
            try:
                chols.append(np.linalg.cholesky(blk(x)))
            except np.linalg.LinAlgError:
                return None
        return chols

    def value(self, chols):
        return -sum(2.0 * np.sum(np.log(np.diag(L))) for L in chols)

    def derivatives(self, chols):
        n = self.blocks[0].coeffs.shape[0]
        g = np.zeros(n)
        h = np.zeros((n, n))
        for blk, L in zip(self.blocks, chols):
            # G_k = L^-1 F_k L^-T
            tmp = np.linalg.solve(L, blk.coeffs)                       # (n, s, s)
            gk = np.linalg.solve(L, np.swapaxes(tmp, 1, 2))            # symmetric
            g -= np.trace(gk, axis1=1, axis2=2)
            flat = gk.reshape(n, -1)
            h += flat @ flat.T
        return g, h


def _newton_direction(g, h):
    d = np.sqrt(np.abs(np.diag(h)))
    d[d == 0] = 1.0
    hs = h / np.outer(d, d)
    gs = g / d
    hs[np.diag_indices_from(hs)] += 1e-13
    try:
        L = np.linalg.cholesky(hs)
        step = -np.linalg.solve(L.T, np.linalg.solve(L, gs))
    except np.linalg.LinAlgError:
        step = -np.linalg.lstsq(hs, gs, rcond=1e-14)[0]
    return step / d


def _center(barrier, c, t, x, max_newton=100, eps=1e-12):
    """Damped Newton minimisation of ``t c.x + barrier(x)`` from strictly feasible ``x``."""
    chols = barrier.factor(x)
    f = t * (c @ x) + barrier.value(chols)
    for it in range(max_newton):
        g, h = barrier.derivatives(chols)
        g = g + t * c
        dx = _newton_direction(g, h)
        dec2 = -(g @ dx)
        if dec2 / 2.0 <= eps:
            return x, it, True
        step = 1.0
        while True:
            xn = x + step * dx
            cn = barrier.factor(xn)
            if cn is not None:
                fn = t * (c @ xn) + barrier.value(cn)
                if fn <= f - 0.25 * step * dec2:
                    break
            step *= 0.5
            if step < 1e-14:
                return x, it, False
        x, chols, f = xn, cn, fn
    return x, max_newton, False


def _initial_t(barrier, c, x, theta):
    chols = barrier.factor(x)
    g, h = barrier.derivatives(chols)
    hinv_c = _newton_direction(-c, h)       # = H^-1 c
    hinv_g = _newton_direction(-g, h)
    denom = c @ hinv_c
    t = -(c @ hinv_g) / denom if denom > 0 else 1.0
    # at the analytic centre g = 0 and the fit carries no information
    if not np.isfinite(t) or t <= 0:
        t = 1.0
    return max(t, 1e-12)


def _path_follow(blocks, c, x, tol, max_iter, history=None):
    barrier = _Barrier(blocks)
    theta = sum(b.size for b in blocks)
    t = _initial_t(barrier, c, x, theta)
    iters = 0
    while True:
        x, _, ok = _center(barrier, c, t, x)
        iters += 1
        if history is not None:
            history.append(float(c @ x))
        if theta / t <= tol:
            return x, iters, True
        if iters >= max_iter:
            return x, iters, False
        t *= MU


def phase1(p: SdpProblem, tol=1e-9, max_iter=200, radius=1e6, x0=None) -> Phase1Result:
    """Minimise ``s`` subject to ``F_i(x) + s I >= 0``.

    ``s`` is floored at -1 and ``x`` is boxed to ``|x_k| <= radius`` so the
    auxiliary problem is bounded; the problem is strictly feasible iff the
    optimum is negative.
    """
    blocks = p.all_blocks()
    n = p.n_vars
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    aux = []
    for blk in blocks:
        eye = np.eye(blk.size)[None]
        aux.append(AffineBlock(blk.const, np.concatenate([blk.coeffs, eye]), blk.name))
    e_s = np.zeros((n + 1, 1, 1))
    e_s[n] = 1.0
    aux.append(AffineBlock([[1.0]], e_s, "s>=-1"))
    for k in range(n):
        e = np.zeros((n + 1, 1, 1))
        e[k] = 1.0
        aux.append(AffineBlock([[radius]], e.copy(), f"x{k}>=-R"))
        aux.append(AffineBlock([[radius]], -e, f"x{k}<=R"))
    worst = min(min_eig_fast(blk(x)) for blk in blocks) if blocks else 1.0
    s0 = max(-worst, -0.5) + 1.0
    z = np.append(x, s0)
    c = np.zeros(n + 1)
    c[n] = 1.0
    z, iters, done = _path_follow(aux, c, z, tol, max_iter)
    s = float(z[n])
    return Phase1Result(x=z[:n], s=s, feasible=s < -tol, iterations=iters)


def min_eig_fast(a):
    return float(np.linalg.eigvalsh(a)[0])


def solve(p: SdpProblem, tol=1e-8, max_iter=200, debug_csv=None) -> SdpSolution:
    """Barrier interior-point solve of ``p``.

    ``debug_csv`` (a path) dumps the objective after every outer iteration.
    """
    blocks = p.all_blocks()
    ph1 = phase1(p, max_iter=max_iter)
    if not ph1.feasible:
        eigs = [min_eig(b(ph1.x)) for b in blocks]
        logger.info("phase 1 failed: s* = %.3g", ph1.s)
        return SdpSolution(ph1.x, float(p.objective @ ph1.x), eigs, ph1.iterations, "infeasible")
    history = []
    x, iters, done = _path_follow(blocks, p.objective, ph1.x, tol, max_iter, history)
    eigs = [min_eig(b(x)) for b in blocks]
    status = "optimal" if done and min(eigs) >= -tol else "stalled"
    if debug_csv is not None:
        with open(debug_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer_iteration", "objective"])
            w.writerows(enumerate(history, 1))
    return SdpSolution(x, float(p.objective @ x), eigs, ph1.iterations + iters, status, history)
