"""Discrete path energies and the geodesic boundary-value solver.

A discrete K-path (x_0, ..., x_K) carries the energy K * sum_k w(x_{k-1}, x_k)
and the length sum_k sqrt(w(x_{k-1}, x_k)).  A discrete geodesic is a
minimizer of the energy with fixed endpoints; its stationarity system

    grad2(x_{k-1}, x_k) + grad1(x_k, x_{k+1}) = 0,    k = 1..K-1,

is solved by Newton iteration.  The Jacobian is block tridiagonal with
blocks A_kk = hess22(x_{k-1}, x_k) + hess11(x_k, x_{k+1}),
A_k,k-1 = hess21(x_{k-1}, x_k), A_k,k+1 = hess12(x_k, x_{k+1}); the linear
solves use block Thomas elimination with dense d x d pivots.

Two constrained variants exist: a level-set constraint d(x) = 0 holding
interior points on an embedded hypersurface (one Lagrange multiplier per
point), and a linear gauge constraint removing exact null directions of
translation-invariant energies (used by the rod models).
"""

from __future__ import annotations

import io
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import (
    DiscretePath,
    DomainError,
    InvariantViolation,
    SolverError,
    as_path,
    as_point,
    fd_jacobian,
)

__all__ = [
    "SolverConfig",
    "GeodesicResult",
    "ConstraintModel",
    "LinearGauge",
    "discrete_energy",
    "discrete_length",
    "el_residual",
    "solve_geodesic",
    "solve_geodesic_constrained",
    "project_onto_level_set",
    "write_result_csv",
]

_ARMIJO_C = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    """Newton settings: residual sup-norm tolerance, iteration cap, damping."""

    newton_tol: float = 1e-10
    max_iter: int = 50
    damping: str = "none"  # "none" | "armijo"
    init: str = "linear"  # "linear" | "provided"

    def __post_init__(self):
        if self.newton_tol <= 0:
            raise DomainError("newton_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.damping not in ("none", "armijo"):
            raise DomainError(f"unknown damping mode {self.damping!r}")
        if self.init not in ("linear", "provided"):
            raise DomainError(f"unknown init mode {self.init!r}")


class ConstraintModel(ABC):
    """Level-set description of a hypersurface M = {d = 0}.

    ``d`` should be (close to) a signed distance near the zero set, so that
    ``grad_d`` has norm about 1 there.
    """

    fd_step: float = 1e-6

    @abstractmethod
    def d(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def grad_d(self, x: np.ndarray) -> np.ndarray: ...

    def hess_d(self, x: np.ndarray) -> np.ndarray:
        j = fd_jacobian(self.grad_d, np.asarray(x, dtype=float), self.fd_step)
        return (j + j.T) / 2.0


@dataclass(frozen=True)
class LinearGauge:
    """Per-interior-point linear constraints G x_k = targets[k-1].

    ``matrix`` has shape (c, d); ``targets`` has shape (K-1, c).  Used to pin
    energy-neutral directions (e.g. node-average position of a rod).
    """

    matrix: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True)
class GeodesicResult:
    """Solved (or last-iterate) discrete path plus solver diagnostics."""

    path: DiscretePath
    energy: float
    length: float
    residual: float
    iterations: int
    converged: bool
    multipliers: np.ndarray | None = None


def discrete_energy(path, model) -> float:
    """Discrete path energy K * sum_k w(x_{k-1}, x_k)."""
    path = as_path(path)
    total = 0.0
    for k in range(1, len(path)):
        try:
            total += float(model.w(path[k - 1], path[k]))
        except DomainError as err:
            raise DomainError(f"segment {k}: {err}") from err
    return path.step_count * total


def discrete_length(path, model) -> float:
    """Discrete path length sum_k sqrt(w(x_{k-1}, x_k))."""
    path = as_path(path)
    total = 0.0
    for k in range(1, len(path)):
        try:
            wk = float(model.w(path[k - 1], path[k]))
        except DomainError as err:
            raise DomainError(f"segment {k}: {err}") from err
        if wk < -1e-12:
            raise InvariantViolation(f"w < 0 on segment {k}: {wk}")
        total += float(np.sqrt(max(wk, 0.0)))
    return total


def el_residual(path, model) -> np.ndarray:
    """Stationarity residuals grad2(x_{k-1},x_k) + grad1(x_k,x_{k+1}).

    Returns an array of shape (K-1, d); its sup-norm vanishes exactly on
    interior-stationary paths with fixed endpoints.
    """
    path = as_path(path)
    if path.step_count < 2:
        raise DomainError("residual needs K >= 2")
    out = np.empty((path.step_count - 1, path.dim))
    for k in range(1, path.step_count):
        out[k - 1] = np.asarray(model.grad2(path[k - 1], path[k])) + np.asarray(
            model.grad1(path[k], path[k + 1])
        )
    return out


def _sup(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def _block_thomas(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a block tridiagonal system by forward elimination.

    ``lower[i]`` couples row i to block i-1 (ignored for i = 0), ``upper[i]``
    couples row i to block i+1 (ignored for the last row).
    """
    n = len(diag)
    b = rhs[0].shape[0]
    cprime = [None] * n
    dprime = [None] * n
    try:
        cprime[0] = np.linalg.solve(diag[0], upper[0]) if n > 1 else None
        dprime[0] = np.linalg.solve(diag[0], rhs[0])
        for i in range(1, n):
            m = diag[i] - lower[i] @ cprime[i - 1]
            if i < n - 1:
                cprime[i] = np.linalg.solve(m, upper[i])
            dprime[i] = np.linalg.solve(m, rhs[i] - lower[i] @ dprime[i - 1])
    except np.linalg.LinAlgError as err:
        raise SolverError(f"singular block pivot in tridiagonal solve: {err}") from err
    sol = np.empty((n, b))
    sol[n - 1] = dprime[n - 1]
    for i in range(n - 2, -1, -1):
        sol[i] = dprime[i] - cprime[i] @ sol[i + 1]
    return sol


def _segment_blocks(model, pts):
    """Hessian blocks (h11, h12, h21, h22) of every consecutive segment."""
    return [model.hess_blocks(pts[j - 1], pts[j]) for j in range(1, len(pts))]


def _interior_residual(model, pts) -> np.ndarray:
    K = len(pts) - 1
    out = np.empty((K - 1, pts.shape[1]))
    for k in range(1, K):
        g2 = np.asarray(model.grad2(pts[k - 1], pts[k]))
        g1 = np.asarray(model.grad1(pts[k], pts[k + 1]))
        out[k - 1] = g2 + g1
    return out


def _linear_init(xa, xb, K):
    return np.linspace(0.0, 1.0, K + 1)[:, None] * (xb - xa)[None, :] + xa[None, :]


def _result(model, pts, residual, iterations, converged, multipliers=None):
    path = DiscretePath(pts)
    return GeodesicResult(
        path=path,
        energy=discrete_energy(path, model),
        length=discrete_length(path, model),
        residual=residual,
        iterations=iterations,
        converged=converged,
        multipliers=multipliers,
    )


def solve_geodesic(
    x_a,
    x_b,
    K: int,
    model,
    cfg: SolverConfig | None = None,
    *,
    init_path=None,
    gauge: LinearGauge | None = None,
) -> GeodesicResult:
    """Solve the discrete geodesic boundary-value problem.

    Endpoints are fixed; the K-1 interior points are found by Newton
    iteration on the stationarity system with block Thomas linear solves.
    Non-convergence is reported through ``converged=False`` on the result,
    which then carries the last iterate.
    """
    cfg = cfg or SolverConfig()
    xa = as_point(x_a)
    xb = as_point(x_b)
    if xa.size != xb.size:
        raise DomainError("endpoint dimensions differ")
    if K < 1:
        raise DomainError("K must be at least 1")

    if init_path is not None:
        pts = np.array(as_path(init_path).points)
        if pts.shape != (K + 1, xa.size):
            raise DomainError("init path has wrong shape")
        pts[0], pts[K] = xa, xb
    else:
        pts = _linear_init(xa, xb, K)

    if K == 1:
        return _result(model, pts, 0.0, 0, True)

    d = xa.size
    if gauge is not None:
        g_mat = np.asarray(gauge.matrix, dtype=float)
        g_tg = np.asarray(gauge.targets, dtype=float)
        c = g_mat.shape[0]
        if g_tg.shape != (K - 1, c):
            raise DomainError("gauge targets must have shape (K-1, c)")
        mu = np.zeros((K - 1, c))

    def residual_rows():
        r = _interior_residual(model, pts)
        if gauge is None:
            return r
        stat = r - mu @ g_mat
        cons = pts[1:K] @ g_mat.T - g_tg
        return np.hstack([stat, cons])

    res_rows = residual_rows()
    res = _sup(res_rows)
    iterations = 0
    converged = res <= cfg.newton_tol

    while not converged and iterations < cfg.max_iter:
        seg = _segment_blocks(model, pts)
        diag, lower, upper = [], [], []
        for k in range(1, K):
            a_kk = np.asarray(seg[k - 1][3]) + np.asarray(seg[k][0])
            a_lo = np.asarray(seg[k - 1][2])
            a_up = np.asarray(seg[k][1])
            if gauge is not None:
                z = np.zeros((d, c))
                a_kk = np.block([[a_kk, -g_mat.T], [g_mat, np.zeros((c, c))]])
                a_lo = np.block([[a_lo, z], [z.T, np.zeros((c, c))]])
                a_up = np.block([[a_up, z], [z.T, np.zeros((c, c))]])
            diag.append(a_kk)
            lower.append(a_lo)
            upper.append(a_up)
        delta = _block_thomas(lower, diag, upper, res_rows)

        step = 1.0
        if cfg.damping == "armijo":
            phi0 = 0.5 * float(np.sum(res_rows**2))
            while step > 1e-12:
                trial = np.array(pts)
                trial[1:K] -= step * delta[:, :d]
                if gauge is not None:
                    trial_mu = mu - step * delta[:, d:]
                try:
                    r_trial = _interior_residual(model, trial)
                    if gauge is not None:
                        r_trial = np.hstack(
                            [r_trial - trial_mu @ g_mat, trial[1:K] @ g_mat.T - g_tg]
                        )
                    phi = 0.5 * float(np.sum(r_trial**2))
                except DomainError:
                    phi = np.inf
                if phi <= (1.0 - 2.0 * _ARMIJO_C * step) * phi0:
                    break
                step *= 0.5

        pts[1:K] -= step * delta[:, :d]
        if gauge is not None:
            mu -= step * delta[:, d:]
        iterations += 1
        res_rows = residual_rows()
        res = _sup(res_rows)
        converged = res <= cfg.newton_tol

    return _result(model, pts, res, iterations, converged)


def project_onto_level_set(
    x, constraint: ConstraintModel, tol: float = 1e-12, max_iter: int = 50
) -> np.ndarray:
    """Newton projection of a point onto {d = 0} along grad_d."""
    p = as_point(x)
    for _ in range(max_iter):
        val = float(constraint.d(p))
        if abs(val) <= tol:
            return p
        g = np.asarray(constraint.grad_d(p), dtype=float)
        p = p - val * g / float(g @ g)
    raise SolverError(
        f"level-set projection did not reach |d| <= {tol}", residual=abs(val)
    )


def solve_geodesic_constrained(
    x_a,
    x_b,
    K: int,
    model,
    constraint: ConstraintModel,
    cfg: SolverConfig | None = None,
    *,
    init_path=None,
) -> GeodesicResult:
    """Discrete geodesic between points of the hypersurface {d = 0}.

    The KKT system couples the stationarity residual, one multiplier per
    interior point, and the constraint values; it is solved by Newton with
    block Thomas elimination on (d+1)-blocks.  Endpoints must satisfy
    |d| <= 1e-10.
    """
    cfg = cfg or SolverConfig()
    xa = as_point(x_a)
    xb = as_point(x_b)
    if xa.size != xb.size:
        raise DomainError("endpoint dimensions differ")
    if K < 1:
        raise DomainError("K must be at least 1")
    for label, p in (("x_a", xa), ("x_b", xb)):
        if abs(float(constraint.d(p))) > 1e-10:
            raise DomainError(f"endpoint {label} is off the level set: d = {constraint.d(p)}")

    if init_path is not None:
        pts = np.array(as_path(init_path).points)
        if pts.shape != (K + 1, xa.size):
            raise DomainError("init path has wrong shape")
        pts[0], pts[K] = xa, xb
    else:
        pts = _linear_init(xa, xb, K)
        for k in range(1, K):
            pts[k] = project_onto_level_set(pts[k], constraint)

    if K == 1:
        return _result(model, pts, 0.0, 0, True, multipliers=np.zeros(0))

    d = xa.size
    lam = np.zeros(K - 1)

    def residual_rows():
        rows = np.empty((K - 1, d + 1))
        for k in range(1, K):
            g2 = np.asarray(model.grad2(pts[k - 1], pts[k]))
            g1 = np.asarray(model.grad1(pts[k], pts[k + 1]))
            gd = np.asarray(constraint.grad_d(pts[k]))
            rows[k - 1, :d] = g2 + g1 - lam[k - 1] * gd
            rows[k - 1, d] = float(constraint.d(pts[k]))
        return rows

    res_rows = residual_rows()
    res = _sup(res_rows)
    iterations = 0
    converged = res <= cfg.newton_tol

    while not converged and iterations < cfg.max_iter:
        seg = _segment_blocks(model, pts)
        diag, lower, upper = [], [], []
        z = np.zeros((d, 1))
        for k in range(1, K):
            gd = np.asarray(constraint.grad_d(pts[k])).reshape(d, 1)
            hd = np.asarray(constraint.hess_d(pts[k]))
            a_kk = (
                np.asarray(seg[k - 1][3])
                + np.asarray(seg[k][0])
                - lam[k - 1] * hd
            )
            diag.append(np.block([[a_kk, -gd], [gd.T, np.zeros((1, 1))]]))
            lower.append(
                np.block([[np.asarray(seg[k - 1][2]), z], [z.T, np.zeros((1, 1))]])
            )
            upper.append(np.block([[np.asarray(seg[k][1]), z], [z.T, np.zeros((1, 1))]]))
        delta = _block_thomas(lower, diag, upper, res_rows)

        step = 1.0
        if cfg.damping == "armijo":
            phi0 = 0.5 * float(np.sum(res_rows**2))
            while step > 1e-12:
                trial = np.array(pts)
                trial[1:K] -= step * delta[:, :d]
                trial_lam = lam - step * delta[:, d]
                saved = pts.copy(), lam.copy()
                pts[1:K], lam[:] = trial[1:K], trial_lam
                try:
                    phi = 0.5 * float(np.sum(residual_rows() ** 2))
                except DomainError:
                    phi = np.inf
                pts[1:K], lam[:] = saved[0][1:K], saved[1]
                if phi <= (1.0 - 2.0 * _ARMIJO_C * step) * phi0:
                    break
                step *= 0.5

        pts[1:K] -= step * delta[:, :d]
        lam -= step * delta[:, d]
        iterations += 1
        res_rows = residual_rows()
        res = _sup(res_rows)
        converged = res <= cfg.newton_tol

    return _result(model, pts, res, iterations, converged, multipliers=lam.copy())


def write_result_csv(result: GeodesicResult, target) -> None:
    """Write the solved path as CSV rows ``k, x_0, ..., x_{d-1}``."""
    path = result.path
    header = "k," + ",".join(f"x_{i}" for i in range(path.dim))
    lines = [header]
    for k in range(len(path)):
        lines.append(str(k) + "," + ",".join(repr(float(v)) for v in path[k]))
    text = "\n".join(lines) + "\n"
    if isinstance(target, io.TextIOBase):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
