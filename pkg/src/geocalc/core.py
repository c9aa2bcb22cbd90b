"""Core contracts: points, discrete paths, and deformation-energy models.

A deformation energy is a smooth two-point function ``w(x, y)`` on an open
subset of R^d that behaves like a squared geodesic distance for nearby
points: ``w(x, x) = 0``, both gradients vanish on the diagonal, and half
the second derivative in the second slot defines a Riemannian metric,
``g_x = 1/2 * hess22(x, x)``.  Everything downstream (path energies,
two-point solves, parallel transport) consumes concrete models only
through the :class:`EnergyModel` interface defined here.

Derivative layout used throughout the package:

* ``grad1`` / ``grad2``: gradient of ``w`` in the first / second argument,
* ``hess11``: Jacobian of ``grad1`` with respect to the first argument,
* ``hess12``: Jacobian of ``grad1`` with respect to the second argument,
* ``hess21``: Jacobian of ``grad2`` with respect to the first argument,
* ``hess22``: Jacobian of ``grad2`` with respect to the second argument,

so ``hess21 == hess12.T`` whenever ``w`` is twice continuously
differentiable.  Matrix residuals are measured in the max-abs-entry norm,
vector residuals in the Euclidean norm.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "EvaluationError",
    "InvariantViolation",
    "SolverError",
    "as_point",
    "DiscretePath",
    "as_path",
    "EnergyModel",
    "FdScheme",
    "fd_derivatives",
    "fd_gradient",
    "fd_jacobian",
    "metric_from_energy",
    "ConsistencyReport",
    "check_consistency",
]


class DomainError(ValueError):
    """Input lies outside the admissible domain of a model or operator."""


class EvaluationError(RuntimeError):
    """A model produced non-finite or otherwise unusable values."""


class InvariantViolation(RuntimeError):
    """A model broke one of its contractual guarantees (e.g. ``w < 0``)."""


class SolverError(RuntimeError):
    """A nonlinear solve failed; ``residual`` holds the last residual norm."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def as_point(x) -> np.ndarray:
    """Coerce to a finite 1-d float vector (a chart point or displacement)."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1 or p.size < 1:
        raise DomainError(f"point must be a 1-d vector, got shape {np.shape(x)}")
    if not np.all(np.isfinite(p)):
        raise DomainError("point has non-finite entries")
    return p.copy()


@dataclass(frozen=True)
class DiscretePath:
    """An ordered tuple of K+1 points of common dimension d.

    ``points`` is a read-only array of shape (K+1, d); index k gives the
    k-th point.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 1:
            raise DomainError(
                f"path must have shape (K+1, d) with K >= 1, got {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise DomainError("path has non-finite entries")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def step_count(self) -> int:
        return self.points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, k) -> np.ndarray:
        return self.points[k]


def as_path(path) -> DiscretePath:
    if isinstance(path, DiscretePath):
        return path
    return DiscretePath(np.asarray(path, dtype=float))


class EnergyModel(ABC):
    """Two-point deformation energy with gradient and Hessian access.

    Contract: ``w(x, x) == 0`` and ``w >= 0`` on the admissible domain;
    models must reject inadmissible input with :class:`DomainError` rather
    than return NaN.  ``symmetric`` declares ``w(x, y) == w(y, x)``.
    Instances are immutable after construction and safe to evaluate
    concurrently.
    """

    symmetric: bool = False
    derivatives_analytic: bool = True

    @abstractmethod
    def w(self, x: np.ndarray, y: np.ndarray) -> float: ...

    @abstractmethod
    def grad1(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad2(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess11(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess12(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess21(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hess22(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    def grads(self, x, y):
        """Both gradients at once; override when they share intermediates."""
        return self.grad1(x, y), self.grad2(x, y)

    def hess_blocks(self, x, y):
        """All four Hessian blocks at once; override to share work."""
        return (
            self.hess11(x, y),
            self.hess12(x, y),
            self.hess21(x, y),
            self.hess22(x, y),
        )

    def metric(self, x) -> np.ndarray:
        """Induced metric g_x; overridden by models with a closed form."""
        return metric_from_energy(self, x)


@dataclass(frozen=True)
class FdScheme:
    """Central finite-difference scheme of order 2 with step ``step``."""

    step: float = 1e-5
    order: int = 2

    def __post_init__(self):
        if not (1e-8 <= self.step <= 1e-2):
            raise DomainError(f"fd step must lie in [1e-8, 1e-2], got {self.step}")
        if self.order != 2:
            raise DomainError("only order-2 central differences are supported")


def fd_gradient(func, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of one vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (func(x + e) - func(x - e)) / (2.0 * step)
    return g


def fd_jacobian(func, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Jacobian; column j differentiates along x_j."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append(
            (np.asarray(func(x + e), dtype=float) - np.asarray(func(x - e), dtype=float))
            / (2.0 * step)
        )
    return np.stack(cols, axis=1)


class _FiniteDifferenceModel(EnergyModel):
    """Full derivative access for a model that only implements ``w``."""

    derivatives_analytic = False

    def __init__(self, base, scheme: FdScheme):
        self._base = base
        self._h = scheme.step
        self.symmetric = bool(getattr(base, "symmetric", False))

    def w(self, x, y):
        return float(self._base.w(x, y))

    def grad1(self, x, y):
        return fd_gradient(lambda p: self._base.w(p, y), x, self._h)

    def grad2(self, x, y):
        return fd_gradient(lambda p: self._base.w(x, p), y, self._h)

    def _hess_same(self, x, y, first: bool):
        h = self._h
        d = np.asarray(x if first else y).size
        out = np.empty((d, d))
        for i in range(d):
            for j in range(i + 1):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h
                ej[j] = h

                def _w(p):
                    return self._base.w(p, y) if first else self._base.w(x, p)

                base = np.asarray(x if first else y, dtype=float)
                val = (
                    _w(base + ei + ej)
                    - _w(base + ei - ej)
                    - _w(base - ei + ej)
                    + _w(base - ei - ej)
                ) / (4.0 * h * h)
                out[i, j] = val
                out[j, i] = val
        return out

    def hess11(self, x, y):
        return self._hess_same(x, y, first=True)

    def hess22(self, x, y):
        return self._hess_same(x, y, first=False)

    def hess12(self, x, y):
        h = self._h
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = x.size
        out = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h
                ej[j] = h
                out[i, j] = (
                    self._base.w(x + ei, y + ej)
                    - self._base.w(x + ei, y - ej)
                    - self._base.w(x - ei, y + ej)
                    + self._base.w(x - ei, y - ej)
                ) / (4.0 * h * h)
        return out

    def hess21(self, x, y):
        # same stencil with the roles of the slots swapped
        return self.hess12(x, y).T

    def hess_blocks(self, x, y):
        # the two mixed blocks share one stencil
        h12 = self.hess12(x, y)
        return self.hess11(x, y), h12, h12.T, self.hess22(x, y)


def fd_derivatives(model, scheme: FdScheme | None = None) -> EnergyModel:
    """Wrap a w-only model into a full :class:`EnergyModel` via central FD.

    ``model`` needs a ``w(x, y)`` method; domain errors raised by it
    propagate unchanged.
    """
    return _FiniteDifferenceModel(model, scheme or FdScheme())


def _require_finite_matrix(m: np.ndarray, label: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        bad = np.argwhere(~np.isfinite(m))[0]
        raise EvaluationError(
            f"{label} has a non-finite entry at index {tuple(int(b) for b in bad)}"
        )
    return m


def metric_from_energy(model: EnergyModel, x) -> np.ndarray:
    """Metric g_x = 1/2 hess22(x, x), symmetrized as (M + M^T)/2."""
    x = as_point(x)
    h22 = _require_finite_matrix(model.hess22(x, x), "hess22")
    return (h22 + h22.T) / 4.0


@dataclass(frozen=True)
class ConsistencyReport:
    """Residual magnitudes of the diagonal identities a model must satisfy."""

    tol: float
    residuals: dict

    @property
    def passed(self) -> dict:
        return {name: r <= self.tol for name, r in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def failed(self):
        return [name for name, good in self.passed.items() if not good]


def check_consistency(model: EnergyModel, x, tol: float) -> ConsistencyReport:
    """Verify the squared-distance identities of ``model`` on the diagonal.

    Checks w(x,x) = 0, vanishing diagonal gradients, hess22 = 2 g_x, and
    the sign relations hess11 = hess22 = -hess12 = -hess21 at (x, x).
    """
    x = as_point(x)
    w0 = float(model.w(x, x))
    g1, g2 = model.grads(x, x)
    h11, h12, h21, h22 = model.hess_blocks(x, x)
    two_g = 2.0 * np.asarray(model.metric(x), dtype=float)

    for label, val in (("grad1", g1), ("grad2", g2)):
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"{label} is non-finite at the diagonal")
    for label, val in (("hess11", h11), ("hess12", h12), ("hess21", h21), ("hess22", h22)):
        _require_finite_matrix(val, label)

    def _maxabs(m):
        return float(np.max(np.abs(m)))

    residuals = {
        "w_diagonal": abs(w0),
        "grad1_diagonal": float(np.linalg.norm(g1)),
        "grad2_diagonal": float(np.linalg.norm(g2)),
        "hess22_vs_metric": _maxabs(np.asarray(h22) - two_g),
        "hess11_vs_hess22": _maxabs(np.asarray(h11) - np.asarray(h22)),
        "hess12_vs_hess22": _maxabs(np.asarray(h12) + np.asarray(h22)),
        "hess21_vs_hess22": _maxabs(np.asarray(h21) + np.asarray(h22)),
    }
    return ConsistencyReport(tol=float(tol), residuals=residuals)
