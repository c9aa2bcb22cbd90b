"""Closed planar rods and their dissipation energies.

A rod is a closed curve sampled at N nodes on the uniform periodic
parameter grid s_i = i/N.  Derivatives along the curve use periodic
central differences (first order: stencil over 2/N, second order: the
standard three-point stencil), integrals the equal-weight trapezoid rule.

Two energies are provided for a pair of rods (x, y), both weighted by a
thickness delta:

* simplified: tangential stretching plus linearized bending,

      int  delta/2 (1 - |y_s|^2/|x_s|^2)^2 |x_s|
         + delta^3 |y_ss - x_ss|^2 |x_s|  ds,

  with analytic first derivatives and finite-difference Hessians;
* full: the same tangential density (1 - A)^2 / 2 together with the
  squared curvature difference delta^3 (kappa[y] - kappa[x])^2 |x_s|,
  with all derivatives by finite differences.

Curvature follows kappa = (x_s/|x_s|)_s . (D90 x_s) / |x_s|^2 with D90 the
counterclockwise quarter turn, so a counterclockwise unit circle has
kappa = +1.

Both energies are invariant under translating either rod on its own, so
interior-point Hessians of path solves have a two-dimensional null space
per point; ``rod_gauge`` builds the mean-position gauge constraint that
removes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, EnergyModel, FdScheme, as_point, fd_derivatives
from .geodesic import LinearGauge

__all__ = [
    "RodCurve",
    "circle_rod",
    "random_smooth_rod",
    "rod_curvature",
    "SimplifiedRodEnergy",
    "rod_energy",
    "rod_gauge",
    "load_rod_csv",
    "save_rod_csv",
]

_MIN_LENGTH = 1e-12


def _as_nodes(obj) -> np.ndarray:
    nodes = np.asarray(obj, dtype=float)
    if nodes.ndim == 1:
        if nodes.size % 2:
            raise DomainError("flattened rod coordinates must have even length")
        nodes = nodes.reshape(-1, 2)
    if nodes.ndim != 2 or nodes.shape[1] != 2:
        raise DomainError(f"rod nodes must have shape (N, 2), got {nodes.shape}")
    if nodes.shape[0] < 8:
        raise DomainError("a rod needs at least 8 nodes")
    if not np.all(np.isfinite(nodes)):
        raise DomainError("rod nodes have non-finite entries")
    return nodes


@dataclass(frozen=True)
class RodCurve:
    """Closed curve given by N >= 8 nodes on the uniform periodic grid."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = _as_nodes(self.nodes).copy()
        seg = np.linalg.norm(np.roll(nodes, -1, axis=0) - nodes, axis=1)
        if np.any(seg <= _MIN_LENGTH):
            raise DomainError("degenerate segment: consecutive nodes coincide")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def coord(self) -> np.ndarray:
        """Flattened 2N coordinate vector (x_0, y_0, x_1, y_1, ...)."""
        return self.nodes.reshape(-1).copy()

    @classmethod
    def from_coord(cls, vec) -> "RodCurve":
        return cls(np.asarray(vec, dtype=float).reshape(-1, 2))


def circle_rod(n_nodes: int, radius: float = 1.0, center=(0.0, 0.0)) -> RodCurve:
    """Counterclockwise circle sampled at n_nodes."""
    s = np.linspace(0.0, 2.0 * np.pi, n_nodes, endpoint=False)
    nodes = np.stack([radius * np.cos(s), radius * np.sin(s)], axis=1)
    return RodCurve(nodes + np.asarray(center, dtype=float))


def random_smooth_rod(
    n_nodes: int, rng: np.random.Generator, base_radius: float = 1.0, modes: int = 4, amplitude: float = 0.05
) -> RodCurve:
    """Circle perturbed by a few random low-frequency Fourier modes."""
    s = np.linspace(0.0, 2.0 * np.pi, n_nodes, endpoint=False)
    radius = np.full(n_nodes, base_radius)
    for m in range(1, modes + 1):
        radius += (
            amplitude / m**2 * (rng.normal() * np.cos(m * s) + rng.normal() * np.sin(m * s))
        )
    nodes = np.stack([radius * np.cos(s), radius * np.sin(s)], axis=1)
    return RodCurve(nodes)


def _d1(arr: np.ndarray) -> np.ndarray:
    n = arr.shape[0]
    out = np.empty_like(arr)
    np.subtract(arr[2:], arr[:-2], out=out[1:-1])
    out[0] = arr[1] - arr[-1]
    out[-1] = arr[0] - arr[-2]
    out *= n / 2.0
    return out


def _d2(arr: np.ndarray) -> np.ndarray:
    n = arr.shape[0]
    out = np.empty_like(arr)
    np.subtract(arr[2:] + arr[:-2], 2.0 * arr[1:-1], out=out[1:-1])
    out[0] = arr[1] - 2.0 * arr[0] + arr[-1]
    out[-1] = arr[0] - 2.0 * arr[-1] + arr[-2]
    out *= float(n) ** 2
    return out


def _rot90(arr: np.ndarray) -> np.ndarray:
    out = np.empty_like(arr)
    out[:, 0] = -arr[:, 1]
    out[:, 1] = arr[:, 0]
    return out


def _speeds(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = _d1(nodes)
    ell = np.sqrt(np.einsum("ij,ij->i", t, t))
    if np.any(ell <= _MIN_LENGTH):
        raise DomainError("degenerate segment: vanishing parametric speed")
    return t, ell


def _curvature_from_speeds(t: np.ndarray, ell: np.ndarray) -> np.ndarray:
    unit = t / ell[:, None]
    normal = _rot90(t) / ell[:, None]
    return np.einsum("ij,ij->i", _d1(unit), normal) / ell


def rod_curvature(curve: RodCurve) -> np.ndarray:
    """Discrete signed curvature at every node (ccw circle: +1/radius)."""
    if not isinstance(curve, RodCurve):
        curve = RodCurve(_as_nodes(curve))
    return _curvature_from_speeds(*_speeds(curve.nodes))


class SimplifiedRodEnergy(EnergyModel):
    """Tangential stretching plus linearized bending, analytic gradients.

    Hessians are central differences of the gradients with step
    ``fd_step``; the induced metric has a closed form and is used by the
    consistency checks.
    """

    symmetric = False
    derivatives_analytic = False

    def __init__(self, n_nodes: int, delta: float = 0.1, fd_step: float = 1e-5):
        if n_nodes < 8:
            raise DomainError("a rod needs at least 8 nodes")
        if delta <= 0:
            raise DomainError("thickness delta must be positive")
        self.n_nodes = int(n_nodes)
        self.delta = float(delta)
        self.dim = 2 * self.n_nodes
        self._h = float(FdScheme(step=fd_step).step)

    def _nodes(self, vec) -> np.ndarray:
        nodes = _as_nodes(np.asarray(vec, dtype=float))
        if nodes.shape[0] != self.n_nodes:
            raise DomainError(
                f"expected {self.n_nodes} nodes, got {nodes.shape[0]}"
            )
        return nodes

    def _fields(self, x, y):
        nx = self._nodes(x)
        ny = self._nodes(y)
        t, ell = _speeds(nx)
        ty, _ = _speeds(ny)
        ratio = np.einsum("ij,ij->i", ty, ty) / ell**2
        dc = _d2(ny) - _d2(nx)
        return nx, ny, t, ell, ty, ratio, dc

    def w(self, x, y):
        _, _, _, ell, _, ratio, dc = self._fields(x, y)
        h = 1.0 / self.n_nodes
        d = self.delta
        tangential = 0.5 * d * np.sum((1.0 - ratio) ** 2 * ell)
        bending = d**3 * np.sum(np.einsum("ij,ij->i", dc, dc) * ell)
        return float(h * (tangential + bending))

    def grads(self, x, y):
        _, _, t, ell, ty, ratio, dc = self._fields(x, y)
        h = 1.0 / self.n_nodes
        d = self.delta
        dc_sq = np.einsum("ij,ij->i", dc, dc)

        # first-slot gradient through t = D1 x and c = D2 x
        p = (
            h
            * (0.5 * d * (1.0 - ratio) ** 2 + 2.0 * d * (1.0 - ratio) * ratio + d**3 * dc_sq)
        )[:, None] * (t / ell[:, None])
        q = -2.0 * h * d**3 * ell[:, None] * dc
        g1 = (-_d1(p) + _d2(q)).reshape(-1)

        # second-slot gradient through ty = D1 y and cy = D2 y
        a = (-2.0 * h * d * (1.0 - ratio) / ell)[:, None] * ty
        b = 2.0 * h * d**3 * ell[:, None] * dc
        g2 = (-_d1(a) + _d2(b)).reshape(-1)
        return g1, g2

    def grad1(self, x, y):
        return self.grads(x, y)[0]

    def grad2(self, x, y):
        return self.grads(x, y)[1]

    def _sweep(self, x, y, first: bool):
        """Richardson-extrapolated FD Jacobians of both gradients w.r.t.
        one slot (the second-difference stencils amplify truncation error,
        so plain central differences would not reach the consistency
        tolerances)."""
        h = self._h
        base = np.asarray(x if first else y, dtype=float)
        d = base.size
        j1 = np.empty((d, d))
        j2 = np.empty((d, d))

        def at(offset):
            p = base + offset
            return self.grads(p, y) if first else self.grads(x, p)

        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            g1p, g2p = at(h * e)
            g1m, g2m = at(-h * e)
            g1p2, g2p2 = at(0.5 * h * e)
            g1m2, g2m2 = at(-0.5 * h * e)
            j1[:, j] = (4.0 * (g1p2 - g1m2) / h - (g1p - g1m) / (2.0 * h)) / 3.0
            j2[:, j] = (4.0 * (g2p2 - g2m2) / h - (g2p - g2m) / (2.0 * h)) / 3.0
        return j1, j2

    def hess_blocks(self, x, y):
        h11, h21 = self._sweep(x, y, first=True)
        h12, h22 = self._sweep(x, y, first=False)
        return h11, h12, h21, h22

    def hess11(self, x, y):
        return self._sweep(x, y, first=True)[0]

    def hess21(self, x, y):
        return self._sweep(x, y, first=True)[1]

    def hess12(self, x, y):
        return self._sweep(x, y, first=False)[0]

    def hess22(self, x, y):
        return self._sweep(x, y, first=False)[1]

    def metric(self, x):
        """Closed-form metric: 2 delta |v_s . tangent|^2 / |x_s| plus
        delta^3 |v_ss|^2 |x_s|, assembled as a dense matrix."""
        nx = self._nodes(x)
        t, ell = _speeds(nx)
        unit = t / ell[:, None]
        n = self.n_nodes
        h = 1.0 / n
        d1 = np.zeros((n, n))
        d2 = np.zeros((n, n))
        idx = np.arange(n)
        d1[idx, (idx + 1) % n] = n / 2.0
        d1[idx, (idx - 1) % n] = -n / 2.0
        d2[idx, idx] = -2.0 * n**2
        d2[idx, (idx + 1) % n] = float(n) ** 2
        d2[idx, (idx - 1) % n] = float(n) ** 2
        d1f = np.kron(d1, np.eye(2))
        d2f = np.kron(d2, np.eye(2))
        b_blocks = [np.outer(unit[i], unit[i]) / ell[i] for i in range(n)]
        l_blocks = [ell[i] * np.eye(2) for i in range(n)]
        b_mat = _block_diag(b_blocks)
        l_mat = _block_diag(l_blocks)
        return (
            2.0 * self.delta * h * d1f.T @ b_mat @ d1f
            + self.delta**3 * h * d2f.T @ l_mat @ d2f
        )


def _block_diag(blocks):
    n = len(blocks)
    size = blocks[0].shape[0]
    out = np.zeros((n * size, n * size))
    for i, b in enumerate(blocks):
        out[i * size : (i + 1) * size, i * size : (i + 1) * size] = b
    return out


class _FullRodDensity:
    """Energy-only full rod model: exact tangential density plus squared
    curvature difference; derivatives are added by finite differences."""

    symmetric = False

    def __init__(self, n_nodes: int, delta: float):
        self.n_nodes = int(n_nodes)
        self.delta = float(delta)

    def _nodes(self, vec):
        nodes = _as_nodes(np.asarray(vec, dtype=float))
        if nodes.shape[0] != self.n_nodes:
            raise DomainError(f"expected {self.n_nodes} nodes, got {nodes.shape[0]}")
        return nodes

    def w(self, x, y):
        nx = self._nodes(x)
        ny = self._nodes(y)
        t, ell = _speeds(nx)
        ty, elly = _speeds(ny)
        ratio = np.einsum("ij,ij->i", ty, ty) / ell**2
        kx = _curvature_from_speeds(t, ell)
        ky = _curvature_from_speeds(ty, elly)
        h = 1.0 / self.n_nodes
        d = self.delta
        tangential = d * np.sum(0.5 * (1.0 - ratio) ** 2 * ell)
        bending = d**3 * np.sum((ky - kx) ** 2 * ell)
        return float(h * (tangential + bending))


def rod_energy(kind: str, n_nodes: int, delta: float = 0.1, fd_step: float = 1e-5) -> EnergyModel:
    """Build a rod energy model; ``kind`` is 'simplified' or 'full'."""
    if kind == "simplified":
        return SimplifiedRodEnergy(n_nodes, delta, fd_step)
    if kind == "full":
        model = fd_derivatives(_FullRodDensity(n_nodes, delta), FdScheme(step=fd_step))
        model.n_nodes = int(n_nodes)
        model.delta = float(delta)
        model.dim = 2 * int(n_nodes)
        return model
    raise DomainError(f"unknown rod energy kind {kind!r}")


def rod_gauge(x_a, x_b, K: int) -> LinearGauge:
    """Mean-position gauge: pins node averages of the interior rods to the
    linear interpolation of the endpoint averages."""
    xa = as_point(x_a)
    xb = as_point(x_b)
    if xa.size != xb.size or xa.size % 2:
        raise DomainError("rod coordinates must be flattened (N, 2) arrays")
    n = xa.size // 2
    g = np.kron(np.ones((1, n)) / n, np.eye(2))
    mean_a = g @ xa
    mean_b = g @ xb
    ts = np.linspace(0.0, 1.0, K + 1)[1:K]
    targets = np.outer(1.0 - ts, mean_a) + np.outer(ts, mean_b)
    return LinearGauge(matrix=g, targets=targets)


def save_rod_csv(curve: RodCurve, path) -> None:
    """One row per node, columns x, y."""
    lines = ["x,y"] + [f"{repr(float(p[0]))},{repr(float(p[1]))}" for p in curve.nodes]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_rod_csv(path) -> RodCurve:
    """Read a rod; a leading non-numeric row is treated as a header."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append([float(parts[0]), float(parts[1])])
            except ValueError:
                if rows:
                    raise DomainError(f"malformed rod row: {line!r}") from None
                continue  # header
    if not rows:
        raise DomainError("rod file contains no nodes")
    return RodCurve(np.asarray(rows))
