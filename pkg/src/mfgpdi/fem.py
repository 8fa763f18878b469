"""P1 finite elements on a 1D interval.

Homogeneous Dirichlet conditions are imposed by elimination: every assembled
operator and load vector lives on the interior nodes ``1..N-1``.  Element
integrals use the 2-point Gauss rule unless stated otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import SingularMatrix

GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)
PIVOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Mesh1D:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a mesh needs at least 2 elements")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, a: float, b: float, n: int):
        return cls(np.linspace(a, b, n + 1))

    @property
    def n_elements(self):
        return self.nodes.size - 1

    @property
    def n_interior(self):
        return self.nodes.size - 2

    @property
    def h(self):
        return np.diff(self.nodes)

    @property
    def hmax(self):
        return float(np.max(self.h))

    @property
    def domain(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def same_as(self, other):
        return self is other or (
            self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)
        )

    def quadrature(self, points=GAUSS2):
        """Physical points and weights per element, both of shape ``(N, q)``."""
        points = np.asarray(points, dtype=float)
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        half = 0.5 * self.h
        xq = mid[:, None] + half[:, None] * points[None, :]
        return xq, half

    def gauss(self):
        xq, half = self.quadrature(GAUSS2)
        return xq, np.repeat(half[:, None], 2, axis=1)

    def locate(self, x):
        """Element index containing each ``x`` (right-continuous at nodes)."""
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)


@dataclass(eq=False)
class FeFunction:
    """Nodal values of a continuous piecewise-linear function on ``mesh``."""

    mesh: Mesh1D
    values: np.ndarray
    bc: str = "dirichlet0"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.mesh.nodes.shape:
            raise ValueError(
                f"expected {self.mesh.nodes.size} nodal values, got {self.values.shape}"
            )
        if self.bc not in ("dirichlet0", "free"):
            raise ValueError(f"unknown boundary tag {self.bc!r}")
        if self.bc == "dirichlet0" and (self.values[0] != 0.0 or self.values[-1] != 0.0):
            raise ValueError("dirichlet0 function must vanish at both end nodes")

    @classmethod
    def from_interior(cls, mesh, interior, **kwargs):
        values = np.zeros(mesh.nodes.size)
        values[1:-1] = interior
        return cls(mesh, values, **kwargs)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.nodes.size))

    @property
    def interior(self):
        return self.values[1:-1]

    @property
    def slopes(self):
        return np.diff(self.values) / self.mesh.h

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.mesh.nodes, self.values)

    def grad(self, x):
        return self.slopes[self.mesh.locate(x)]

    def at_points(self, points=GAUSS2):
        """Values at reference points of every element, shape ``(N, q)``."""
        points = np.asarray(points, dtype=float)
        left = self.values[:-1, None]
        right = self.values[1:, None]
        return 0.5 * (1.0 - points) * left + 0.5 * (1.0 + points) * right

    def _combine(self, other, op):
        if not self.mesh.same_as(other.mesh):
            raise ValueError("functions live on different meshes")
        bc = "dirichlet0" if self.bc == other.bc == "dirichlet0" else "free"
        return FeFunction(self.mesh, op(self.values, other.values), bc=bc)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return FeFunction(self.mesh, float(scalar) * self.values, bc=self.bc)

    __rmul__ = __mul__

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "value"])
            for x, v in zip(self.mesh.nodes, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, bc="free"):
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(Mesh1D(data[:, 0]), data[:, 1], bc=bc)


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Tridiagonal matrix over interior nodes: ``lower[i] = A[i+1, i]``,
    ``upper[i] = A[i, i+1]``."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.diag.size
        if self.lower.size != n - 1 or self.upper.size != n - 1:
            raise ValueError("inconsistent tridiagonal band sizes")

    @property
    def n(self):
        return self.diag.size

    def __add__(self, other):
        return Tridiagonal(self.lower + other.lower, self.diag + other.diag, self.upper + other.upper)

    def __mul__(self, scalar):
        return Tridiagonal(scalar * self.lower, scalar * self.diag, scalar * self.upper)

    __rmul__ = __mul__

    @property
    def T(self):
        return Tridiagonal(self.upper.copy(), self.diag.copy(), self.lower.copy())

    def matvec(self, v):
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    __matmul__ = matvec

    def toarray(self):
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


SparseOperator = Tridiagonal


def _assemble(local):
    """Scatter element matrices ``local[e, i, j]`` and drop boundary rows/cols."""
    n = local.shape[0]
    diag = np.zeros(n + 1)
    diag[:-1] += local[:, 0, 0]
    diag[1:] += local[:, 1, 1]
    upper = local[:, 0, 1]
    lower = local[:, 1, 0]
    return Tridiagonal(lower[1:-1].copy(), diag[1:-1].copy(), upper[1:-1].copy())


def element_values(mesh, g):
    """Values of ``g`` at the element Gauss points; ``g`` may be callable or an array."""
    xq, _ = mesh.gauss()
    if isinstance(g, FeFunction):
        return g.at_points()
    if callable(g):
        return np.broadcast_to(np.asarray(g(xq), dtype=float), xq.shape)
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return np.full(xq.shape, float(g))
    if g.shape == (mesh.n_elements,):
        return np.repeat(g[:, None], 2, axis=1)
    if g.shape != xq.shape:
        raise ValueError(f"coefficient array has shape {g.shape}, expected {xq.shape}")
    return g


_PHI = np.stack([0.5 * (1.0 - GAUSS2), 0.5 * (1.0 + GAUSS2)])  # _PHI[i, q]


def assemble_diffusion(mesh, nu):
    """Stiffness matrix of ``(u, v) -> int nu u' v'``; ``nu`` scalar or per element."""
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (mesh.n_elements,))
    if np.any(nu <= 0):
        raise ValueError("diffusion coefficient must be positive")
    k = nu / mesh.h
    local = np.empty((mesh.n_elements, 2, 2))
    local[:, 0, 0] = k
    local[:, 1, 1] = k
    local[:, 0, 1] = -k
    local[:, 1, 0] = -k
    return _assemble(local)


def assemble_mass(mesh):
    h = mesh.h
    local = np.empty((mesh.n_elements, 2, 2))
    local[:, 0, 0] = local[:, 1, 1] = h / 3.0
    local[:, 0, 1] = local[:, 1, 0] = h / 6.0
    return _assemble(local)


def assemble_advection(mesh, drift):
    """Matrix of ``(m, phi) -> int m drift phi'``; row index is the test function."""
    bq = element_values(mesh, drift)
    _, wq = mesh.gauss()
    dphi = np.array([-1.0, 1.0])[None, :] / mesh.h[:, None]  # dphi[e, i]
    # local[e, i, j] = sum_q w b psi_j psi_i'
    wb = wq * bq
    integral = wb @ _PHI.T  # [e, j] = sum_q w b phi_j
    local = dphi[:, :, None] * integral[:, None, :]
    return _assemble(local)


def assemble_transport(mesh, drift):
    """Matrix of ``(w, v) -> int drift w' v``; the transpose of the advection form."""
    bq = element_values(mesh, drift)
    _, wq = mesh.gauss()
    dphi = np.array([-1.0, 1.0])[None, :] / mesh.h[:, None]
    integral = (wq * bq) @ _PHI.T  # [e, i] = sum_q w b phi_i
    local = integral[:, :, None] * dphi[:, None, :]
    return _assemble(local)


def load_vector(mesh, g):
    """Interior entries of ``int g psi_i``."""
    gq = element_values(mesh, g)
    _, wq = mesh.gauss()
    local = (wq * gq) @ _PHI.T  # [e, i]
    full = np.zeros(mesh.nodes.size)
    full[:-1] += local[:, 0]
    full[1:] += local[:, 1]
    return full[1:-1]


def interpolate(mesh, f: Callable, bc="dirichlet0"):
    values = np.asarray(f(mesh.nodes), dtype=float).copy()
    if bc == "dirichlet0":
        scale = max(1.0, float(np.max(np.abs(values))))
        if abs(values[0]) > 1e-10 * scale or abs(values[-1]) > 1e-10 * scale:
            raise ValueError("function does not vanish on the boundary")
        values[0] = values[-1] = 0.0
    return FeFunction(mesh, values, bc=bc)


def l2_norm(u: FeFunction):
    a = u.values[:-1]
    b = u.values[1:]
    return float(np.sqrt(np.sum(u.mesh.h * (a * a + a * b + b * b) / 3.0)))


def h1_seminorm(u: FeFunction):
    return float(np.sqrt(np.sum(np.diff(u.values) ** 2 / u.mesh.h)))


def h1_norm(u: FeFunction):
    return float(np.hypot(l2_norm(u), h1_seminorm(u)))


_GAUSS5 = np.polynomial.legendre.leggauss(5)


def l2_error(u: FeFunction, exact: Callable):
    """``||u - exact||_{L2}`` by 5-point Gauss quadrature per element."""
    pts, wts = _GAUSS5
    xq, half = u.mesh.quadrature(pts)
    diff = u.at_points(pts) - exact(xq)
    return float(np.sqrt(np.sum(half[:, None] * wts[None, :] * diff ** 2)))


def h1_seminorm_error(u: FeFunction, exact_derivative: Callable):
    pts, wts = _GAUSS5
    xq, half = u.mesh.quadrature(pts)
    diff = u.slopes[:, None] - exact_derivative(xq)
    return float(np.sqrt(np.sum(half[:, None] * wts[None, :] * diff ** 2)))


def h1_error(u, exact, exact_derivative):
    return float(np.hypot(l2_error(u, exact), h1_seminorm_error(u, exact_derivative)))


def solve_linear(A: Tridiagonal, rhs):
    """Thomas algorithm; raises :class:`SingularMatrix` on a vanishing pivot."""
    n = A.n
    lower = A.lower.tolist()
    diag = A.diag.tolist()
    upper = A.upper.tolist()
    d = np.asarray(rhs, dtype=float).tolist()
    if len(d) != n:
        raise ValueError(f"right-hand side has length {len(d)}, expected {n}")
    c = [0.0] * n
    pivot = diag[0]
    if abs(pivot) < PIVOT_TOL:
        raise SingularMatrix("zero pivot in row 0")
    c[0] = upper[0] / pivot if n > 1 else 0.0
    d[0] = d[0] / pivot
    for i in range(1, n):
        l = lower[i - 1]
        pivot = diag[i] - l * c[i - 1]
        if abs(pivot) < PIVOT_TOL:
            raise SingularMatrix(f"zero pivot in row {i}")
        if i < n - 1:
            c[i] = upper[i] / pivot
        d[i] = (d[i] - l * d[i - 1]) / pivot
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return np.array(d)
