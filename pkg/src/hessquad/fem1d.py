"""Piecewise-linear finite elements on a uniform mesh of (0, 1).

Everything is symmetric tridiagonal: mass and stiffness matrices, the
elliptic operator A = -beta * Laplacian + gamma * I (plus optional weighted
mass terms), and the Darcy operator with a cell-midpoint coefficient.
Operators are immutable after assembly and cache their banded Cholesky
factor, so repeated solves against the same operator are cheap; the adaptive
quadrature loop relies on that.

Dirichlet operators own the interior degrees of freedom only; their vectors
have length ``n_cells - 1``.  Natural (Neumann) operators own all
``n_cells + 1`` nodes.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh with n_cells = 2**L cells on (0, 1)."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2 or (self.n_cells & (self.n_cells - 1)) != 0:
            raise ValueError("n_cells must be a power of two >= 2")

    @classmethod
    def from_exponent(cls, L: int) -> "Mesh1D":
        return cls(n_cells=2**L)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)

    def interior_nodes(self) -> np.ndarray:
        return self.nodes()[1:-1]

    def cell_midpoints(self) -> np.ndarray:
        x = self.nodes()
        return 0.5 * (x[:-1] + x[1:])


class OperatorKind(enum.Enum):
    MASS = "mass"
    STIFFNESS_A = "stiffness_a"


@dataclass
class TriDiagOperator:
    """Symmetric tridiagonal SPD operator with a cached Cholesky factor."""

    mesh: Mesh1D
    kind: OperatorKind
    diag: np.ndarray
    off: np.ndarray
    dirichlet: bool
    beta: float = 0.0
    gamma: float = 0.0
    _factor: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_dof(self) -> int:
        return len(self.diag)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply to a vector or to a block of column vectors."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            out = self.diag * v
            out[:-1] += self.off * v[1:]
            out[1:] += self.off * v[:-1]
        else:
            out = self.diag[:, None] * v
            out[:-1] += self.off[:, None] * v[1:]
            out[1:] += self.off[:, None] * v[:-1]
        return out

    def quadratic(self, v: np.ndarray, w: np.ndarray | None = None) -> float:
        w = v if w is None else w
        return float(np.dot(v, self.matvec(w)))

    def _banded(self) -> np.ndarray:
        ab = np.zeros((2, self.n_dof))
        ab[0, 1:] = self.off
        ab[1, :] = self.diag
        return ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._factor is None:
            self._factor = cholesky_banded(self._banded(), lower=False)
        return cho_solve_banded((self._factor, False), np.asarray(rhs, dtype=float))

    def dense(self) -> np.ndarray:
        out = np.diag(self.diag)
        out += np.diag(self.off, 1) + np.diag(self.off, -1)
        return out

    def add(self, other: "TriDiagOperator", coeff: float = 1.0) -> "TriDiagOperator":
        """New operator self + coeff * other (same dof layout)."""
        if other.n_dof != self.n_dof or other.dirichlet != self.dirichlet:
            raise ValueError("operator layouts differ")
        return TriDiagOperator(
            mesh=self.mesh,
            kind=self.kind,
            diag=self.diag + coeff * other.diag,
            off=self.off + coeff * other.off,
            dirichlet=self.dirichlet,
            beta=self.beta,
            gamma=self.gamma,
        )


def mass_operator(mesh: Mesh1D, dirichlet: bool = False) -> TriDiagOperator:
    """P1 mass matrix; interior row stencil h * [1/6, 2/3, 1/6]."""
    h = mesh.h
    n = mesh.n_interior if dirichlet else mesh.n_nodes
    diag = np.full(n, 2.0 * h / 3.0)
    if not dirichlet:
        diag[0] = diag[-1] = h / 3.0
    off = np.full(n - 1, h / 6.0)
    return TriDiagOperator(mesh, OperatorKind.MASS, diag, off, dirichlet)


def laplace_operator(mesh: Mesh1D, dirichlet: bool = True) -> TriDiagOperator:
    """P1 Laplacian stiffness; interior row stencil (1/h) * [-1, 2, -1]."""
    h = mesh.h
    n = mesh.n_interior if dirichlet else mesh.n_nodes
    diag = np.full(n, 2.0 / h)
    if not dirichlet:
        diag[0] = diag[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    return TriDiagOperator(mesh, OperatorKind.STIFFNESS_A, diag, off, dirichlet)


def assemble(
    mesh: Mesh1D,
    kind: OperatorKind,
    beta: float = 1.0,
    gamma: float = 0.0,
    dirichlet: bool = False,
) -> TriDiagOperator:
    """Assemble MASS or the elliptic operator beta * (-Laplacian) + gamma * I.

    The elliptic operator is SPD for beta > 0 with either gamma > 0 or
    Dirichlet-eliminated boundary rows (gamma = 0 is the Dirichlet Laplacian
    of the linear benchmark).
    """
    if kind is OperatorKind.MASS:
        return mass_operator(mesh, dirichlet=dirichlet)
    if beta <= 0:
        raise ValueError("beta must be positive")
    if gamma < 0 or (gamma == 0 and not dirichlet):
        raise ValueError("gamma must be positive for a natural-boundary operator")
    lap = laplace_operator(mesh, dirichlet=dirichlet)
    out = TriDiagOperator(
        mesh, OperatorKind.STIFFNESS_A, beta * lap.diag, beta * lap.off, dirichlet,
        beta=beta, gamma=gamma,
    )
    if gamma != 0.0:
        m = mass_operator(mesh, dirichlet=dirichlet)
        out = TriDiagOperator(
            mesh, OperatorKind.STIFFNESS_A, out.diag + gamma * m.diag,
            out.off + gamma * m.off, dirichlet, beta=beta, gamma=gamma,
        )
    return out


_GAUSS4 = np.polynomial.legendre.leggauss(4)


def weighted_mass_operator(
    mesh: Mesh1D, weight, dirichlet: bool = False
) -> TriDiagOperator:
    """Mass matrix weighted by a pointwise coefficient, <w * phi_j, phi_i>.

    Entries are integrated with a 4-point Gauss rule per cell, which resolves
    the mollifier bumps used by the measurement operator.
    """
    h = mesh.h
    xs = mesh.nodes()
    pts, wts = _GAUSS4
    t = 0.5 * (pts + 1.0)  # local coordinate in [0, 1]
    xq = xs[:-1, None] + h * t[None, :]  # (n_cells, 4)
    wq = 0.5 * h * wts[None, :]
    wx = np.asarray(weight(xq), dtype=float) * wq
    phi_l = 1.0 - t
    phi_r = t
    a_ll = (wx * phi_l**2).sum(axis=1)
    a_lr = (wx * phi_l * phi_r).sum(axis=1)
    a_rr = (wx * phi_r**2).sum(axis=1)
    diag = np.zeros(mesh.n_nodes)
    diag[:-1] += a_ll
    diag[1:] += a_rr
    off = a_lr.copy()
    if dirichlet:
        diag = diag[1:-1]
        off = off[1:-1]
    return TriDiagOperator(mesh, OperatorKind.MASS, diag, off, dirichlet)


def apply_A_alpha(
    v: np.ndarray, alpha: int, A: TriDiagOperator, M: TriDiagOperator
) -> np.ndarray:
    """Apply A_alpha = (A M^{-1})^{alpha-1} A; alpha a positive integer."""
    if not (isinstance(alpha, (int, np.integer)) and alpha >= 1):
        raise ValueError("alpha must be a positive integer")
    out = A.matvec(v)
    for _ in range(alpha - 1):
        out = A.matvec(M.solve(out))
    return out


def apply_A_alpha_inv(
    v: np.ndarray, alpha: int, A: TriDiagOperator, M: TriDiagOperator
) -> np.ndarray:
    """Apply A_alpha^{-1} = A^{-1} (M A^{-1})^{alpha-1}."""
    if not (isinstance(alpha, (int, np.integer)) and alpha >= 1):
        raise ValueError("alpha must be a positive integer")
    out = A.solve(v)
    for _ in range(alpha - 1):
        out = A.solve(M.matvec(out))
    return out


def solve_poisson(m: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Solve -u'' = m with homogeneous Dirichlet data; nodal in, nodal out.

    The load is the consistent P1 projection of the nodal source.
    """
    m = np.asarray(m, dtype=float)
    if len(m) != mesh.n_nodes:
        raise ValueError("source field length does not match the mesh")
    load = mass_operator(mesh).matvec(m)[1:-1]
    u = np.zeros(mesh.n_nodes)
    u[1:-1] = laplace_operator(mesh, dirichlet=True).solve(load)
    return u


def darcy_cell_coeffs(m: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Coefficient exp(m) at cell midpoints (midpoint quadrature per cell)."""
    m = np.asarray(m, dtype=float)
    return np.exp(0.5 * (m[:-1] + m[1:]))


def darcy_stiffness(k_cells: np.ndarray, mesh: Mesh1D) -> TriDiagOperator:
    """Interior stiffness of -d/dx(k du/dx) with cell-constant coefficient."""
    a = k_cells / mesh.h
    diag = a[:-1] + a[1:]
    off = -a[1:-1]
    return TriDiagOperator(mesh, OperatorKind.STIFFNESS_A, diag, off, dirichlet=True)


def solve_darcy(
    m: np.ndarray, mesh: Mesh1D, u_left: float = 1.0, u_right: float = 0.0
) -> np.ndarray:
    """Solve -(exp(m) u')' = 0 with Dirichlet data u(0), u(1); nodal output."""
    m = np.asarray(m, dtype=float)
    if len(m) != mesh.n_nodes:
        raise ValueError("parameter field length does not match the mesh")
    if not np.all(np.isfinite(m)):
        raise ValueError("parameter field must be finite")
    k = darcy_cell_coeffs(m, mesh)
    op = darcy_stiffness(k, mesh)
    rhs = np.zeros(mesh.n_interior)
    rhs[0] += k[0] / mesh.h * u_left
    rhs[-1] += k[-1] / mesh.h * u_right
    u = np.empty(mesh.n_nodes)
    u[0] = u_left
    u[-1] = u_right
    u[1:-1] = op.solve(rhs)
    return u


def cell_slopes(u: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Per-cell derivative of a nodal field."""
    return np.diff(np.asarray(u, dtype=float)) / mesh.h


def scatter_mass(q_cells: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Nodal vector of <q, phi_i> for cell-constant q: h/2 to each endpoint."""
    out = np.zeros(mesh.n_nodes)
    half = 0.5 * mesh.h * np.asarray(q_cells, dtype=float)
    out[:-1] += half
    out[1:] += half
    return out


def scatter_grad(q_cells: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Nodal vector of <q, phi_i'> for cell-constant q: q_left - q_right."""
    q = np.asarray(q_cells, dtype=float)
    out = np.zeros(mesh.n_nodes)
    out[1:] += q
    out[:-1] -= q
    return out


def field_to_csv(x: np.ndarray, values: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("x,value\n")
    for xi, vi in zip(x, values):
        buf.write(f"{xi:.17g},{vi:.17g}\n")
    return buf.getvalue()
