"""Radial discretization of R^N: mesh, quadrature, differentiation, Laplacian.

Fields are sampled on the uniform mesh ``r_j = j*dr``, node 0 at the
origin and the last node at ``r_max`` where a homogeneous Dirichlet
condition holds.

The Laplacian is built in energy form.  A staggered first derivative ``D``
maps nodal values to the faces ``r_{j+1/2}`` (fourth order, even ghosts
at the origin, odd Dirichlet ghost at r_max; the two faces next to the
origin use the two-point difference), and

    A = D^T diag(w_face) D,        L = -diag(w)^{-1} A,

where ``w_face = |S^{N-1}| dr r_face^{N-1}``.  The nodal weights ``w`` are
chosen so that ``L r^2 = 2N`` holds exactly on all nodes outside the
Dirichlet closure; away from the origin they agree with the trapezoid
weights to O(dr^4).  The four outermost weights are trapezoid weights with
the Gregory end correction.  One set of weights serves as the quadrature
rule and as the mass inner product, so summation by parts is exact and the
Crank-Nicolson propagator is unitary in the discrete mass norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from .errors import NumericalFault, ValidationError

# Gregory end correction for the trapezoid rule (fourth order), outermost last.
_GREGORY = np.array([49.0 / 48.0, 43.0 / 48.0, 59.0 / 48.0, 17.0 / 48.0])
_TAIL = len(_GREGORY)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform radial mesh on [0, r_max] for a (real) dimension N."""

    n_points: int
    r_max: float
    dim: float
    r: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    face_weights: np.ndarray = field(repr=False)
    D: sp.csr_matrix = field(repr=False)

    @property
    def dr(self) -> float:
        return self.r_max / (self.n_points - 1)

    @property
    def sphere_area(self) -> float:
        return sphere_area(self.dim)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """A = D^T W_face D on all nodes (symmetric positive semidefinite)."""
        return (self.D.T @ sp.diags(self.face_weights) @ self.D).tocsr()

    @cached_property
    def stiffness_interior(self) -> sp.csc_matrix:
        """A restricted to the unknowns 0..n-2 (Dirichlet node removed)."""
        m = self.n_points - 1
        return self.stiffness[:m, :m].tocsc()

    def ball_volume(self, radius: float | None = None) -> float:
        R = self.r_max if radius is None else radius
        N = self.dim
        return float(np.exp(0.5 * N * np.log(np.pi) + N * np.log(R) - gammaln(0.5 * N + 1.0)))

    def __hash__(self) -> int:
        return hash((self.n_points, self.r_max, self.dim))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (self.n_points, self.r_max, self.dim) == (other.n_points, other.r_max, other.dim)

    def __reduce__(self):
        return (make_grid, (self.n_points, self.r_max, self.dim))


def sphere_area(dim: float) -> float:
    """Surface area of the unit sphere S^{N-1}, 2 pi^{N/2} / Gamma(N/2)."""
    return float(2.0 * np.exp(0.5 * dim * np.log(np.pi) - gammaln(0.5 * dim)))


def _face_derivative(n: int, dr: float) -> sp.csr_matrix:
    rows, cols, vals = [], [], []

    def put(face, node, val):
        if node < 0:
            node = -node  # even ghost f(-r) = f(r)
        if node == n:
            # Dirichlet ghost f(R + dr) = 2 f(R) - f(R - dr)
            put(face, n - 1, 2.0 * val)
            put(face, n - 2, -val)
            return
        rows.append(face)
        cols.append(node)
        vals.append(val)

    for k in range(n - 1):
        if k < 2:
            put(k, k, -1.0 / dr)
            put(k, k + 1, 1.0 / dr)
        else:
            for off, c in zip((-1, 0, 1, 2), (1.0, -27.0, 27.0, -1.0)):
                put(k, k + off, c / (24.0 * dr))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))


def make_grid(n_points: int, r_max: float, dim: float) -> RadialGrid:
    if isinstance(n_points, bool) or int(n_points) != n_points:
        raise ValidationError(f"n_points must be an integer, got {n_points!r}")
    n = int(n_points)
    for name, val in (("r_max", r_max), ("dim", dim)):
        if not np.isfinite(val):
            raise ValidationError(f"{name} must be finite, got {val!r}")
    if n < 8:
        raise ValidationError(f"n_points must be >= 8, got {n}")
    if r_max <= 0:
        raise ValidationError(f"r_max must be positive, got {r_max}")
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    r_max = float(r_max)
    dim = float(dim)

    dr = r_max / (n - 1)
    r = dr * np.arange(n, dtype=float)
    area = sphere_area(dim)

    D = _face_derivative(n, dr)
    r_face = 0.5 * (r[1:] + r[:-1])
    face_weights = area * dr * r_face ** (dim - 1.0)

    # weights making L r^2 = 2N exact; trapezoid/Gregory in the Dirichlet closure
    A_r2 = D.T @ (face_weights * (D @ r**2))
    weights = -A_r2 / (2.0 * dim)
    weights[-_TAIL:] = area * dr * r[-_TAIL:] ** (dim - 1.0) * _GREGORY
    if np.any(weights <= 0):
        raise ValidationError(f"grid (n={n}, N={dim}) yields nonpositive quadrature weights")

    for a in (r, weights, face_weights):
        a.setflags(write=False)
    return RadialGrid(n, r_max, dim, r, weights, face_weights, D)


def _check_finite(f: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(f)):
        raise NumericalFault(f"non-finite values in {what}")


def integrate(density: np.ndarray, grid: RadialGrid) -> float:
    """Quadrature of a real radial density over the ball of radius r_max."""
    density = np.asarray(density)
    if np.iscomplexobj(density):
        raise ValidationError("integrate expects a real density")
    if density.shape != (grid.n_points,):
        raise ValidationError(f"density has shape {density.shape}, grid has {grid.n_points} nodes")
    _check_finite(density, "density")
    return float(np.dot(grid.weights, density))


def grad_sq_integral(f: np.ndarray, grid: RadialGrid) -> float:
    """Discrete Dirichlet integral of |f_r|^2 (face quadrature of |D f|^2).

    For fields vanishing at r_max this is exactly -sum w conj(f) L f.
    """
    df = grid.D @ f
    return float(np.dot(grid.face_weights, (df * np.conj(df)).real))


def grad_inner(f: np.ndarray, g: np.ndarray, grid: RadialGrid) -> complex:
    """Face quadrature of conj(f_r) g_r."""
    return complex(np.dot(grid.face_weights, np.conj(grid.D @ f) * (grid.D @ g)))


def laplacian_radial(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Radial Laplacian f_rr + (N-1)/r f_r.

    Node 0 reduces to N f_rr(0) with the even ghost f(-dr) = f(dr).  At r_max
    the odd ghost about the boundary value kills f_rr and leaves the one-sided
    first-derivative term.
    """
    f = np.asarray(f)
    if f.shape[0] < 3:
        raise ValidationError("laplacian_radial needs at least 3 nodes")
    out = -(grid.stiffness @ f) / grid.weights
    out[-1] = (grid.dim - 1.0) / grid.r_max * (f[-1] - f[-2]) / grid.dr
    return out


def d_dr(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """First derivative: five-point centered stencil, one-sided at the two end pairs."""
    f = np.asarray(f)
    h = grid.dr
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return out
