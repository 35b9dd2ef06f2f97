"""Scalar functionals of radial field pairs.

Conventions: the pair is ``(first, second)`` = (phi, psi) for the evolution
and (u, v) for the stationary problem.  ``conjugate_first`` selects the
complex-pair form in which the interaction term is Re int(v conj(u)^2);
for real pairs both forms coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NoProjection, NumericalFault, UnsupportedDimension, ValidationError
from .radial import RadialGrid, d_dr, grad_sq_integral, integrate, laplacian_radial

RESONANCE_RTOL = 1e-14


@dataclass(frozen=True)
class PhysParams:
    m1: float = 1.0
    m2: float = 2.0
    a1: float = 1.0
    a2: float = 1.0
    omega1: float = 1.0
    omega2: float = 2.0
    dim: float = 5.0

    def __post_init__(self):
        for name in ("m1", "m2", "a1", "a2", "omega1", "omega2", "dim"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise ValidationError(f"{name} must be finite, got {val!r}")
        for name in ("m1", "m2"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("a1", "a2"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValidationError("frequencies must be positive")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")

    @classmethod
    def canonical(cls, dim: float = 5.0) -> PhysParams:
        return cls(dim=dim)

    @property
    def mass_resonant(self) -> bool:
        return abs(self.m2 - 2.0 * self.m1) <= RESONANCE_RTOL * self.m1

    @property
    def frequency_resonant(self) -> bool:
        return abs(self.omega2 - 2.0 * self.omega1) <= RESONANCE_RTOL * self.omega1

    @property
    def coupled(self) -> bool:
        return self.a1 > 0 and self.a2 > 0

    def replace(self, **changes) -> PhysParams:
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return PhysParams(**fields)


@dataclass(frozen=True, eq=False)
class FieldPair:
    """Two radial profiles sampled on the same grid."""

    first: np.ndarray
    second: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        n = self.grid.n_points
        for name in ("first", "second"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise ValidationError(f"{name} has shape {arr.shape}, grid has {n} nodes")
            if not np.all(np.isfinite(arr)):
                raise NumericalFault(f"non-finite values in {name}")
            object.__setattr__(self, name, arr)

    @property
    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.first) or np.iscomplexobj(self.second))

    def astype(self, dtype) -> FieldPair:
        return FieldPair(self.first.astype(dtype), self.second.astype(dtype), self.grid)


def _interaction(pair: FieldPair, conjugate_first: bool) -> float:
    u, v = pair.first, pair.second
    uu = np.conj(u) ** 2 if conjugate_first else u**2
    return integrate((v * uu).real, pair.grid)


def _l2sq(f: np.ndarray, grid: RadialGrid) -> float:
    return integrate((f * np.conj(f)).real, grid)


def kinetic_parts(pair: FieldPair) -> tuple[float, float]:
    """(int |grad first|^2, int |grad second|^2)."""
    return grad_sq_integral(pair.first, pair.grid), grad_sq_integral(pair.second, pair.grid)


def weighted_kinetic(pair: FieldPair, p: PhysParams) -> float:
    """(a2/m1) int|grad u|^2 + (a1/2m2) int|grad v|^2, the kinetic part of Q."""
    ku, kv = kinetic_parts(pair)
    return p.a2 / p.m1 * ku + p.a1 / (2.0 * p.m2) * kv


def mass(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    g = g or pair.grid
    return p.a2 * _l2sq(pair.first, g) + p.a1 * _l2sq(pair.second, g)


def frequency_mass(pair: FieldPair, p: PhysParams) -> float:
    """a2 w1 int|u|^2 + (a1/2) w2 int|v|^2."""
    g = pair.grid
    return p.a2 * p.omega1 * _l2sq(pair.first, g) + 0.5 * p.a1 * p.omega2 * _l2sq(pair.second, g)


def energy(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    ku, kv = kinetic_parts(pair)
    return (
        p.a2 / (2.0 * p.m1) * ku
        + p.a1 / (4.0 * p.m2) * kv
        + p.a1 * p.a2 * _interaction(pair, conjugate_first=True)
    )


def momentum(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    """Magnitude of the total momentum vector.

    For radial fields the integrand is (radial scalar) * x/|x|; the angular
    mean of x/|x| over the sphere is the zero vector, so the result is the
    radial integral times zero.
    """
    g = g or pair.grid
    phi, psi = pair.first, pair.second
    radial = integrate(
        (p.a2 * np.conj(phi) * d_dr(phi, g) + 0.5 * p.a1 * np.conj(psi) * d_dr(psi, g)).imag, g
    )
    angular_mean = np.zeros(max(int(round(g.dim)), 1))
    return float(np.linalg.norm(radial * angular_mean))


def action_S(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None,
             conjugate_first: bool = True) -> float:
    ku, kv = kinetic_parts(pair)
    return (
        p.a2 / (2.0 * p.m1) * ku
        + p.a1 / (4.0 * p.m2) * kv
        + frequency_mass(pair, p)
        + p.a1 * p.a2 * _interaction(pair, conjugate_first)
    )


def constraint_Q(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None,
                 conjugate_first: bool = True) -> float:
    return weighted_kinetic(pair, p) + 0.5 * p.dim * p.a1 * p.a2 * _interaction(pair, conjugate_first)


def interaction(pair: FieldPair, conjugate_first: bool = True) -> float:
    """T = Re int v conj(u)^2 (or int v u^2)."""
    return _interaction(pair, conjugate_first)


def potential_G(u, v, p: PhysParams):
    """Pointwise potential G(u, v) and its partial derivatives (G, dG/du, dG/dv)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    G = -p.a2 * p.omega1 * u**2 - 0.5 * p.a1 * p.omega2 * v**2 - p.a1 * p.a2 * u**2 * v
    dGu = -2.0 * p.a2 * p.omega1 * u - 2.0 * p.a1 * p.a2 * u * v
    dGv = -p.a1 * p.omega2 * v - p.a1 * p.a2 * u**2
    if G.ndim == 0:
        return float(G), float(dGu), float(dGv)
    return G, dGu, dGv


def _rescale_profile(f: np.ndarray, lam: float, grid: RadialGrid) -> np.ndarray:
    r = grid.r
    spline = CubicSpline(r, f, bc_type=((1, 0.0), "not-a-knot"))
    x = lam * r
    out = np.zeros_like(f, dtype=np.result_type(f, float))
    inside = x <= grid.r_max
    out[inside] = spline(x[inside])
    return lam ** (0.5 * grid.dim) * out


def rescale(pair: FieldPair, lam: float, g: RadialGrid | None = None) -> FieldPair:
    """Mass-preserving dilation f -> lam^{N/2} f(lam r)."""
    if not np.isfinite(lam) or lam <= 0:
        raise ValidationError(f"lambda must be positive, got {lam!r}")
    if lam == 1.0:
        return pair
    grid = pair.grid
    return FieldPair(_rescale_profile(pair.first, lam, grid), _rescale_profile(pair.second, lam, grid), grid)


def tau_rescale(pair: FieldPair, tau: float) -> FieldPair:
    """f -> tau^{-2} f(r / tau), the family that keeps the constraint manifold invariant."""
    if not np.isfinite(tau) or tau <= 0:
        raise ValidationError(f"tau must be positive, got {tau!r}")
    grid = pair.grid
    amp = tau ** (0.5 * grid.dim - 2.0)  # cancels the tau^{-N/2} applied by the profile rescale
    return FieldPair(amp * _rescale_profile(pair.first, 1.0 / tau, grid),
                     amp * _rescale_profile(pair.second, 1.0 / tau, grid), grid)


@dataclass(frozen=True)
class ScalingCoefficients:
    A: float
    B: float
    C: float

    def Q(self, lam: float, dim: float) -> float:
        return self.A * lam**2 - 0.5 * dim * self.B * lam ** (0.5 * dim)

    def S(self, lam: float, dim: float) -> float:
        return 0.5 * self.A * lam**2 - self.B * lam ** (0.5 * dim) + self.C


def scaling_coefficients(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> ScalingCoefficients:
    return ScalingCoefficients(
        A=weighted_kinetic(pair, p),
        B=-p.a1 * p.a2 * _interaction(pair, conjugate_first=True),
        C=frequency_mass(pair, p),
    )


def projection_exponent(A: float, coupling_T: float, dim: float) -> float:
    """Root beta > 0 of A b^2 + (N/2) (a1 a2 T) b^{N/2} = 0."""
    if dim <= 4:
        raise UnsupportedDimension(f"projection needs N > 4, got {dim}")
    if not coupling_T < 0:
        raise NoProjection(f"interaction term must be negative, got {coupling_T:.3e}")
    return float((-2.0 * A / (dim * coupling_T)) ** (2.0 / (dim - 4.0)))


def projection_beta(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    T = _interaction(pair, conjugate_first=True)
    return projection_exponent(weighted_kinetic(pair, p), p.a1 * p.a2 * T, p.dim)


def first_variation(pair: FieldPair, p: PhysParams) -> tuple[np.ndarray, np.ndarray]:
    """L^2 gradients of the real action S at nodal values (dS/du, dS/dv)."""
    g = pair.grid
    u, v = pair.first, pair.second
    gu = -p.a2 / p.m1 * laplacian_radial(u, g) + 2.0 * p.a2 * p.omega1 * u + 2.0 * p.a1 * p.a2 * u * v
    gv = -p.a1 / (2.0 * p.m2) * laplacian_radial(v, g) + p.a1 * p.omega2 * v + p.a1 * p.a2 * u**2
    return gu, gv


def h1_norm(f: np.ndarray, grid: RadialGrid) -> float:
    return float(np.sqrt(_l2sq(f, grid) + grad_sq_integral(f, grid)))
