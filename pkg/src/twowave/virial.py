"""Variance diagnostics G, G', G'' and the blow-up criteria for mass-resonant data."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import UnsupportedDimension, UnsupportedRegime
from .functionals import FieldPair, PhysParams, energy, kinetic_parts, mass
from .radial import RadialGrid, d_dr, integrate

GPP_AGREEMENT_RTOL = 1e-10


def _density_integral(f: np.ndarray, g: RadialGrid) -> float:
    return integrate(np.real(f), g)


def virial_G(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    """Weighted variance int r^2 (a2|phi|^2 + a1|psi|^2) dV."""
    g = g or pair.grid
    phi, psi = pair.first, pair.second
    dens = p.a2 * np.abs(phi) ** 2 + p.a1 * np.abs(psi) ** 2
    return integrate(g.r**2 * dens, g)


def virial_Gp(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    g = g or pair.grid
    phi, psi = pair.first, pair.second
    dens = (p.a2 / (2 * p.m1) * g.r * np.conj(phi) * d_dr(phi, g)
            + p.a1 / (2 * p.m2) * g.r * np.conj(psi) * d_dr(psi, g))
    return 4.0 * integrate(np.imag(dens), g)


def blowup_J(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float:
    """Im int (a2/m1 r phi d_r conj(phi) + a1/m2 r psi d_r conj(psi)) dV."""
    g = g or pair.grid
    phi, psi = pair.first, pair.second
    dens = (p.a2 / p.m1 * g.r * phi * np.conj(d_dr(phi, g))
            + p.a1 / p.m2 * g.r * psi * np.conj(d_dr(psi, g)))
    return integrate(np.imag(dens), g)


def _gpp_resonant(pair: FieldPair, p: PhysParams, ku: float, kv: float) -> float:
    N, m1 = p.dim, p.m1
    return (N / m1 * energy(pair, p)
            + p.a2 / m1**2 * (2 - 0.5 * N) * ku
            + p.a1 / (4 * m1**2) * (2 - 0.5 * N) * kv)


def virial_Gpp(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> tuple[float, float | None]:
    """(general, resonant) second derivative of G; resonant is None off mass resonance.

    At m2 = 2 m1 the two forms are the same algebraic expression in the
    discrete integrals, and they are cross-checked.
    """
    g = g or pair.grid
    phi, psi = pair.first, pair.second
    ku, kv = kinetic_parts(pair)
    inter = _density_integral(np.conj(psi) * phi**2, g)
    xgrad = _density_integral(g.r * d_dr(phi**2, g) * np.conj(psi), g)
    m1, m2 = p.m1, p.m2
    coef_x = 1.0 / m1 - 2.0 / m2
    general = (2 * p.a2 / m1**2 * ku + 2 * p.a1 / m2**2 * kv
               + 2 * p.a1 * p.a2 * p.dim * (1 / m1 - 1 / m2) * inter)
    if coef_x != 0.0:
        general += 2 * p.a1 * p.a2 * coef_x * xgrad
    if not p.mass_resonant:
        return float(general), None
    resonant = _gpp_resonant(pair, p, ku, kv)
    scale = (2 * p.a2 / m1**2 * ku + 2 * p.a1 / m2**2 * kv
             + abs(2 * p.a1 * p.a2 * p.dim * (1 / m1 - 1 / m2) * inter))
    if abs(general - resonant) > GPP_AGREEMENT_RTOL * max(scale, 1e-300):
        raise AssertionError(f"virial forms disagree: {general!r} vs {resonant!r}")
    return float(general), float(resonant)


@dataclass(frozen=True)
class VirialState:
    G: float
    Gp: float
    Gpp_general: float
    Gpp_resonant: float | None


def virial_state(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> VirialState:
    g = g or pair.grid
    gen, res = virial_Gpp(pair, p, g)
    return VirialState(virial_G(pair, p, g), virial_Gp(pair, p, g), gen, res)


@dataclass(frozen=True)
class BlowupCriterion:
    variant: str | None  # "C1", "C2", "C3" or None
    E0: float
    J: float
    R: float
    tol_E: float
    G0: float
    Gp0: float
    T_star: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _check_blowup_regime(p: PhysParams) -> None:
    if not p.mass_resonant:
        raise UnsupportedRegime("blow-up criteria need m2 = 2 m1")
    if not 4.0 <= p.dim < 6.0:
        raise UnsupportedDimension(f"blow-up criteria need 4 <= N < 6, got N = {p.dim}")


def classify_from_evidence(E0: float, J: float, R: float, tol_E: float) -> str | None:
    if E0 < -tol_E:
        return "C1"
    if abs(E0) <= tol_E:
        return "C2" if J > 0 else None
    return "C3" if J >= R else None


def classify_blowup(initial: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> BlowupCriterion:
    _check_blowup_regime(p)
    g = g or initial.grid
    E0 = energy(initial, p)
    ku, kv = kinetic_parts(initial)
    tol_E = 1e-12 * (p.a2 / (2 * p.m1) * ku + p.a1 / (4 * p.m2) * kv)
    J = blowup_J(initial, p, g)
    G0 = virial_G(initial, p, g)
    Gp0 = virial_Gp(initial, p, g)
    R = float(np.sqrt(max(p.dim / (2 * p.m1) * E0 * G0, 0.0)))
    variant = classify_from_evidence(E0, J, R, tol_E)
    T = vanishing_time(G0, Gp0, E0, p.m1, p.dim)
    return BlowupCriterion(variant, float(E0), float(J), R, float(tol_E), G0, Gp0, T)


def vanishing_time(G0: float, Gp0: float, E0: float, m1: float, dim: float) -> float | None:
    """Smallest positive root of G0 + Gp0 t + (N/2m1) E0 t^2, or None."""
    a = dim / (2 * m1) * E0
    b, c = Gp0, G0
    if c <= 0:
        return 0.0
    if a == 0.0:
        return float(-c / b) if b < 0 else None
    disc = b * b - 4 * a * c
    if disc < 0:
        # a tangent envelope may miss zero by round-off
        if disc >= -1e-12 * max(b * b, abs(4 * a * c)) and b < 0 < a:
            disc = 0.0
        else:
            return None
    sq = np.sqrt(disc)
    roots = [x for x in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)) if x > 0]
    return float(min(roots)) if roots else None


def predicted_vanishing_time(initial: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> float | None:
    _check_blowup_regime(p)
    g = g or initial.grid
    return vanishing_time(virial_G(initial, p, g), virial_Gp(initial, p, g), energy(initial, p), p.m1, p.dim)


def envelope(t, G0: float, Gp0: float, E0: float, m1: float, dim: float):
    t = np.asarray(t, dtype=float)
    return G0 + Gp0 * t + dim / (2 * m1) * E0 * t**2


def holder_bound(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> tuple[float, float]:
    """(mass, (4/N) sqrt(G) sqrt(a2 K_phi + a1 K_psi)); the first never exceeds the second."""
    g = g or pair.grid
    ku, kv = kinetic_parts(pair)
    rhs = 4.0 / p.dim * np.sqrt(virial_G(pair, p, g)) * np.sqrt(p.a2 * ku + p.a1 * kv)
    return mass(pair, p), float(rhs)
