"""Strong instability of the ground-state standing wave by blow-up.

Data (xi, -eta) dilated by lambda > 1 lie in the flow-invariant set

    K1 = {Re Q < 0, Re S < M0},

on which Re Q(t) <= 2 Re S0 - 2 M0 < 0, hence G'' <= -2 theta0 / m1 with
theta0 = 2 M0 - 2 Re S0, and the solution must blow up.  M0 is taken from the
certified real ground state.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoProjection, UnsupportedDimension, UnsupportedRegime, ValidationError
from .evolution import EvolutionConfig, TrajectoryRecord, evolve
from .functionals import (FieldPair, PhysParams, action_S, constraint_Q, h1_norm, interaction,
                          projection_exponent, rescale, scaling_coefficients, weighted_kinetic)
from .groundstate import GroundState
from .radial import RadialGrid

# relative slack on M0: the discrete minimizer is certified to this level
M0_SLACK = 1e-6
# interpolation budget of rescale, relative to |Re S| + |Re Q|
GAP_RTOL = 1e-6


@dataclass(frozen=True)
class K1Report:
    reQ: float
    reS: float
    M0: float
    member: bool
    theta0: float


def check_K1(pair: FieldPair, p: PhysParams, g: RadialGrid | None, M0: float) -> K1Report:
    reQ = constraint_Q(pair, p, conjugate_first=True)
    reS = action_S(pair, p, conjugate_first=True)
    member = bool(reQ < 0 and reS < M0)
    return K1Report(reQ, reS, float(M0), member, float(2 * M0 - 2 * reS))


@dataclass(frozen=True)
class InstabilityRunSpec:
    lam: float
    config: EvolutionConfig = field(default_factory=EvolutionConfig)

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 1):
            raise ValidationError(f"instability data need lambda > 1, got {self.lam!r}")


def make_instability_data(gs: GroundState, lam: float, g: RadialGrid | None = None) -> FieldPair:
    """Mass-preserving dilation of (xi, -eta) by lambda > 1."""
    if not (np.isfinite(lam) and lam > 1):
        raise ValidationError(f"instability data need lambda > 1, got {lam!r}")
    return rescale(gs.pair, lam)


def h1_distances(pair: FieldPair, gs: GroundState) -> tuple[float, float]:
    g = gs.grid
    return h1_norm(pair.first - gs.xi, g), h1_norm(pair.second + gs.eta, g)


@dataclass(frozen=True)
class GapReport:
    mu: float
    lhs: float
    rhs: float
    holds: bool
    applicable: bool  # mu < 1
    lhs_scaling: float  # lhs from the exact scaling law of the coefficients


def gap_inequality(pair: FieldPair, p: PhysParams, g: RadialGrid | None = None) -> GapReport:
    """Re S(pair) - Re S(pair_mu) >= Re Q(pair) / 2, mu the projection exponent."""
    T = interaction(pair, conjugate_first=True)
    if not T < 0:
        raise NoProjection(f"Re int psi conj(phi)^2 must be negative, got {T:.3e}")
    mu = projection_exponent(weighted_kinetic(pair, p), p.a1 * p.a2 * T, p.dim)
    reS = action_S(pair, p, conjugate_first=True)
    reQ = constraint_Q(pair, p, conjugate_first=True)
    lhs = reS - action_S(rescale(pair, mu), p, conjugate_first=True)
    c = scaling_coefficients(pair, p)
    lhs_scaling = reS - c.S(mu, p.dim)
    rhs = 0.5 * reQ
    tol = GAP_RTOL * (abs(reS) + abs(reQ))
    return GapReport(float(mu), float(lhs), float(rhs), bool(lhs >= rhs - tol), bool(mu < 1), float(lhs_scaling))


@dataclass
class CheckResult:
    passed: bool
    worst_margin: float  # min over the trajectory of (bound - value); negative means violated


@dataclass
class InstabilityReport:
    lam: float
    epsilon: tuple
    M0: float
    reS0: float
    theta0: float
    initial_member: bool
    t_detect: float | None
    termination: str
    checks: dict
    violations: list
    assumptions: list
    trajectory_csv: str | None = None
    record: TrajectoryRecord | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "epsilon": list(self.epsilon),
            "M0": self.M0,
            "reS0": self.reS0,
            "theta0": self.theta0,
            "initial_member": self.initial_member,
            "t_detect": self.t_detect,
            "termination": self.termination,
            "checks": {k: asdict(v) for k, v in self.checks.items()},
            "violations": list(self.violations),
            "assumptions": list(self.assumptions),
            "trajectory_csv": self.trajectory_csv,
        }

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _check_run_params(p: PhysParams) -> None:
    if not (p.mass_resonant and p.frequency_resonant):
        raise UnsupportedRegime("instability runs need m2 = 2 m1 and omega2 = 2 omega1")
    if not 4.0 < p.dim < 6.0:
        raise UnsupportedDimension(f"instability runs need 4 < N < 6, got N = {p.dim}")


def trajectory_checks(rec: TrajectoryRecord, p: PhysParams, M0: float) -> dict:
    """K1 membership, the Re Q bound and the G'' bound along a recorded trajectory.

    The drift budget at each step is twice the change of Re S since t = 0
    (the conserved quantity the bounds rest on) plus the slack on M0.
    """
    reS, reQ, Gpp = rec.column("reS"), rec.column("reQ"), rec.column("Gpp")
    reS0 = reS[0]
    theta0 = 2 * M0 - 2 * reS0
    budget = 2 * np.abs(reS - reS0) + 2 * M0_SLACK * abs(M0)
    member_margin = np.minimum(-reQ, M0 - reS)
    q_margin = (2 * reS0 - 2 * M0) + budget - reQ
    g_margin = -2 * theta0 / p.m1 + 2 * budget / p.m1 - Gpp
    return {
        "K1_membership": CheckResult(bool(np.all(member_margin > 0)), float(member_margin.min())),
        "Q_bound": CheckResult(bool(np.all(q_margin >= 0)), float(q_margin.min())),
        "Gpp_bound": CheckResult(bool(np.all(g_margin >= 0)), float(g_margin.min())),
    }


def run_instability(spec: InstabilityRunSpec, gs: GroundState, p: PhysParams,
                    g: RadialGrid | None = None) -> InstabilityReport:
    g = g or gs.grid
    _check_run_params(p)
    M0 = gs.action_M0
    pair = make_instability_data(gs, spec.lam, g)
    eps = h1_distances(pair, gs)
    k1 = check_K1(pair, p, g, M0)
    violations = []
    if not k1.member:
        violations.append("initial_K1_membership")
    rec = evolve(pair, p, g, spec.config)
    checks = trajectory_checks(rec, p, M0)
    blew_up = rec.termination.status == "BlowUpDetected"
    checks["blowup"] = CheckResult(blew_up, float(rec.termination.t) if blew_up else float("-inf"))
    violations += [name for name, c in checks.items() if not c.passed]
    return InstabilityReport(
        lam=float(spec.lam), epsilon=eps, M0=M0, reS0=k1.reS, theta0=k1.theta0,
        initial_member=k1.member, t_detect=float(rec.termination.t) if blew_up else None,
        termination=rec.termination.status, checks=checks, violations=violations,
        assumptions=["M0 is the action of the real ground state; the complex-pair minimum is not recomputed"],
        record=rec)
