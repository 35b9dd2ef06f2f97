"""Split-step time integration of the radial two-wave system.

Linear part: Crank-Nicolson on the energy-form Laplacian, which is unitary in
the discrete mass norm.  Nonlinear part: pointwise RK4 of

    i phi_t = a1 psi conj(phi),    i psi_t = a2 phi^2.

The node at r_max carries the homogeneous Dirichlet condition throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg.lapack import zgbtrf, zgbtrs

from .errors import NumericalFault, ValidationError
from .functionals import FieldPair, PhysParams, action_S, constraint_Q, energy, h1_norm, mass
from .radial import RadialGrid, d_dr
from .virial import virial_G, virial_Gp, virial_Gpp

DT_COLLAPSE = 1e-12


@dataclass(frozen=True)
class EvolutionConfig:
    dt0: float = 1e-3
    t_end: float = 1.0
    cfl_safety: float = 1.0
    blowup_threshold: float = 1e3
    snapshot_stride: int = 100
    adaptive: bool = False

    def __post_init__(self):
        for name in ("dt0", "t_end", "cfl_safety", "blowup_threshold"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.dt0 <= 0 or self.t_end <= 0:
            raise ValidationError("dt0 and t_end must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValidationError("cfl_safety must lie in (0, 1]")
        if self.blowup_threshold <= 1:
            raise ValidationError("blowup_threshold must exceed 1")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be a positive integer")


@dataclass(frozen=True)
class Termination:
    status: str  # Completed | BlowUpDetected | NumericalFault
    t: float
    reason: str = ""


DIAGNOSTIC_COLUMNS = ("t", "mass", "energy", "reS", "reQ", "G", "Gp", "Gpp",
                      "h1_phi", "h1_psi", "sup_phi", "sup_psi", "dt")


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    diagnostics: dict  # column name -> array, one entry per time
    snapshots: tuple  # (t, FieldPair)
    termination: Termination
    steps: int

    @property
    def times(self) -> np.ndarray:
        return self.diagnostics["t"]

    def column(self, name: str) -> np.ndarray:
        return self.diagnostics[name]

    def final(self) -> FieldPair:
        return self.snapshots[-1][1]

    def max_relative_drift(self, name: str) -> float:
        col = self.diagnostics[name]
        return float(np.max(np.abs(col - col[0])) / abs(col[0]))


def _check_pair(pair: FieldPair, g: RadialGrid) -> None:
    if pair.grid != g:
        raise ValidationError("pair and grid differ")


# ---------------------------------------------------------------- substeps

def _nl_rhs(phi, psi, a1, a2):
    return -1j * a1 * psi * np.conj(phi), -1j * a2 * phi * phi


def _rk4_raw(phi, psi, h, a1, a2):
    with np.errstate(over="raise", invalid="raise"):
        try:
            k1 = _nl_rhs(phi, psi, a1, a2)
            k2 = _nl_rhs(phi + 0.5 * h * k1[0], psi + 0.5 * h * k1[1], a1, a2)
            k3 = _nl_rhs(phi + 0.5 * h * k2[0], psi + 0.5 * h * k2[1], a1, a2)
            k4 = _nl_rhs(phi + h * k3[0], psi + h * k3[1], a1, a2)
            phi = phi + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            psi = psi + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        except FloatingPointError as exc:
            raise NumericalFault("overflow in the nonlinear substep") from exc
    return phi, psi


def nonlinear_substep(pair: FieldPair, dt: float, p: PhysParams) -> FieldPair:
    """Advance i phi_t = a1 psi conj(phi), i psi_t = a2 phi^2 by dt with one classical RK4 step per node."""
    phi = np.asarray(pair.first, dtype=complex)
    psi = np.asarray(pair.second, dtype=complex)
    if dt != 0 and (p.a1 != 0 or p.a2 != 0):
        phi, psi = _rk4_raw(phi, psi, dt, p.a1, p.a2)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
        raise NumericalFault("non-finite values after the nonlinear substep")
    return FieldPair(phi, psi, pair.grid)


@lru_cache(maxsize=64)
def _cn_factor(g: RadialGrid, theta: float):
    """Banded LU of (W + i theta A) on the unknowns 0..n-2."""
    m = g.n_points - 1
    M = (sp.diags(g.weights[:m]) + 1j * theta * g.stiffness_interior).tocoo()
    bw = int(np.max(np.abs(M.row - M.col)))
    ab = np.zeros((3 * bw + 1, m), dtype=complex)
    ab[2 * bw + M.row - M.col, M.col] = M.data
    lu, piv, info = zgbtrf(ab, bw, bw)
    if info != 0:
        raise NumericalFault(f"Crank-Nicolson factorization failed (info={info})")
    return lu, piv, bw


def _cn_apply(f: np.ndarray, g: RadialGrid, theta: float) -> np.ndarray:
    # (W + i theta A)^{-1} (W - i theta A) f = 2 (W + i theta A)^{-1} W f - f
    lu, piv, bw = _cn_factor(g, float(theta))
    m = g.n_points - 1
    x, info = zgbtrs(lu, bw, bw, g.weights[:m] * f[:m], piv)
    if info != 0:
        raise NumericalFault(f"Crank-Nicolson solve failed (info={info})")
    out = np.zeros(g.n_points, dtype=complex)
    out[:m] = 2.0 * x - f[:m]
    return out


def linear_halfstep(pair: FieldPair, dt: float, p: PhysParams, g: RadialGrid | None = None) -> FieldPair:
    """Crank-Nicolson for the free equations over dt/2.

    With W the quadrature weights and A the stiffness matrix, i W f_t = A f / (2m),
    so one CN step of length dt/2 solves (W + i theta A) f+ = (W - i theta A) f
    with theta = dt / (8 m).
    """
    g = g or pair.grid
    _check_pair(pair, g)
    phi = np.asarray(pair.first, dtype=complex)
    psi = np.asarray(pair.second, dtype=complex)
    if dt == 0:
        return FieldPair(phi, psi, g)
    return FieldPair(_cn_apply(phi, g, dt / (8.0 * p.m1)), _cn_apply(psi, g, dt / (8.0 * p.m2)), g)


def step_strang(pair: FieldPair, dt: float, p: PhysParams, g: RadialGrid | None = None) -> FieldPair:
    """linear_halfstep, nonlinear_substep(dt), linear_halfstep."""
    g = g or pair.grid
    _check_pair(pair, g)
    phi = np.asarray(pair.first, dtype=complex)
    psi = np.asarray(pair.second, dtype=complex)
    if dt == 0:
        return FieldPair(phi, psi, g)
    t1, t2 = dt / (8.0 * p.m1), dt / (8.0 * p.m2)
    phi, psi = _cn_apply(phi, g, t1), _cn_apply(psi, g, t2)
    if p.a1 != 0 or p.a2 != 0:
        phi, psi = _rk4_raw(phi, psi, dt, p.a1, p.a2)
    return FieldPair(_cn_apply(phi, g, t1), _cn_apply(psi, g, t2), g)


# ---------------------------------------------------------------- driver

def adaptive_dt(pair: FieldPair, cfg: EvolutionConfig, p: PhysParams, g: RadialGrid) -> float:
    if not cfg.adaptive:
        return cfg.dt0
    dr2 = g.dr**2
    sup = float(np.max(np.abs(pair.first)))
    gphi = float(np.max(np.abs(d_dr(pair.first, g))))
    gpsi = float(np.max(np.abs(d_dr(pair.second, g))))
    den = sup + dr2 * (gphi**2 + gpsi**2)
    if den == 0:
        return cfg.dt0
    return min(cfg.dt0, cfg.cfl_safety * p.m1 * dr2 * sup / den)


def diagnostics(pair: FieldPair, p: PhysParams, g: RadialGrid) -> dict:
    """All per-step scalars; each derivative is formed once."""
    phi, psi = pair.first, pair.second
    w, wf, r = g.weights, g.face_weights, g.r
    Dphi, Dpsi = g.D @ phi, g.D @ psi
    ku = float(wf @ (Dphi.real**2 + Dphi.imag**2))
    kv = float(wf @ (Dpsi.real**2 + Dpsi.imag**2))
    aphi = phi.real**2 + phi.imag**2
    apsi = psi.real**2 + psi.imag**2
    l2u, l2v = float(w @ aphi), float(w @ apsi)
    T = float(w @ (psi * np.conj(phi) ** 2).real)
    m1, m2, a1, a2, N = p.m1, p.m2, p.a1, p.a2, p.dim
    kin = a2 / (2 * m1) * ku + a1 / (4 * m2) * kv
    wkin = a2 / m1 * ku + a1 / (2 * m2) * kv
    fmass = a2 * p.omega1 * l2u + 0.5 * a1 * p.omega2 * l2v
    dphi, dpsi = d_dr(phi, g), d_dr(psi, g)
    Gp = 4.0 * float(w @ (r * (a2 / (2 * m1) * np.conj(phi) * dphi + a1 / (2 * m2) * np.conj(psi) * dpsi)).imag)
    Gpp = (2 * a2 / m1**2 * ku + 2 * a1 / m2**2 * kv + 2 * a1 * a2 * N * (1 / m1 - 1 / m2) * T)
    cx = 1.0 / m1 - 2.0 / m2
    if cx != 0.0:
        Gpp += 2 * a1 * a2 * cx * float(w @ (r * d_dr(phi * phi, g) * np.conj(psi)).real)
    return {
        "mass": a2 * l2u + a1 * l2v,
        "energy": kin + a1 * a2 * T,
        "reS": kin + fmass + a1 * a2 * T,
        "reQ": wkin + 0.5 * N * a1 * a2 * T,
        "G": float(w @ (r**2 * (a2 * aphi + a1 * apsi))),
        "Gp": Gp,
        "Gpp": float(Gpp),
        "h1_phi": float(np.sqrt(l2u + ku)),
        "h1_psi": float(np.sqrt(l2v + kv)),
        "sup_phi": float(np.sqrt(aphi.max())),
        "sup_psi": float(np.sqrt(apsi.max())),
    }


def reference_diagnostics(pair: FieldPair, p: PhysParams, g: RadialGrid) -> dict:
    """The same scalars through the public functionals (slow; used to check diagnostics)."""
    gen, _ = virial_Gpp(pair, p, g)
    return {
        "mass": mass(pair, p),
        "energy": energy(pair, p),
        "reS": action_S(pair, p, conjugate_first=True),
        "reQ": constraint_Q(pair, p, conjugate_first=True),
        "G": virial_G(pair, p, g),
        "Gp": virial_Gp(pair, p, g),
        "Gpp": gen,
        "h1_phi": h1_norm(pair.first, g),
        "h1_psi": h1_norm(pair.second, g),
        "sup_phi": float(np.max(np.abs(pair.first))),
        "sup_psi": float(np.max(np.abs(pair.second))),
    }


def _finite(d: dict) -> bool:
    return all(math.isfinite(v) for v in d.values())


def evolve(initial: FieldPair, p: PhysParams, g: RadialGrid, cfg: EvolutionConfig,
           monitor: Callable[[float, FieldPair], None] | None = None) -> TrajectoryRecord:
    """Step until t_end, H^1 blow-up detection, dt collapse or a numerical fault.

    ``monitor(t, pair)`` is called on the initial state and after every step.
    """
    _check_pair(initial, g)
    pair = initial.astype(complex)
    rows = {k: [] for k in DIAGNOSTIC_COLUMNS}

    def record(t, d, dt):
        rows["t"].append(t)
        for k, v in d.items():
            rows[k].append(v)
        rows["dt"].append(dt)

    d0 = diagnostics(pair, p, g)
    if not _finite(d0):
        raise NumericalFault("initial data are not finite")
    record(0.0, d0, 0.0)
    snapshots = [(0.0, pair)]
    if monitor:
        monitor(0.0, pair)
    h1_0 = d0["h1_phi"] + d0["h1_psi"]
    limit = cfg.blowup_threshold * h1_0

    t, steps = 0.0, 0
    termination = None
    while termination is None:
        dt = min(adaptive_dt(pair, cfg, p, g), cfg.t_end - t)
        if cfg.adaptive and dt < DT_COLLAPSE and cfg.t_end - t > DT_COLLAPSE:
            termination = Termination("BlowUpDetected", t, "step size collapsed")
            break
        try:
            nxt = step_strang(pair, dt, p, g)
            d = diagnostics(nxt, p, g)
        except (NumericalFault, FloatingPointError) as exc:
            termination = Termination("NumericalFault", t, str(exc))
            break
        if not _finite(d):
            termination = Termination("NumericalFault", t + dt, "non-finite diagnostics")
            break
        t_new = cfg.t_end if cfg.t_end - (t + dt) <= 1e-12 * cfg.t_end else t + dt
        if t_new <= t:
            termination = Termination("NumericalFault", t, "time did not advance")
            break
        t, pair, steps = t_new, nxt, steps + 1
        record(t, d, dt)
        if monitor:
            monitor(t, pair)
        if steps % cfg.snapshot_stride == 0:
            snapshots.append((t, pair))
        if d["h1_phi"] + d["h1_psi"] > limit:
            termination = Termination("BlowUpDetected", t, f"H1 norm exceeded {cfg.blowup_threshold:g}x initial")
        elif t >= cfg.t_end:
            termination = Termination("Completed", t)
    if snapshots[-1][0] != t:
        snapshots.append((t, pair))
    diag = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    return TrajectoryRecord(diag, tuple(snapshots), termination, steps)


# ---------------------------------------------------------------- output

def write_trajectory_csv(record: TrajectoryRecord, path: str | Path) -> Path:
    path = Path(path)
    cols = [record.diagnostics[k] for k in DIAGNOSTIC_COLUMNS]
    with path.open("w") as fh:
        fh.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return path


def read_trajectory_csv(path: str | Path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {k: data[:, i] for i, k in enumerate(DIAGNOSTIC_COLUMNS)}


# ---------------------------------------------------------------- standing wave

@dataclass(frozen=True, eq=False)
class StandingWaveReport:
    max_modulus_deviation: float  # max over t of || |phi(t)| - xi ||_inf
    max_modulus_deviation_psi: float  # same for |psi(t)| - eta
    slope_phi: float  # fitted d/dt arg phi(t, 0)
    slope_psi: float
    record: TrajectoryRecord

    def to_dict(self) -> dict:
        return {
            "max_modulus_deviation": self.max_modulus_deviation,
            "max_modulus_deviation_psi": self.max_modulus_deviation_psi,
            "slope_phi": self.slope_phi,
            "slope_psi": self.slope_psi,
            "termination": self.record.termination.status,
        }


def standing_wave_run(xi: np.ndarray, eta: np.ndarray, p: PhysParams, g: RadialGrid,
                      cfg: EvolutionConfig) -> StandingWaveReport:
    """Evolve (xi, -eta) and measure how far the modulus moves and how fast the phase turns at r = 0."""
    dev = [0.0, 0.0]
    ph_phi, ph_psi = [], []

    def monitor(t, pair):
        dev[0] = max(dev[0], float(np.max(np.abs(np.abs(pair.first) - xi))))
        dev[1] = max(dev[1], float(np.max(np.abs(np.abs(pair.second) - eta))))
        ph_phi.append(np.angle(pair.first[0]))
        ph_psi.append(np.angle(pair.second[0]))

    rec = evolve(FieldPair(xi, -eta, g), p, g, cfg, monitor=monitor)
    t = rec.times
    s1 = float(np.polyfit(t, np.unwrap(ph_phi), 1)[0])
    s2 = float(np.polyfit(t, np.unwrap(ph_psi), 1)[0])
    return StandingWaveReport(dev[0], dev[1], s1, s2, rec)
