"""Ground states (xi, -eta) of the stationary two-wave system.

Two independent solvers:

* ``solve_variational``: projected descent of the action on the constraint
  manifold {Q = 0}, followed by a Newton polish of the discrete stationary
  equations.  The result is the stationary state of the same discrete
  operator the evolution uses.
* ``solve_shooting``: RK4 integration of the radial ODE from r = 0 with a
  Newton iteration on the two initial amplitudes, matched at an interior
  radius to the exponentially decaying tail.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad
from scipy.special import kve

from .errors import (
    DataFileError,
    MaxIterations,
    NewtonDiverged,
    NoProjection,
    NumericalFault,
    ProjectionLost,
    SolutionEscaped,
    TrivialSolution,
    UnsupportedDimension,
    UnsupportedRegime,
    ValidationError,
)
from .functionals import (
    FieldPair,
    PhysParams,
    action_S,
    constraint_Q,
    first_variation,
    frequency_mass,
    integrate,
    kinetic_parts,
    projection_beta,
    rescale,
    weighted_kinetic,
)
from .radial import RadialGrid, laplacian_radial, make_grid


@dataclass(frozen=True)
class FlowConfig:
    step0: float = 1e-2
    tol: float = 1e-9
    max_iter: int = 5000
    amplitude: float = 3.0
    polish: bool = True
    newton_tol: float = 1e-10
    newton_max_iter: int = 30

    def __post_init__(self):
        if not (self.step0 > 0 and self.tol > 0 and self.amplitude > 0 and self.newton_tol > 0):
            raise ValidationError("FlowConfig step0, tol, amplitude and newton_tol must be positive")
        if self.max_iter < 1 or self.newton_max_iter < 0:
            raise ValidationError("FlowConfig iteration limits must be positive")


@dataclass(frozen=True)
class CertificationReport:
    q_residual: float
    pohozaev_residual: float
    scaling_identity_residual: float
    ode_residual: float
    decay_rate_xi: float
    decay_rate_eta: float
    positive: bool = True
    monotone: bool = True
    degenerate: bool = False

    def max_residual(self) -> float:
        return max(abs(self.q_residual), abs(self.pohozaev_residual), abs(self.scaling_identity_residual))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ShootingMesh:
    """Fine RK4 mesh of a shooting solve: r, xi, xi', eta, eta' on [0, r_match]."""

    r: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray
    eta: np.ndarray
    deta: np.ndarray


@dataclass(frozen=True, eq=False)
class GroundState:
    xi: np.ndarray
    eta: np.ndarray
    params: PhysParams
    grid: RadialGrid
    action_M0: float
    report: CertificationReport | None = None
    method: str = "variational"
    history: tuple = ()
    shooting_mesh: ShootingMesh | None = field(default=None, repr=False)
    origin_values: tuple = ()

    @property
    def pair(self) -> FieldPair:
        """The solution pair (xi, -eta)."""
        return FieldPair(self.xi, -self.eta, self.grid)

    def with_report(self, report: CertificationReport) -> GroundState:
        return GroundState(self.xi, self.eta, self.params, self.grid, self.action_M0, report,
                           self.method, self.history, self.shooting_mesh, self.origin_values)


def _check_stationary_params(p: PhysParams) -> None:
    if not 4.0 < p.dim < 6.0:
        raise UnsupportedDimension(f"ground states need 4 < N < 6, got N = {p.dim}")
    if not p.frequency_resonant:
        raise UnsupportedRegime("ground states need omega2 = 2 omega1")


def _check_grid(p: PhysParams, g: RadialGrid) -> None:
    if g.dim != p.dim:
        raise ValidationError(f"grid dimension {g.dim} differs from params dimension {p.dim}")


# ---------------------------------------------------------------- residuals

def _stationary_residual(xi, eta, p: PhysParams, g: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Nodal residuals of the radial equations for xi and eta with the grid Laplacian."""
    res_xi = laplacian_radial(xi, g) - 2 * p.m1 * (p.omega1 * xi - p.a1 * xi * eta)
    res_eta = laplacian_radial(eta, g) - 2 * p.m2 * (p.omega2 * eta - p.a2 * xi**2)
    return res_xi[:-1], res_eta[:-1]


def _fd_weights(offsets, order=1) -> np.ndarray:
    """Finite-difference weights for the given integer offsets (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    V = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(V, rhs)


_C6 = _fd_weights(np.arange(-3, 4))


def _odd_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order derivative of samples of an odd function of r, y[0] at r = 0."""
    ext = np.concatenate([-y[3:0:-1], y])
    out = np.zeros_like(y)
    for c, k in zip(_C6, range(7)):
        out[: len(y) - 3] += c * ext[k: k + len(y) - 3]
    for j in range(len(y) - 3, len(y)):
        offs = np.arange(-6, 1) + (len(y) - 1 - j)
        offs = offs[offs + j <= len(y) - 1][-7:]
        w = _fd_weights(offs)
        out[j] = w @ y[j + offs.astype(int)]
    return out / h


def _mesh_residual(mesh: ShootingMesh, p: PhysParams) -> float:
    """Max ODE residual on the RK4 mesh: difference of the sampled xi'' with the ODE's right side."""
    r = mesh.r
    h = r[1] - r[0]
    N = p.dim
    with np.errstate(divide="ignore", invalid="ignore"):
        fx = 2 * p.m1 * (p.omega1 * mesh.xi - p.a1 * mesh.xi * mesh.eta) - (N - 1) / r * mesh.dxi
        fe = 2 * p.m2 * (p.omega2 * mesh.eta - p.a2 * mesh.xi**2) - (N - 1) / r * mesh.deta
    fx[0] = 2 * p.m1 * (p.omega1 * mesh.xi[0] - p.a1 * mesh.xi[0] * mesh.eta[0]) / N
    fe[0] = 2 * p.m2 * (p.omega2 * mesh.eta[0] - p.a2 * mesh.xi[0] ** 2) / N
    rx = _odd_derivative(mesh.dxi, h) - fx
    re = _odd_derivative(mesh.deta, h) - fe
    return float(max(np.abs(rx).max(), np.abs(re).max()))


def decay_fit(gs: GroundState, g: RadialGrid | None = None, window: tuple[float, float] | None = None):
    """Least-squares tail rates of xi and eta.

    The fitted quantity is minus the slope of log f(r) + ((N-1)/2) log r over
    the window, which removes the algebraic prefactor of the radial decay.
    """
    g = g or gs.grid
    if window is None:
        window = default_decay_window(g)
    return _fit_rates(g.r, (gs.xi, gs.eta), g.dim, window)


def default_decay_window(g: RadialGrid) -> tuple[float, float]:
    return 0.2 * g.r_max, 0.45 * g.r_max


def fit_decay_rate(r: np.ndarray, f: np.ndarray, dim: float, window: tuple[float, float]) -> float:
    return _fit_rates(r, (f,), dim, window)[0]


def _fit_rates(r, profiles, dim, window):
    ra, rb = window
    if not (0.0 < ra < rb < r[-1]):
        raise ValidationError(f"decay window {window} must lie inside (0, r_max)")
    sel = (r >= ra) & (r <= rb)
    if sel.sum() < 10:
        raise ValidationError("decay window contains fewer than 10 nodes")
    rates = []
    for f in profiles:
        vals = f[sel]
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise NumericalFault("profile is not positive on the decay window")
        y = np.log(vals) + 0.5 * (dim - 1.0) * np.log(r[sel])
        slope = np.polyfit(r[sel], y, 1)[0]
        rates.append(float(-slope))
    return tuple(rates)


def certify(gs: GroundState, g: RadialGrid | None = None,
            window: tuple[float, float] | None = None) -> CertificationReport:
    """Evaluate the identities a stationary state must satisfy.

    Q, the Pohozaev combination and the scaling identity are normalized by
    the weighted kinetic term.  The ODE residual is relative to max(xi): for
    profiles produced by a discrete solve it uses the grid operator, for
    shooting profiles the RK4 mesh of the integration.
    """
    g = g or gs.grid
    p = gs.params
    xi, eta = gs.xi, gs.eta
    pair = FieldPair(xi, -eta, g)
    K = weighted_kinetic(pair, p)
    scale = np.abs(xi).max()
    if K == 0.0 or scale == 0.0:
        return CertificationReport(0.0, 0.0, 0.0, 0.0, float("nan"), float("nan"),
                                   positive=False, monotone=True, degenerate=True)

    ku, kv = kinetic_parts(pair)
    q_res = constraint_Q(pair, p) / K
    poho = (
        p.a2 / p.m1 * ku
        + p.a1 / (2 * p.m2) * kv
        + 2 * p.a2 * p.omega1 * integrate(xi**2, g)
        + p.a1 * p.omega2 * integrate(eta**2, g)
        - 3 * p.a1 * p.a2 * integrate(eta * xi**2, g)
    ) / K
    scaling_id = ((p.dim - 6.0) / p.dim * 0.5 * K + frequency_mass(pair, p)) / K

    if gs.shooting_mesh is not None:
        ode = _mesh_residual(gs.shooting_mesh, p)
        r_match = gs.shooting_mesh.r[-1]
        tail = (g.r > r_match) & (g.r < g.r_max)
        if tail.any():
            # the continued tail drops only the xi*eta coupling of the xi equation
            ode = max(ode, float(np.abs(2 * p.m1 * p.a1 * xi[tail] * eta[tail]).max()))
    else:
        rx, re = _stationary_residual(xi, eta, p, g)
        ode = float(max(np.abs(rx).max(), np.abs(re).max()))

    try:
        rate_xi, rate_eta = decay_fit(gs, g, window)
    except (NumericalFault, ValidationError):
        rate_xi = rate_eta = float("nan")

    inner = slice(0, g.n_points - 1)
    positive = bool(np.all(xi[inner] > 0) and np.all(eta[inner] > 0))
    monotone = bool(np.all(np.diff(xi) <= 0) and np.all(np.diff(eta) <= 0))
    return CertificationReport(float(q_res), float(poho), float(scaling_id), float(ode / scale),
                               float(rate_xi), float(rate_eta), bool(positive), bool(monotone), False)


# ---------------------------------------------------------------- variational

class _Operators:
    """Sparse factorizations shared by descent and Newton (weights folded in)."""

    def __init__(self, p: PhysParams, g: RadialGrid):
        self.p, self.g = p, g
        m = g.n_points - 1
        self.m = m
        self.W = g.weights[:m]
        A = g.stiffness_interior
        Wd = sp.diags(self.W)
        self.A = A
        self.Pu = spla.splu((p.a2 * (A / p.m1 + 2 * p.omega1 * Wd)).tocsc())
        self.Pv = spla.splu((p.a1 * (A / (2 * p.m2) + p.omega2 * Wd)).tocsc())

    def direction(self, pair: FieldPair):
        gu, gv = first_variation(pair, self.p)
        du = np.zeros(self.g.n_points)
        dv = np.zeros(self.g.n_points)
        du[:-1] = self.Pu.solve(self.W * gu[:-1])
        dv[:-1] = self.Pv.solve(self.W * gv[:-1])
        return du, dv

    def newton_step(self, u, v):
        p, m, W = self.p, self.m, self.W
        gu, gv = first_variation(FieldPair(u, v, self.g), p)
        Wd = sp.diags(W)
        J11 = p.a2 / p.m1 * self.A + sp.diags(W * (2 * p.a2 * p.omega1 + 2 * p.a1 * p.a2 * v[:m]))
        J12 = sp.diags(W * 2 * p.a1 * p.a2 * u[:m])
        J22 = p.a1 / (2 * p.m2) * self.A + p.a1 * p.omega2 * Wd
        J = sp.bmat([[J11, J12], [J12, J22]], format="csc")
        d = spla.spsolve(J, np.concatenate([W * gu[:m], W * gv[:m]]))
        return d[:m], d[m:]


def _project(pair: FieldPair, p: PhysParams) -> tuple[FieldPair, float]:
    try:
        beta = projection_beta(pair, p)
    except NoProjection as exc:
        raise ProjectionLost(str(exc)) from exc
    out = rescale(pair, beta)
    out.first[-1] = 0.0
    out.second[-1] = 0.0
    return out, beta


def _newton_polish(ops: _Operators, u, v, cfg: FlowConfig):
    p = ops.p
    u, v = u.copy(), v.copy()
    res = np.inf
    for _ in range(cfg.newton_max_iter + 1):
        rx, re = _stationary_residual(u, -v, p, ops.g)
        res = max(np.abs(rx).max(), np.abs(re).max()) / np.abs(u).max()
        if res < cfg.newton_tol:
            return u, v, res
        du, dv = ops.newton_step(u, v)
        u[:-1] -= du
        v[:-1] -= dv
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            break
    raise NewtonDiverged(f"Newton polish did not reach {cfg.newton_tol:.1e} (residual {res:.3e})")


def solve_variational(p: PhysParams, g: RadialGrid, cfg: FlowConfig | None = None) -> GroundState:
    """Minimize the action on {Q = 0} from a Gaussian seed.

    Each step moves against the H^1-preconditioned first variation, then
    maps back to the manifold with the closed-form dilation; the step is
    halved until the action does not increase.  The iteration stops once
    the relative change of S falls below ``cfg.tol``.
    """
    cfg = cfg or FlowConfig()
    _check_stationary_params(p)
    _check_grid(p, g)
    if not p.coupled:
        raise ProjectionLost("the stationary problem needs a1 > 0 and a2 > 0")

    ops = _Operators(p, g)
    seed = cfg.amplitude * np.exp(-0.5 * g.r**2)
    seed[-1] = 0.0
    x, _ = _project(FieldPair(seed, -seed.copy(), g), p)
    S = action_S(x, p)
    history = [S]
    tau = cfg.step0
    converged = False
    for _ in range(cfg.max_iter):
        du, dv = ops.direction(x)
        for _halving in range(40):
            y, _ = _project(FieldPair(x.first - tau * du, x.second - tau * dv, g), p)
            S_new = action_S(y, p)
            if S_new <= S:
                break
            tau *= 0.5
        else:
            converged = True  # no descent direction left at round-off level
            break
        rel = abs(S - S_new) / abs(S_new)
        x, S = y, S_new
        history.append(S)
        tau = min(2.0 * tau, 1.0)
        if rel < cfg.tol:
            converged = True
            break
    if not converged:
        raise MaxIterations(f"descent did not reach tol {cfg.tol:.1e} in {cfg.max_iter} steps")

    u, v = x.first, x.second
    if cfg.polish:
        u, v, _ = _newton_polish(ops, u, v, cfg)
    if np.abs(u).max() < 1e-8 * cfg.amplitude:
        raise TrivialSolution("the flow collapsed to the zero solution")
    pair = FieldPair(u, v, g)
    gs = GroundState(u.copy(), -v, p, g, action_S(pair, p), method="variational",
                     history=tuple(history), origin_values=(float(u[0]), float(-v[0])))
    return gs.with_report(certify(gs, g))


# ---------------------------------------------------------------- shooting

def _tail_basis(kappa: float, nu: float, r: np.ndarray, r0: float):
    """d(r)/d(r0) and d'(r)/d(r0) for d = r^-nu K_nu(kappa r)."""
    ratio = (r / r0) ** (-nu) * kve(nu, kappa * r) / kve(nu, kappa * r0) * np.exp(-kappa * (r - r0))
    dratio = -kappa * (r / r0) ** (-nu) * kve(nu + 1, kappa * r) / kve(nu, kappa * r0) * np.exp(-kappa * (r - r0))
    return ratio, dratio


@dataclass(frozen=True)
class _Tail:
    """Decaying tail data at the matching radius."""

    r0: float
    nu: float
    k1: float
    k2: float
    ell1: float  # d1'/d1 at r0
    ell2: float
    J: float  # forcing integral of the eta tail by xi^2

    @classmethod
    def build(cls, p: PhysParams, r0: float) -> _Tail:
        nu = 0.5 * p.dim - 1.0
        k1 = np.sqrt(2 * p.m1 * p.omega1)
        k2 = np.sqrt(2 * p.m2 * p.omega2)
        ell1 = -k1 * kve(nu + 1, k1 * r0) / kve(nu, k1 * r0)
        ell2 = -k2 * kve(nu + 1, k2 * r0) / kve(nu, k2 * r0)
        N = p.dim

        def integrand(s):
            w, _ = _tail_basis(k1, nu, np.array([s]), r0)
            u, _ = _tail_basis(k2, nu, np.array([s]), r0)
            return float((s / r0) ** (N - 1) * u[0] * w[0] ** 2)

        J, _ = quad(integrand, r0, np.inf, limit=200)
        return cls(r0, nu, k1, k2, ell1, ell2, J)

    def mismatch(self, p: PhysParams, y: np.ndarray) -> np.ndarray:
        xi, dxi, eta, deta = y
        m1 = dxi - self.ell1 * xi
        m2 = deta - self.ell2 * eta - 2 * p.m2 * p.a2 * self.J * xi**2
        return np.array([m1, m2])

    def continue_tail(self, p: PhysParams, r: np.ndarray, xi0: float, eta0: float):
        """xi and eta on r >= r0 from the linearized tail equations."""
        N = p.dim
        w, _ = _tail_basis(self.k1, self.nu, r, self.r0)
        u, _ = _tail_basis(self.k2, self.nu, r, self.r0)
        xi = xi0 * w
        # eta = u(r) [eta0 - int_{r0}^r B(t) / (t/r0)^{N-1} u(t)^2 dt],
        # B(t) = int_t^inf (s/r0)^{N-1} u F ds,  F = -2 m2 a2 xi^2
        F = -2 * p.m2 * p.a2 * xi**2
        integrand = (r / self.r0) ** (N - 1) * u * F
        seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(r)
        far = _far_integral(self, p, r[-1], xi0)
        B = far + np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        with np.errstate(over="ignore", invalid="ignore"):
            h = B / ((r / self.r0) ** (N - 1) * u**2)
        h = np.where(np.isfinite(h), h, 0.0)
        inner = np.concatenate([[0.0], np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(r))])
        eta = u * (eta0 - inner)
        return xi, eta


def _far_integral(tail: _Tail, p: PhysParams, r_end: float, xi0: float) -> float:
    N = p.dim

    def integrand(s):
        w, _ = _tail_basis(tail.k1, tail.nu, np.array([s]), tail.r0)
        u, _ = _tail_basis(tail.k2, tail.nu, np.array([s]), tail.r0)
        return float((s / tail.r0) ** (N - 1) * u[0] * (-2 * p.m2 * p.a2 * xi0**2 * w[0] ** 2))

    val, _ = quad(integrand, r_end, np.inf, limit=200)
    return val


_SERIES_TERMS = 12


def _series_coefficients(p: PhysParams, p0, q0):
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    X = [p0]
    E = [q0]
    for k in range(1, _SERIES_TERMS):
        xe = sum(X[j] * E[k - 1 - j] for j in range(k))
        xx = sum(X[j] * X[k - 1 - j] for j in range(k))
        den = 2 * k * (2 * k + p.dim - 2)
        X.append(2 * p.m1 * (p.omega1 * X[k - 1] - p.a1 * xe) / den)
        E.append(2 * p.m2 * (p.omega2 * E[k - 1] - p.a2 * xx) / den)
    return X, E


def _series_radius(p: PhysParams, p0, q0) -> float:
    """Radius where the last retained series term drops to 1e-15 of the origin values."""
    X, E = _series_coefficients(p, p0, q0)
    K = _SERIES_TERMS - 1
    top = max(np.abs(X[0]).max(), np.abs(E[0]).max())
    last = max(np.abs(X[K]).max(), np.abs(E[K]).max(), 1e-300)
    return float((1e-15 * top / last) ** (1.0 / (2 * K)))


def _series(p: PhysParams, p0, q0, r: np.ndarray):
    """Regular power series at the origin: (xi, xi', eta, eta') at radii r, shape (4, len(r), batch).

    With xi = sum x_k r^{2k}, Delta r^{2k} = 2k(2k+N-2) r^{2k-2} gives the
    coefficients recursively from the Cauchy products of the nonlinear terms.
    """
    X, E = _series_coefficients(p, p0, q0)
    r = np.asarray(r, dtype=float)[:, None]
    out = np.zeros((4, r.shape[0], X[0].shape[0]))
    for k in range(_SERIES_TERMS):
        out[0] += X[k] * r ** (2 * k)
        out[2] += E[k] * r ** (2 * k)
        if k:
            out[1] += 2 * k * X[k] * r ** (2 * k - 1)
            out[3] += 2 * k * E[k] * r ** (2 * k - 1)
    return out


def _integrate(p: PhysParams, p0, q0, h: float, n_steps: int, escape: float, keep: bool = False):
    """Series start on the first mesh nodes, then RK4 for a batch of initial amplitudes.

    Returns the state at r = n_steps*h, shape (4, batch), the escape mask and,
    with ``keep``, the whole path (n_steps+1, 4, batch).
    """
    k0 = min(max(int(_series_radius(p, p0, q0) / h), 1), n_steps)
    start = _series(p, p0, q0, h * np.arange(k0 + 1))
    y = start[:, -1, :].copy()
    path = [start[:, k, :] for k in range(k0 + 1)] if keep else None
    escaped = np.zeros(y.shape[1], dtype=bool)
    c1, w1, b1 = 2 * p.m1, p.omega1, p.a1
    c2, w2, b2 = 2 * p.m2, p.omega2, p.a2
    nm1 = p.dim - 1.0

    def f(r, x0, x1, x2, x3):
        c = nm1 / r
        return (x1, c1 * x0 * (w1 - b1 * x2) - c * x1, x3, c2 * (w2 * x2 - b2 * x0 * x0) - c * x3)

    y0, y1, y2, y3 = y
    h2, h6 = 0.5 * h, h / 6.0
    for k in range(k0, n_steps):
        r = k * h
        a = f(r, y0, y1, y2, y3)
        b = f(r + h2, y0 + h2 * a[0], y1 + h2 * a[1], y2 + h2 * a[2], y3 + h2 * a[3])
        c = f(r + h2, y0 + h2 * b[0], y1 + h2 * b[1], y2 + h2 * b[2], y3 + h2 * b[3])
        d = f(r + h, y0 + h * c[0], y1 + h * c[1], y2 + h * c[2], y3 + h * c[3])
        y0 = y0 + h6 * (a[0] + 2 * (b[0] + c[0]) + d[0])
        y1 = y1 + h6 * (a[1] + 2 * (b[1] + c[1]) + d[1])
        y2 = y2 + h6 * (a[2] + 2 * (b[2] + c[2]) + d[2])
        y3 = y3 + h6 * (a[3] + 2 * (b[3] + c[3]) + d[3])
        with np.errstate(invalid="ignore"):
            bad = ~((np.abs(y0) <= escape) & (np.abs(y2) <= escape))
        if bad.any():
            escaped |= bad
            yy = np.clip(np.nan_to_num(np.array([y0, y1, y2, y3]), nan=escape, posinf=escape,
                                       neginf=-escape), -escape, escape)
            y0, y1, y2, y3 = (np.where(bad, yy[i], (y0, y1, y2, y3)[i]) for i in range(4))
        if keep:
            path.append(np.array([y0, y1, y2, y3]))
    y = np.array([y0, y1, y2, y3])
    if keep:
        return y, escaped, np.array(path)
    return y, escaped


def matching_radius(p: PhysParams, g: RadialGrid) -> float:
    """Interior matching radius: 0.6 r_max, capped where the growing mode amplifies round-off by e^15."""
    kmax = max(np.sqrt(2 * p.m1 * p.omega1), np.sqrt(2 * p.m2 * p.omega2))
    r_hat = min(0.6 * g.r_max, 15.0 / kmax)
    return np.floor(r_hat / g.dr) * g.dr


def solve_shooting(p: PhysParams, g: RadialGrid, guess: tuple[float, float],
                   max_iter: int = 60, tol: float = 1e-13, substeps: int = 8) -> GroundState:
    """Shoot from r = 0 with (xi, eta)(0) = guess and zero slopes.

    The mismatch at the matching radius is the deviation from the decaying
    tail (Bessel-K log-derivative for xi; for eta the same with the
    correction forced by the xi^2 source).  Newton with a central-difference
    Jacobian and up to 8 step halvings; the matching radius is approached by
    continuation from a short interval.  On (r_match, r_max] the profile is
    the continued tail.
    """
    _check_stationary_params(p)
    _check_grid(p, g)
    p0, q0 = (float(x) for x in guess)
    if not (p0 > 0 and q0 > 0):
        raise ValidationError(f"shooting guess must be positive, got {guess}")
    h = g.dr / substeps
    r_hat = matching_radius(p, g)
    escape = 1e3 * max(p0, q0)
    x = np.array([p0, q0])

    stages = [r for r in (1.0, 2.0, 3.0, 4.0) if r < r_hat] + [r_hat]
    for r_stage in stages:
        n_steps = int(round(r_stage / h))
        tail = _Tail.build(p, n_steps * h)
        x = _newton_shoot(p, tail, x, h, n_steps, escape, max_iter, tol)
        if np.max(np.abs(x)) < 1e-8 * max(p0, q0):
            raise TrivialSolution("shooting converged to the zero solution")

    n_steps = int(round(r_hat / h))
    tail = _Tail.build(p, n_steps * h)
    yend, esc, path = _integrate(p, np.array([x[0]]), np.array([x[1]]), h, n_steps, escape, keep=True)
    if esc[0]:
        raise SolutionEscaped("converged shot leaves the escape bound")
    path = path[:, :, 0]
    r_fine = h * np.arange(n_steps + 1)
    mesh = ShootingMesh(r_fine, path[:, 0], path[:, 1], path[:, 2], path[:, 3])

    xi = np.empty(g.n_points)
    eta = np.empty(g.n_points)
    n_in = n_steps // substeps
    xi[: n_in + 1] = path[::substeps, 0]
    eta[: n_in + 1] = path[::substeps, 2]
    r_tail = g.r[n_in:]
    xt, et = tail.continue_tail(p, r_tail, path[-1, 0], path[-1, 2])
    xi[n_in:] = xt
    eta[n_in:] = et
    xi[-1] = eta[-1] = 0.0

    pair = FieldPair(xi, -eta, g)
    gs = GroundState(xi, eta, p, g, action_S(pair, p), method="shooting",
                     shooting_mesh=mesh, origin_values=(float(x[0]), float(x[1])))
    return gs.with_report(certify(gs, g))


def _newton_shoot(p, tail, x, h, n_steps, escape, max_iter, tol):
    def shoot(pts):
        y, esc = _integrate(p, pts[:, 0], pts[:, 1], h, n_steps, escape)
        out = np.array([tail.mismatch(p, y[:, k]) for k in range(pts.shape[0])])
        return out, esc

    def scaled(mis, pts):
        return mis / np.maximum(np.abs(pts), 1e-300).max(axis=1, keepdims=True)

    M, esc = shoot(x[None, :])
    if esc[0]:
        raise SolutionEscaped(f"initial shot from {tuple(x)} exceeds the escape bound")
    norm = np.linalg.norm(scaled(M, x[None, :]))
    for _ in range(max_iter):
        eps = 1e-6 * np.maximum(np.abs(x), 1e-8)
        pts = np.array([x, x + [eps[0], 0.0], x - [eps[0], 0.0], x + [0.0, eps[1]], x - [0.0, eps[1]]])
        Ms, esc = shoot(pts)
        if esc.any():
            raise SolutionEscaped("finite-difference shot exceeds the escape bound")
        # central differences: the growing modes make one-sided quotients too inaccurate
        Jac = np.column_stack([(Ms[1] - Ms[2]) / (2 * eps[0]), (Ms[3] - Ms[4]) / (2 * eps[1])])
        try:
            dx = -np.linalg.solve(Jac, Ms[0])
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged("singular shooting Jacobian") from exc
        step = 1.0
        for _halving in range(9):
            trial = x + step * dx
            Mt, esc = shoot(trial[None, :])
            nt = np.linalg.norm(scaled(Mt, trial[None, :]))
            if not esc[0] and nt < norm:
                break
            step *= 0.5
        else:
            if np.linalg.norm(dx) <= 1e3 * tol * np.linalg.norm(x):
                return x
            raise NewtonDiverged("damped shooting step failed to reduce the mismatch")
        x, norm = trial, nt
        if np.linalg.norm(step * dx) <= tol * max(np.linalg.norm(x), 1e-300):
            return x
    raise NewtonDiverged(f"shooting Newton did not converge in {max_iter} iterations")


# ---------------------------------------------------------------- persistence

_COLUMNS = ("r", "xi", "eta")


def save_ground_state(gs: GroundState, path: str | Path, extra_columns: dict | None = None,
                      extra_meta: dict | None = None) -> Path:
    """Write the profile table.  Header lines start with '#'; metadata is one JSON line."""
    path = Path(path)
    meta = {
        "params": asdict(gs.params),
        "grid": {"n_points": gs.grid.n_points, "r_max": gs.grid.r_max, "dim": gs.grid.dim},
        "action_M0": gs.action_M0,
        "method": gs.method,
        "report": gs.report.to_dict() if gs.report else None,
    }
    if extra_meta:
        meta.update(extra_meta)
    cols = {"r": gs.grid.r, "xi": gs.xi, "eta": gs.eta}
    if extra_columns:
        cols.update(extra_columns)
    names = list(cols)
    data = np.column_stack([np.broadcast_to(np.asarray(cols[k], dtype=float), gs.grid.r.shape) for k in names])
    header = "twowave ground state\nmeta " + json.dumps(meta, sort_keys=True) + "\n" + " ".join(names)
    np.savetxt(path, data, fmt="%.17e", header=header, comments="# ")
    return path


def read_table(path: str | Path) -> tuple[dict, dict]:
    """Parse a profile table into (metadata, columns)."""
    path = Path(path)
    meta, names = None, None
    try:
        with path.open() as fh:
            header = []
            for line in fh:
                if not line.startswith("#"):
                    break
                header.append(line[1:].strip())
        for line in header:
            if line.startswith("meta "):
                meta = json.loads(line[5:])
        if header:
            names = header[-1].split()
        if meta is None or not names:
            raise DataFileError(f"{path} is not a profile table")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from exc
    if data.shape[1] != len(names):
        raise DataFileError(f"{path}: {data.shape[1]} columns, header names {len(names)}")
    if not np.all(np.isfinite(data)):
        raise DataFileError(f"{path}: non-finite entries")
    return meta, {k: data[:, i] for i, k in enumerate(names)}


def load_ground_state(path: str | Path) -> GroundState:
    meta, cols = read_table(path)
    for k in _COLUMNS:
        if k not in cols:
            raise DataFileError(f"{path}: missing column {k}")
    try:
        p = PhysParams(**meta["params"])
        g = make_grid(**meta["grid"])
        action = float(meta["action_M0"])
        report = CertificationReport(**meta["report"]) if meta.get("report") else None
    except (KeyError, TypeError, ValidationError) as exc:
        raise DataFileError(f"{path}: bad metadata ({exc})") from exc
    if cols["r"].shape != g.r.shape or not np.allclose(cols["r"], g.r, rtol=0, atol=1e-12 * g.r_max):
        raise DataFileError(f"{path}: r column does not match the grid metadata")
    return GroundState(cols["xi"], cols["eta"], p, g, action, report, meta.get("method", "variational"))
