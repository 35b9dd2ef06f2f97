"""Initial-data families and snapshot files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataFileError, ValidationError
from .functionals import FieldPair, PhysParams, energy
from .groundstate import read_table
from .radial import RadialGrid, make_grid


def gaussian_pair(g: RadialGrid, amp_phi: float, amp_psi: float, width: float = 1.0,
                  chirp: float = 0.0) -> FieldPair:
    """(amp_phi, amp_psi) * exp(-r^2 / 2 w^2) * exp(i chirp r^2); zero at r_max."""
    if not width > 0:
        raise ValidationError(f"width must be positive, got {width}")
    f = np.exp(-0.5 * (g.r / width) ** 2)
    if chirp:
        f = f * np.exp(1j * chirp * g.r**2)
    f[-1] = 0.0
    return FieldPair(amp_phi * f, amp_psi * f, g)


def seeded_c1_pair(seed: int, p: PhysParams, g: RadialGrid) -> FieldPair:
    """Real Gaussian pair with psi < 0 and negative energy, parameters drawn from ``seed``.

    If a draw has E >= 0 the amplitudes are raised by 25% until E < 0, which
    always terminates since the cubic term dominates.
    """
    rng = np.random.default_rng(seed)
    width = rng.uniform(0.8, 1.4)
    amp = rng.uniform(5.0, 9.0)
    ratio = rng.uniform(0.8, 1.25)
    for _ in range(100):
        pair = gaussian_pair(g, amp, -ratio * amp, width)
        if energy(pair, p) < 0:
            return pair
        amp *= 1.25
    raise ValidationError("could not reach negative energy")


def random_smooth_pair(rng: np.random.Generator, g: RadialGrid, complex_valued: bool = False) -> FieldPair:
    """Sum of two Gaussians per component with psi negative near the origin."""
    r = g.r

    def bump():
        a = rng.uniform(0.5, 4.0, size=2)
        w = rng.uniform(0.6, 2.0, size=2)
        c = rng.uniform(0.0, 2.0)
        return a[0] * np.exp(-0.5 * (r / w[0]) ** 2) + c * a[1] * np.exp(-0.5 * (r / w[1]) ** 2) * r**2 / (1 + r**2)

    u, v = bump(), -bump()
    if complex_valued:
        u = u * np.exp(1j * rng.uniform(-0.3, 0.3) * r**2)
        v = v * np.exp(1j * rng.uniform(-0.3, 0.3) * r**2)
    u[-1] = v[-1] = 0.0
    return FieldPair(u, v, g)


# ---------------------------------------------------------------- files

_SNAP_COLUMNS = ("r", "phi_re", "phi_im", "psi_re", "psi_im", "t")


def save_snapshot(pair: FieldPair, t: float, path: str | Path, meta: dict | None = None) -> Path:
    """Write a field pair in the profile-table format with an added t column."""
    g = pair.grid
    path = Path(path)
    header_meta = {"grid": {"n_points": g.n_points, "r_max": g.r_max, "dim": g.dim}, "t": t}
    header_meta.update(meta or {})
    phi = np.asarray(pair.first, dtype=complex)
    psi = np.asarray(pair.second, dtype=complex)
    data = np.column_stack([g.r, phi.real, phi.imag, psi.real, psi.imag, np.full(g.n_points, float(t))])
    header = "twowave snapshot\nmeta " + json.dumps(header_meta, sort_keys=True) + "\n" + " ".join(_SNAP_COLUMNS)
    np.savetxt(path, data, fmt="%.17e", header=header, comments="# ")
    return path


def load_pair(path: str | Path) -> FieldPair:
    """Load a ground-state table, as (xi, -eta), or a snapshot table."""
    meta, cols = read_table(path)
    try:
        g = make_grid(**meta["grid"])
    except (KeyError, TypeError, ValidationError) as exc:
        raise DataFileError(f"{path}: bad grid metadata ({exc})") from exc
    if cols["r"].shape != g.r.shape or not np.allclose(cols["r"], g.r, rtol=0, atol=1e-12 * g.r_max):
        raise DataFileError(f"{path}: r column does not match the grid metadata")
    if {"xi", "eta"} <= cols.keys():
        return FieldPair(cols["xi"], -cols["eta"], g)
    if set(_SNAP_COLUMNS[1:5]) <= cols.keys():
        return FieldPair(cols["phi_re"] + 1j * cols["phi_im"], cols["psi_re"] + 1j * cols["psi_im"], g)
    raise DataFileError(f"{path}: neither ground-state nor snapshot columns")

