"""Quantitative checks on solved profiles.

Every identity or inequality a converged pair must satisfy is evaluated here
at desk scale: the finite-ball energy, the scaling (Pohozaev-type) identity,
the quantization of the weighted potential integral by the winding numbers,
the pointwise amplitude bound f_+^2 + f_-^2 <= Lambda^2, positivity of the
second variation of the energy, and the monotonicity classification of the
two components.  Everything is a pure function of an immutable Profile.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, eig_banded

from .grid import quadrature, quadrature_upto
from .model import derived_bounds
from .solver import Profile


class EigenFailure(RuntimeError):
    """The banded symmetric eigensolver did not converge."""


# ---------------------------------------------------------------------------
# energies and integral identities


def _derivatives(profile: Profile):
    return (np.gradient(profile.f_plus, profile.grid.nodes, edge_order=2),
            np.gradient(profile.f_minus, profile.grid.nodes, edge_order=2))


def _potential_quartic(profile: Profile):
    """Integrand A_+ x^2 + 2B x y + A_- y^2 with x = f_+^2 - t_+^2 etc."""
    p = profile.params
    x = profile.f_plus ** 2 - p.t_plus ** 2
    y = profile.f_minus ** 2 - p.t_minus ** 2
    return p.A_plus * x * x + 2.0 * p.B * x * y + p.A_minus * y * y


def radial_energy(profile: Profile, R: float | None = None) -> float:
    """Finite-ball energy

        (1/2) int_0^R { |f'|^2 + (n^2/r^2) f^2 + (1/2) [quartic] } r dr

    summed over both components.  The centrifugal term is integrable at the
    origin because f vanishes like r^n there; the node at r = 0 carries zero
    quadrature weight, so its integrand value is immaterial and set by limit.
    """
    g = profile.grid
    if R is None:
        R = g.R_max
    if R > g.R_max + 1e-12:
        raise ValueError(f"R={R} beyond the grid")
    dfp, dfm = _derivatives(profile)
    r = g.nodes
    integrand = dfp ** 2 + dfm ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        cent = (profile.degrees.n_plus ** 2 * profile.f_plus ** 2
                + profile.degrees.n_minus ** 2 * profile.f_minus ** 2) / r ** 2
    cent[0] = 0.0  # zero weight at r = 0; finite limit anyway
    integrand = integrand + cent + 0.5 * _potential_quartic(profile)
    return 0.5 * quadrature_upto(g, integrand, R)


def quantization_rhs(profile: Profile) -> float:
    d, p = profile.degrees, profile.params
    return (d.n_plus ** 2 * p.t_plus ** 2 + d.n_minus ** 2 * p.t_minus ** 2)


@dataclass(frozen=True)
class QuantizationResult:
    lhs: float
    rhs: float
    relative_gap: float


def quantization_check(profile: Profile) -> QuantizationResult:
    """Weighted potential integral against its quantized value.

    For a finite-energy vortex pair the integral of the quartic form
    against r dr equals n_+^2 t_+^2 + n_-^2 t_-^2 exactly (the planar
    version carries an extra 2 pi).  The relative gap is |lhs - rhs|
    over max(rhs, 1) so the zero-degree case stays meaningful.
    """
    lhs = quadrature(profile.grid, _potential_quartic(profile))
    rhs = quantization_rhs(profile)
    gap = abs(lhs - rhs) / max(rhs, 1.0)
    return QuantizationResult(lhs=lhs, rhs=rhs, relative_gap=gap)


def _slope_at(profile: Profile, i: int):
    """Second-order derivative of both components at node i (one-sided at
    the ends)."""
    r, fp, fm = profile.grid.nodes, profile.f_plus, profile.f_minus
    out = []
    for f in (fp, fm):
        if i == 0:
            h = r[1] - r[0]
            out.append((-3 * f[0] + 4 * f[1] - f[2]) / (2 * h))
        elif i == len(r) - 1:
            h = r[-1] - r[-2]
            out.append((3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h))
        else:
            out.append((f[i + 1] - f[i - 1]) / (r[i + 1] - r[i - 1]))
    return out


def pohozaev_residual(profile: Profile, R: float | None = None) -> float:
    """Defect of the scaling identity on the ball of radius R:

        [R f_+'(R)]^2 + [R f_-'(R)]^2 + int_0^R [quartic] r dr
            - (n_+^2 t_+^2 + n_-^2 t_-^2).

    R snaps to the nearest grid node; the boundary derivative uses central
    differences at interior nodes and the one-sided second-order stencil at
    R_max.
    """
    g = profile.grid
    if R is None:
        R = g.R_max
    if R > g.R_max + 1e-12:
        raise ValueError(f"R={R} beyond the grid")
    i = int(np.argmin(np.abs(g.nodes - R)))
    R_node = float(g.nodes[i])
    if i == 0:
        raise ValueError("Pohozaev radius must be positive")
    dfp, dfm = _slope_at(profile, i)
    boundary = (R_node * dfp) ** 2 + (R_node * dfm) ** 2
    bulk = quadrature_upto(g, _potential_quartic(profile), R_node)
    return float(boundary + bulk - quantization_rhs(profile))


def amplitude_bound_check(profile: Profile) -> float:
    """Margin Lambda^2 - max_i (f_+^2 + f_-^2); nonnegative (within 1e-8)
    for converged profiles.  The bound constrains the sum of squares, not
    each component, so one component may overshoot its own modulus."""
    bounds = derived_bounds(profile.params)
    peak = float(np.max(profile.f_plus ** 2 + profile.f_minus ** 2))
    return bounds.Lambda_sq - peak


# ---------------------------------------------------------------------------
# second variation


def _hessian_dofs(profile: Profile):
    """Global indices of the retained unknowns, interleaved (+, -) per node.

    Components with nonzero winding lose the origin node (test functions
    vanish there); both components lose R_max (decaying perturbations)."""
    N = profile.grid.N
    gp = -np.ones(N + 1, dtype=int)
    gm = -np.ones(N + 1, dtype=int)
    idx = 0
    for i in range(N):
        if not (i == 0 and profile.degrees.n_plus != 0):
            gp[i] = idx
            idx += 1
        if not (i == 0 and profile.degrees.n_minus != 0):
            gm[i] = idx
            idx += 1
    return gp, gm, idx


def second_variation_matrix(profile: Profile):
    """Assemble the discrete quadratic form of the energy around the profile.

    Returns (K_band, masses): K_band is the symmetric banded storage (upper,
    two super-diagonals) of the form matrix in the r-weighted geometry, and
    masses the diagonal metric.  Off-diagonal entries are written once and
    mirrored, so the matrix equals its transpose exactly by construction.
    """
    g = profile.grid
    p = profile.params
    r = g.nodes
    h = g.spacings
    rm = 0.5 * (r[:-1] + r[1:])
    m = g.cell_masses
    gp, gm, ndof = _hessian_dofs(profile)

    band = np.zeros((3, ndof))  # rows: offset 2, offset 1, diagonal

    def add(i, j, val):
        if i < 0 or j < 0:
            return
        lo, hi = (i, j) if i <= j else (j, i)
        band[2 - (hi - lo), hi] += val

    w_cell = rm / h  # gradient stiffness per cell
    pot = (
        p.A_plus * (3.0 * profile.f_plus ** 2 - p.t_plus ** 2)
        + p.B * (profile.f_minus ** 2 - p.t_minus ** 2),
        p.A_minus * (3.0 * profile.f_minus ** 2 - p.t_minus ** 2)
        + p.B * (profile.f_plus ** 2 - p.t_plus ** 2),
    )
    cross = 2.0 * p.B * profile.f_plus * profile.f_minus
    N = g.N
    for comp, gg, n in ((0, gp, profile.degrees.n_plus),
                        (1, gm, profile.degrees.n_minus)):
        for i in range(N):
            add(gg[i], gg[i], w_cell[i])
            add(gg[i + 1] if i + 1 <= N else -1, gg[i + 1], w_cell[i])
            add(gg[i], gg[i + 1], -w_cell[i])
        for i in range(N):
            if gg[i] < 0:
                continue
            centrifugal = 0.0 if i == 0 else n * n / r[i] ** 2
            add(gg[i], gg[i], m[i] * (centrifugal + pot[comp][i]))
    for i in range(N):
        if gp[i] >= 0 and gm[i] >= 0:
            add(gp[i], gm[i], m[i] * cross[i])

    masses = np.zeros(ndof)
    for i in range(N):
        if gp[i] >= 0:
            masses[gp[i]] = m[i]
        if gm[i] >= 0:
            masses[gm[i]] = m[i]
    return band, masses


def second_variation_min_eig(profile: Profile) -> float:
    """Smallest eigenvalue of the second variation in the r-weighted inner
    product (generalized problem K u = lambda M u, solved in symmetric
    banded form by LAPACK bisection/inverse iteration)."""
    band, masses = second_variation_matrix(profile)
    scale = np.sqrt(masses)
    ndof = band.shape[1]
    sym = np.empty_like(band)
    sym[2] = band[2] / masses
    sym[1, 1:] = band[1, 1:] / (scale[1:] * scale[:-1])
    sym[0, 2:] = band[0, 2:] / (scale[2:] * scale[:-2])
    sym[1, 0] = 0.0
    sym[0, :2] = 0.0
    try:
        vals = eig_banded(sym, lower=False, eigvals_only=True,
                          select="i", select_range=(0, 0))
    except (LinAlgError, ValueError) as exc:
        raise EigenFailure(f"banded eigensolve failed: {exc}") from exc
    if vals.size != 1 or not np.isfinite(vals[0]):
        raise EigenFailure("eigensolver returned no finite eigenvalue")
    return float(vals[0])


# ---------------------------------------------------------------------------
# monotonicity


class MonotonicityLabel(str, Enum):
    BothNondecreasing = "BothNondecreasing"
    PlusUpMinusDown = "PlusUpMinusDown"
    NonMonotonePlus = "NonMonotonePlus"
    NonMonotoneMinus = "NonMonotoneMinus"
    Other = "Other"


@dataclass(frozen=True)
class Witness:
    component: str
    node: int
    slope: float


@dataclass(frozen=True)
class MonotonicityClass:
    label: MonotonicityLabel
    witness: Witness | None = None


def monotonicity_classify(profile: Profile,
                          slope_tol: float = 1e-6) -> MonotonicityClass:
    """Classify the slope pattern of the two components.

    Discrete slopes (central differences) below -slope_tol * t/R_max or above
    +slope_tol * t/R_max count as genuine; smaller wiggles are discretization
    noise.  A component that violates both one-sided tests is non-monotone
    and gets a witness at its most negative slope (the unexpected stretch for
    a profile rising from the core).
    """
    r = profile.grid.nodes
    states = {}
    witnesses = {}
    for comp, f, t in (("plus", profile.f_plus, profile.params.t_plus),
                       ("minus", profile.f_minus, profile.params.t_minus)):
        slopes = (f[2:] - f[:-2]) / (r[2:] - r[:-2])
        tol = slope_tol * t / profile.grid.R_max
        nondecreasing = bool(np.min(slopes) >= -tol)
        nonincreasing = bool(np.max(slopes) <= tol)
        if nondecreasing:
            states[comp] = "up"
        elif nonincreasing:
            states[comp] = "down"
        else:
            states[comp] = "non"
            i = int(np.argmin(slopes))
            witnesses[comp] = Witness(component=comp, node=i + 1,
                                      slope=float(slopes[i]))
    sp, sm = states["plus"], states["minus"]
    if sp == "up" and sm == "up":
        return MonotonicityClass(MonotonicityLabel.BothNondecreasing)
    if sp == "up" and sm == "down":
        return MonotonicityClass(MonotonicityLabel.PlusUpMinusDown)
    if sp == "non" and sm != "non":
        return MonotonicityClass(MonotonicityLabel.NonMonotonePlus,
                                 witnesses["plus"])
    if sm == "non" and sp != "non":
        return MonotonicityClass(MonotonicityLabel.NonMonotoneMinus,
                                 witnesses["minus"])
    witness = witnesses.get("plus") or witnesses.get("minus")
    return MonotonicityClass(MonotonicityLabel.Other, witness)


def near_origin_order(profile: Profile) -> tuple:
    """Fitted exponents of log f against log r over the first decade of
    nodes; should match the winding numbers for converged profiles."""
    r = profile.grid.nodes
    lo, hi = r[1], 10.0 * r[1]
    mask = (r >= lo) & (r <= hi)
    out = []
    for f in (profile.f_plus, profile.f_minus):
        sel = mask & (f > 1e-300)
        if int(sel.sum()) < 3:
            out.append(float("nan"))
            continue
        slope = np.polyfit(np.log(r[sel]), np.log(f[sel]), 1)[0]
        out.append(float(slope))
    return tuple(out)


# ---------------------------------------------------------------------------
# aggregate report


@dataclass(frozen=True)
class IdentityReport:
    quantization_lhs: float
    quantization_rhs: float
    quantization_gap: float
    pohozaev_at_R_max: float
    energy_value: float
    bound_margin: float
    hessian_min_eig: float


def identity_report(profile: Profile) -> IdentityReport:
    q = quantization_check(profile)
    return IdentityReport(
        quantization_lhs=q.lhs,
        quantization_rhs=q.rhs,
        quantization_gap=q.relative_gap,
        pohozaev_at_R_max=pohozaev_residual(profile),
        energy_value=radial_energy(profile),
        bound_margin=amplitude_bound_check(profile),
        hessian_min_eig=second_variation_min_eig(profile),
    )
