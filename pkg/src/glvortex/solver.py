"""Damped Newton solver for the coupled radial vortex system.

The discretized system interleaves the two components per node, so the exact
Jacobian is banded with two sub/super-diagonals and a banded LU solve costs
O(N).  Globalization is by backtracking on the residual sup-norm plus
continuation in the interaction coefficient B, warm-starting from the
decoupled system (B = 0), whose components are independent scalar
Ginzburg-Landau profiles.  Positivity is not enforced during iteration, only
verified at convergence: the continuum solution is strictly positive and
projections would break Newton's local theory.

All inputs are immutable; a solve owns its output arrays, so independent
solves can run concurrently.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from . import asymptotics
from .grid import RadialGrid, build_grid, radial_operator
from .model import CouplingParams, DegreePair, validate


class NoConvergence(RuntimeError):
    """Newton failed; carries the best iterate and the residual history."""

    def __init__(self, message, f_plus=None, f_minus=None, history=None,
                 B_value=None):
        super().__init__(message)
        self.f_plus = f_plus
        self.f_minus = f_minus
        self.history = history or []
        self.B_value = B_value


class SingularJacobian(RuntimeError):
    """The banded LU factorization of the Jacobian broke down."""


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-10           # sup-norm of the discrete residual
    max_newton_iters: int = 50
    damping: float = 0.5               # backtracking factor in (0, 1)
    continuation_steps: int = 8
    far_field: str = "robin"           # "robin" (tail-slope row) or "dirichlet"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping factor must lie in (0, 1)")
        if self.continuation_steps < 1:
            raise ValueError("continuation_steps must be >= 1")
        if self.far_field not in ("robin", "dirichlet"):
            raise ValueError(f"unknown far_field {self.far_field!r}")


@dataclass(frozen=True)
class SolveReport:
    iterations: tuple            # Newton iterations per continuation step
    final_residual: float
    tolerance: float
    converged: bool
    wall_time: float

    def as_dict(self):
        return {"iterations": list(self.iterations),
                "final_residual": self.final_residual,
                "tolerance": self.tolerance,
                "converged": self.converged,
                "wall_time": self.wall_time}


@dataclass(frozen=True)
class Profile:
    """A solved pair of radial profiles with its solve metadata.

    far_field records which far boundary row the discrete system used, so
    the residual can be re-evaluated consistently after a round trip.
    """

    grid: RadialGrid
    params: CouplingParams
    degrees: DegreePair
    f_plus: np.ndarray = field(repr=False)
    f_minus: np.ndarray = field(repr=False)
    report: SolveReport
    far_field: str = "robin"


class _DiscreteSystem:
    """Linear scaffolding of the coupled residual on a fixed grid.

    Holds the two single-component operators (radial Laplacian + n^2/r^2 +
    boundary rows) and the mask of rows where the nonlinear potential term is
    active (interior rows, the one-sided origin row when n = 0, and the
    ghost-eliminated far row under the Robin condition).
    """

    def __init__(self, grid: RadialGrid, params: CouplingParams,
                 degrees: DegreePair, far_field: str):
        self.grid = grid
        self.params = params
        self.degrees = degrees
        self.far_field = far_field
        tail = asymptotics.leading_coeffs(params, degrees)
        self.ops = []
        self.masks = []
        for n, t, a in ((degrees.n_plus, params.t_plus, tail.a_plus),
                        (degrees.n_minus, params.t_minus, tail.a_minus)):
            if far_field == "dirichlet" and abs(a) / grid.R_max ** 2 > 1e-6:
                warnings.warn(
                    "Dirichlet far field truncates a tail of size "
                    f"|a|/R_max^2 = {abs(a) / grid.R_max ** 2:.2e}; "
                    "enlarge R_max or use the robin condition", stacklevel=3)
            op = radial_operator(grid, n, bc_far=far_field, robin_a=a,
                                 dirichlet_value=t)
            mask = np.ones(grid.N + 1)
            if n != 0:
                mask[0] = 0.0
            if far_field == "dirichlet":
                mask[-1] = 0.0
            self.ops.append(op)
            self.masks.append(mask)

    def residual(self, f_plus, f_minus):
        p = self.params
        v_plus = (p.A_plus * (f_plus ** 2 - p.t_plus ** 2)
                  + p.B * (f_minus ** 2 - p.t_minus ** 2))
        v_minus = (p.A_minus * (f_minus ** 2 - p.t_minus ** 2)
                   + p.B * (f_plus ** 2 - p.t_plus ** 2))
        g_plus = (self.ops[0].apply(f_plus) - self.ops[0].rhs
                  + self.masks[0] * v_plus * f_plus)
        g_minus = (self.ops[1].apply(f_minus) - self.ops[1].rhs
                   + self.masks[1] * v_minus * f_minus)
        return g_plus, g_minus

    def jacobian_banded(self, f_plus, f_minus):
        """Exact Jacobian in scipy solve_banded layout for (l, u) = (2, 2)."""
        p = self.params
        n_total = 2 * (self.grid.N + 1)
        ab = np.zeros((5, n_total))
        diag_pot = (
            p.A_plus * (3.0 * f_plus ** 2 - p.t_plus ** 2)
            + p.B * (f_minus ** 2 - p.t_minus ** 2),
            p.A_minus * (3.0 * f_minus ** 2 - p.t_minus ** 2)
            + p.B * (f_plus ** 2 - p.t_plus ** 2),
        )
        cross = 2.0 * p.B * f_plus * f_minus
        for comp, offset in ((0, 0), (1, 1)):
            op = self.ops[comp]
            mask = self.masks[comp]
            cols = np.arange(self.grid.N + 1) * 2 + offset
            ab[2, cols] = op.diag + mask * diag_pot[comp]
            # sub/super within the component sit two scalar columns away
            ab[0, cols[1:]] = op.upper[:-1]
            ab[4, cols[:-1]] = op.lower[1:]
            # cross-component coupling is diagonal in the node index
            if offset == 0:
                ab[1, cols + 1] = mask * cross
            else:
                ab[3, cols - 1] = mask * cross
        return ab


def initial_guess(grid: RadialGrid, params: CouplingParams,
                  degrees: DegreePair):
    """Ansatz with the correct vanishing order at 0 and limit at infinity:
    f0(r) = t r^n / (r^2 + n^2/(A t^2))^(n/2) for n >= 1, constant t for n = 0."""
    r = grid.nodes
    out = []
    for n, t, A in ((degrees.n_plus, params.t_plus, params.A_plus),
                    (degrees.n_minus, params.t_minus, params.A_minus)):
        if n == 0:
            out.append(np.full_like(r, t))
        else:
            core = n * n / (A * t * t)
            out.append(t * r ** n / (r ** 2 + core) ** (n / 2.0))
    return tuple(out)


def residual(profile: Profile):
    """Discrete residual arrays (G_plus, G_minus) of a profile, boundary
    rows included, under the far-field convention the profile was solved
    with."""
    sys = _DiscreteSystem(profile.grid, profile.params, profile.degrees,
                          profile.far_field)
    return sys.residual(profile.f_plus, profile.f_minus)


def residual_norm(profile: Profile) -> float:
    g_plus, g_minus = residual(profile)
    return float(max(np.max(np.abs(g_plus)), np.max(np.abs(g_minus))))


def jacobian(profile: Profile):
    """Exact Jacobian of the discrete residual at the profile, as a banded
    matrix in solve_banded layout for (l, u) = (2, 2): the two components
    interleave per node, so each row couples its neighbors, itself, and the
    partner value at the same node."""
    sys = _DiscreteSystem(profile.grid, profile.params, profile.degrees,
                          profile.far_field)
    return sys.jacobian_banded(profile.f_plus, profile.f_minus)


def newton_solve(f_plus0, f_minus0, grid: RadialGrid, params: CouplingParams,
                 degrees: DegreePair,
                 options: SolveOptions = SolveOptions()) -> Profile:
    """Damped Newton iteration from the given starting arrays.

    Backtracks the step by the damping factor whenever the residual sup-norm
    fails to decrease; raises NoConvergence (with the best iterate and the
    residual history) after max_newton_iters or a stalled line search.
    """
    validate(params)
    t0 = time.perf_counter()
    sys = _DiscreteSystem(grid, params, degrees, options.far_field)
    f_plus = np.array(f_plus0, dtype=float)
    f_minus = np.array(f_minus0, dtype=float)
    iters, norm, history = _newton_loop(sys, f_plus, f_minus, options)
    report = SolveReport(iterations=(iters,), final_residual=norm,
                         tolerance=options.tolerance, converged=True,
                         wall_time=time.perf_counter() - t0)
    profile = Profile(grid=grid, params=params, degrees=degrees,
                      f_plus=f_plus, f_minus=f_minus, report=report,
                      far_field=options.far_field)
    _post_checks(profile)
    return profile


def _newton_loop(sys, f_plus, f_minus, options):
    """In-place Newton iteration; returns (iterations, norm, history)."""
    n_nodes = sys.grid.N + 1
    x = np.empty(2 * n_nodes)
    history = []

    def sup_norm(gp, gm):
        return float(max(np.max(np.abs(gp)), np.max(np.abs(gm))))

    g_plus, g_minus = sys.residual(f_plus, f_minus)
    norm = sup_norm(g_plus, g_minus)
    history.append(norm)
    for it in range(options.max_newton_iters):
        if norm <= options.tolerance:
            return it, norm, history
        ab = sys.jacobian_banded(f_plus, f_minus)
        x[0::2] = g_plus
        x[1::2] = g_minus
        try:
            step = solve_banded((2, 2), ab, -x)
        except (LinAlgError, ValueError) as exc:
            raise SingularJacobian(
                f"banded LU failed at iteration {it}: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian(f"non-finite Newton step at iteration {it}")
        alpha = 1.0
        while True:
            cand_plus = f_plus + alpha * step[0::2]
            cand_minus = f_minus + alpha * step[1::2]
            g_plus, g_minus = sys.residual(cand_plus, cand_minus)
            cand_norm = sup_norm(g_plus, g_minus)
            if cand_norm < norm or cand_norm <= options.tolerance:
                break
            alpha *= options.damping
            if alpha < 1e-8:
                raise NoConvergence(
                    f"line search stalled at residual {norm:.3e}",
                    f_plus=f_plus.copy(), f_minus=f_minus.copy(),
                    history=history)
        f_plus[:] = cand_plus
        f_minus[:] = cand_minus
        norm = cand_norm
        history.append(norm)
    if norm <= options.tolerance:
        return options.max_newton_iters, norm, history
    raise NoConvergence(
        f"no convergence after {options.max_newton_iters} iterations "
        f"(residual {norm:.3e}, tolerance {options.tolerance:.1e})",
        f_plus=f_plus.copy(), f_minus=f_minus.copy(), history=history)


def _post_checks(profile: Profile):
    """Positivity is verified after convergence rather than enforced."""
    low = min(float(np.min(profile.f_plus)), float(np.min(profile.f_minus)))
    if low < -1e-9:
        raise NoConvergence(
            f"converged iterate violates positivity (min value {low:.3e})",
            f_plus=profile.f_plus, f_minus=profile.f_minus)


def continuation_solve(params: CouplingParams, degrees: DegreePair,
                       grid: RadialGrid | None = None,
                       options: SolveOptions = SolveOptions(),
                       collect_path: bool = False):
    """Path-following solve: decoupled system first, then step B to the target.

    Each intermediate solve warm-starts the next; the endpoint agrees with a
    direct solve whenever the direct solve converges.  Failures propagate as
    NoConvergence tagged with the failing B value.  With collect_path=True the
    intermediate profiles are returned as well.
    """
    validate(params)
    t0 = time.perf_counter()
    if grid is None:
        grid = build_grid(80.0, 4000)
    f_plus, f_minus = initial_guess(grid, params, degrees)
    b_values = [0.0]
    if params.B != 0.0:
        steps = options.continuation_steps
        b_values += [params.B * k / steps for k in range(1, steps + 1)]
    path = []
    profile = None
    iterations = []
    for b in b_values:
        step_params = replace(params, B=b)
        try:
            profile = newton_solve(f_plus, f_minus, grid, step_params,
                                   degrees, options)
        except NoConvergence as exc:
            exc.B_value = b
            raise
        iterations.extend(profile.report.iterations)
        f_plus, f_minus = profile.f_plus, profile.f_minus
        if collect_path:
            path.append(profile)
    report = replace(profile.report, iterations=tuple(iterations),
                     wall_time=time.perf_counter() - t0)
    profile = replace(profile, report=report)
    if collect_path:
        path[-1] = profile
        return profile, path
    return profile


def uniqueness_probe(params: CouplingParams, degrees: DegreePair,
                     grid: RadialGrid, options: SolveOptions = SolveOptions(),
                     seed_count: int = 3, rng_seed: int = 0) -> float:
    """Solve from several distinct initializations and return the maximum
    pairwise sup-norm distance among the converged profiles.

    Seeds: the standard ansatz, a piecewise-linear ramp, then randomized
    positive perturbations of the ansatz (deterministic RNG).  Individual
    failures are tolerated as long as at least two seeds converge.
    """
    if seed_count < 2:
        raise ValueError("need at least two seeds")
    rng = np.random.default_rng(rng_seed)
    r = grid.nodes
    ansatz = initial_guess(grid, params, degrees)

    def ramp(n, t, A):
        if n == 0:
            return np.full_like(r, t)
        r_c = max(1.0, n / np.sqrt(A) / t)
        return t * np.minimum(r / r_c, 1.0)

    seeds = [ansatz,
             (ramp(degrees.n_plus, params.t_plus, params.A_plus),
              ramp(degrees.n_minus, params.t_minus, params.A_minus))]
    while len(seeds) < seed_count:
        bump_p = 1.0 + 0.2 * rng.random(r.shape)
        bump_m = 1.0 + 0.2 * rng.random(r.shape)
        seeds.append((ansatz[0] * bump_p, ansatz[1] * bump_m))

    solutions = []
    errors = []
    for fp0, fm0 in seeds[:seed_count]:
        try:
            solutions.append(newton_solve(fp0, fm0, grid, params, degrees,
                                          options))
        except (NoConvergence, SingularJacobian) as exc:
            errors.append(exc)
    if len(solutions) < 2:
        raise NoConvergence(
            f"uniqueness probe: only {len(solutions)} of {seed_count} seeds "
            f"converged ({[str(e) for e in errors]})")
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            d = max(
                float(np.max(np.abs(solutions[i].f_plus - solutions[j].f_plus))),
                float(np.max(np.abs(solutions[i].f_minus - solutions[j].f_minus))))
            worst = max(worst, d)
    return worst


# ---------------------------------------------------------------------------
# persistence


def profile_to_json(profile: Profile) -> str:
    """Serialize a profile; float arrays round-trip losslessly (repr floats)."""
    obj = {
        "params": profile.params.as_dict(),
        "degrees": profile.degrees.as_dict(),
        "grid": profile.grid.as_dict(),
        "far_field": profile.far_field,
        "f_plus": [float(v) for v in profile.f_plus],
        "f_minus": [float(v) for v in profile.f_minus],
        "report": profile.report.as_dict(),
    }
    return json.dumps(obj)


def profile_from_json(text: str) -> Profile:
    obj = json.loads(text)
    params = validate(CouplingParams(**obj["params"]))
    degrees = DegreePair(**obj["degrees"])
    g = obj["grid"]
    grid = build_grid(g["R_max"], g["N"], g["kind"], g.get("stretch"))
    rep = obj["report"]
    report = SolveReport(iterations=tuple(rep["iterations"]),
                         final_residual=rep["final_residual"],
                         tolerance=rep["tolerance"],
                         converged=rep["converged"],
                         wall_time=rep["wall_time"])
    f_plus = np.asarray(obj["f_plus"], dtype=float)
    f_minus = np.asarray(obj["f_minus"], dtype=float)
    if len(f_plus) != grid.N + 1 or len(f_minus) != grid.N + 1:
        raise ValueError("profile arrays do not match the grid")
    return Profile(grid=grid, params=params, degrees=degrees,
                   f_plus=f_plus, f_minus=f_minus, report=report,
                   far_field=obj.get("far_field", "robin"))
