"""Far-field expansion of the vortex profiles and certified tail envelopes.

Each profile satisfies f = t + a/r^2 + b/r^4 + O(r^-6) with closed-form a and
b: they are the unique coefficients killing the r^-2 and r^-4 terms when the
two-term tail is substituted into the coupled system.  Around that expansion,
upper/lower comparison functions of the form

    w(r) = t + a/r^2 + b/r^4 + c R^6/r^6

become super/subsolutions for r >= R once the defect

    LHS(w) = sum_{k=1..9} M_{2k} (R/r)^{2k}

has a definite sign on r >= R.  The M coefficients are polynomials in the
inputs; with rational inputs the whole construction is carried out in exact
rational arithmetic (fractions.Fraction), so the vanishing of M_2 and M_4 and
the sign of the full series on (0, 1] (via Sturm root counting) are certified,
not sampled.  Float inputs are converted to their exact binary rationals
first, so the certificate is exact for the parameters as given.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np

from .model import CouplingParams, DegreePair, validate

if TYPE_CHECKING:  # pragma: no cover
    from .solver import Profile


class SelectionFailed(RuntimeError):
    """No (delta, R) pair within the search budget certified the envelope."""


class IllConditionedFit(ValueError):
    """Tail fit window is unusable (too narrow, too close in, or collinear)."""


# ---------------------------------------------------------------------------
# closed-form tail coefficients


@dataclass(frozen=True)
class TailExpansion:
    """Leading (a) and second (b) inverse-square tail coefficients."""

    a_plus: float
    a_minus: float
    b_plus: float = 0.0
    b_minus: float = 0.0


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x))


def _exact_params(params: CouplingParams):
    return (_frac(params.A_plus), _frac(params.A_minus), _frac(params.B),
            _frac(params.t_plus), _frac(params.t_minus))


def leading_coeffs_exact(params: CouplingParams, degrees: DegreePair):
    """a_plus, a_minus as exact rationals.

    (a_plus, a_minus) solve the 2x2 linear system that cancels the r^-2
    defect:  A_+ t_+ a_+ + B t_- a_- = -n_+^2 / 2  (and the mirrored row),
    giving a_pm = (B n_mp^2 - A_mp n_pm^2) / (2 (A_+ A_- - B^2) t_pm).
    """
    Ap, Am, B, tp, tm = _exact_params(params)
    np2 = Fraction(degrees.n_plus ** 2)
    nm2 = Fraction(degrees.n_minus ** 2)
    D = Ap * Am - B * B
    a_plus = (B * nm2 - Am * np2) / (2 * D * tp)
    a_minus = (B * np2 - Ap * nm2) / (2 * D * tm)
    return a_plus, a_minus


def second_coeffs_exact(params: CouplingParams, degrees: DegreePair):
    """b_plus, b_minus as exact rationals.

    (b_plus, b_minus) solve the same 2x2 system with right-hand sides
    q_pm = 2 a_pm / t_pm - (A_pm a_pm^2 + B a_mp^2)/2, which cancels the
    r^-4 defect once the r^-2 relation already holds.
    """
    Ap, Am, B, tp, tm = _exact_params(params)
    D = Ap * Am - B * B
    a_plus, a_minus = leading_coeffs_exact(params, degrees)
    q_plus = 2 * a_plus / tp - (Ap * a_plus ** 2 + B * a_minus ** 2) / 2
    q_minus = 2 * a_minus / tm - (Am * a_minus ** 2 + B * a_plus ** 2) / 2
    b_plus = (Am * q_plus - B * q_minus) / (D * tp)
    b_minus = (Ap * q_minus - B * q_plus) / (D * tm)
    return b_plus, b_minus


def leading_coeffs(params: CouplingParams, degrees: DegreePair) -> TailExpansion:
    """Closed-form leading tail coefficients a_pm (b fields left at zero)."""
    validate(params)
    a_plus, a_minus = leading_coeffs_exact(params, degrees)
    return TailExpansion(a_plus=float(a_plus), a_minus=float(a_minus))


def second_coeffs(params: CouplingParams, degrees: DegreePair) -> TailExpansion:
    """Closed-form tail coefficients with both orders filled."""
    validate(params)
    a_plus, a_minus = leading_coeffs_exact(params, degrees)
    b_plus, b_minus = second_coeffs_exact(params, degrees)
    return TailExpansion(a_plus=float(a_plus), a_minus=float(a_minus),
                         b_plus=float(b_plus), b_minus=float(b_minus))


# ---------------------------------------------------------------------------
# exact polynomial helpers (coefficient lists, ascending powers, Fractions)


def _poly_trim(p):
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1) if p and q else []
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, qj in enumerate(q):
            out[i + j] += pi * qj
    return out


def _poly_eval(p, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _poly_deriv(p):
    return [Fraction(k) * c for k, c in enumerate(p)][1:]


def _poly_rem(num, den):
    num = _poly_trim(list(num))
    den = _poly_trim(list(den))
    dn = len(den) - 1
    lead = den[-1]
    while num and len(num) - 1 >= dn:
        k = len(num) - 1 - dn
        factor = num[-1] / lead
        for i, c in enumerate(den):
            num[k + i] -= factor * c
        num.pop()
        _poly_trim(num)
    return num


def _sign_changes(chain, x: Fraction) -> int:
    signs = []
    for p in chain:
        v = _poly_eval(p, x)
        if v != 0:
            signs.append(1 if v > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _sturm_roots_open_unit(p) -> int:
    """Number of distinct real roots of p in the open interval (0, 1).

    Requires p(0) != 0 and p(1) != 0.
    """
    chain = [list(p), _poly_deriv(p)]
    while len(chain[-1]) > 0:
        rem = _poly_rem(chain[-2], chain[-1])
        if not rem:
            break
        chain.append([-c for c in rem])
    return _sign_changes(chain, Fraction(0)) - _sign_changes(chain, Fraction(1))


def _series_sign_definite(coeffs, required_sign: int) -> bool:
    """Exact check that sum_k coeffs[k-1] s^k keeps required_sign on (0, 1].

    A zero series counts as both nonnegative and nonpositive.  Otherwise the
    lowest nonzero coefficient, the value at s=1, and a Sturm root count on
    (0, 1) must all agree with required_sign (strict: no interior roots).
    """
    p = _poly_trim([Fraction(0)] + [Fraction(c) for c in coeffs])
    if not p:
        return True
    m = 0
    while p[m] == 0:
        m += 1
    q = p[m:]
    if (q[0] > 0) != (required_sign > 0):
        return False
    at_one = _poly_eval(q, Fraction(1))
    if at_one == 0 or (at_one > 0) != (required_sign > 0):
        return False
    if len(q) > 1 and _sturm_roots_open_unit(q) > 0:
        return False
    return True


# ---------------------------------------------------------------------------
# defect series of an envelope candidate


@dataclass(frozen=True)
class DefectSeries:
    """Coefficients M_2 .. M_18 of the defect sum_k M_2k (R/r)^(2k).

    Exact rationals in the (exactly rationalized) inputs.  Only even powers
    of R/r occur: the envelope is a polynomial in 1/r^2 and the equation
    preserves that parity.
    """

    component: str
    coefficients: tuple
    R: Fraction

    def coefficient(self, k: int) -> Fraction:
        """M_{2k} for k = 1..9."""
        return self.coefficients[k - 1]

    def as_strings(self) -> dict:
        return {f"M_{2 * (k + 1)}": str(c)
                for k, c in enumerate(self.coefficients)}

    def dominance_ok(self) -> bool:
        """The selection inequalities: M_6 dominates the higher terms."""
        m6 = abs(self.coefficient(3))
        if m6 == 0:
            return False
        small = [abs(self.coefficient(k)) for k in (4, 5, 7, 8)]
        mid = [abs(self.coefficient(6)), abs(self.coefficient(9))]
        return (all(20 * s <= m6 for s in small)
                and all(5 * s <= m6 for s in mid))

    def sign_definite(self, required_sign: int) -> bool:
        return _series_sign_definite(self.coefficients, required_sign)


def expand_defect_series(params: CouplingParams, degrees: DegreePair,
                         a: tuple, b: tuple, c: tuple, R) -> tuple:
    """Expand the equation defect of the envelope pair

        w_pm(r) = t_pm + a_pm/r^2 + b_pm/r^4 + c_pm R^6/r^6

    into (DefectSeries for plus, DefectSeries for minus).  All inputs are
    rationalized exactly; with a, b from the closed forms, M_2 = M_4 = 0
    identically.
    """
    Ap, Am, B, tp, tm = _exact_params(params)
    R = _frac(R)
    R6 = R ** 6
    w_plus = [tp, _frac(a[0]), _frac(b[0]), _frac(c[0]) * R6]
    w_minus = [tm, _frac(a[1]), _frac(b[1]), _frac(c[1]) * R6]

    out = []
    for comp, w_self, w_other, A, t_self, t_other, n in (
            ("plus", w_plus, w_minus, Ap, tp, tm, degrees.n_plus),
            ("minus", w_minus, w_plus, Am, tm, tp, degrees.n_minus)):
        C = [Fraction(0)] * 10
        n2 = Fraction(n * n)
        for k, p in enumerate(w_self):
            if k >= 1:
                C[k + 1] -= 4 * Fraction(k * k) * p   # -w'' - w'/r
            C[k + 1] += n2 * p                        # (n^2/r^2) w
        sq_self = _poly_mul(w_self, w_self)
        sq_self[0] -= t_self * t_self
        sq_other = _poly_mul(w_other, w_other)
        sq_other[0] -= t_other * t_other
        bracket = [A * u for u in sq_self]
        for k, v in enumerate(sq_other):
            bracket[k] += B * v
        for k, v in enumerate(_poly_mul(bracket, w_self)):
            C[k] += v
        coeffs = tuple(C[k] / R ** (2 * k) for k in range(1, 10))
        out.append(DefectSeries(component=comp, coefficients=coeffs, R=R))
    return tuple(out)


# ---------------------------------------------------------------------------
# envelope selection


_BRANCHES = ("upper_plus_lower_minus", "lower_plus_upper_minus",
             "upper_both", "lower_both")


@dataclass(frozen=True)
class EnvelopeSpec:
    """A certified choice of r^-6 envelope amplitudes.

    For B >= 0 the mixed family applies: c_tilde solves
        A_+ t_+ c~_+ + B t_- c~_- = 1,   B t_+ c~_+ + A_- t_- c~_- = -1,
    so c~_+ > 0 and c~_- < 0.  For B < 0 the hat family applies, with
    right-hand side (1, 1) and c^_pm > 0.  The four envelope amplitudes are
    +-delta times these; delta and R are the certified pair.
    """

    delta: float
    R: float
    family: str                      # "mixed" (B >= 0) or "hat" (B < 0)
    c_tilde_plus: float | None = None
    c_tilde_minus: float | None = None
    c_hat_plus: float | None = None
    c_hat_minus: float | None = None

    def envelope_c(self, component: str, side: str) -> float:
        """Signed r^-6 amplitude (to be scaled by R^6) for one envelope."""
        sgn = 1.0 if side == "upper" else -1.0
        if self.family == "mixed":
            base = self.c_tilde_plus if component == "plus" else self.c_tilde_minus
            # c_tilde_minus < 0: +delta*c_tilde_minus is already the lower side
            if component == "minus":
                sgn = -sgn
        else:
            base = self.c_hat_plus if component == "plus" else self.c_hat_minus
        return sgn * self.delta * base


def _envelope_bases(params: CouplingParams, family: str):
    """Exact base amplitudes (kappa_plus, kappa_minus) of the family;
    the signed envelope c's are +-delta*kappa with kappa > 0."""
    Ap, Am, B, tp, tm = _exact_params(params)
    D = Ap * Am - B * B
    if family == "mixed":
        return (Am + B) / (D * tp), (Ap + B) / (D * tm)
    return (Am - B) / (D * tp), (Ap - B) / (D * tm)


def _branch_requirements(branch: str):
    """Map a branch to (sign of c_plus, sign of c_minus, required defect
    signs for plus and minus) in units of +1 upper / -1 lower."""
    return {
        "upper_plus_lower_minus": (+1, -1, +1, -1),
        "lower_plus_upper_minus": (-1, +1, -1, +1),
        "upper_both": (+1, +1, +1, +1),
        "lower_both": (-1, -1, -1, -1),
    }[branch]


def _family_and_branches(params: CouplingParams, branch: str):
    if params.B >= 0:
        family = "mixed"
        branches = ("upper_plus_lower_minus", "lower_plus_upper_minus")
    else:
        family = "hat"
        branches = ("upper_both", "lower_both")
    if branch != "auto":
        if branch not in _BRANCHES:
            raise ValueError(f"unknown branch {branch!r}")
        if branch not in branches:
            raise ValueError(
                f"branch {branch!r} inconsistent with sign of B={params.B}")
        branches = (branch,)
    return family, branches


def verify_envelope_pair(params: CouplingParams, degrees: DegreePair,
                         delta, R, branch: str) -> bool:
    """Exact certification of one envelope pair at the given (delta, R):
    dominance of M_6 plus sign definiteness of the full defect series."""
    family = "mixed" if params.B >= 0 else "hat"
    kp, km = _envelope_bases(params, family)
    sp, sm, req_p, req_m = _branch_requirements(branch)
    delta = _frac(delta)
    a = leading_coeffs_exact(params, degrees)
    b = second_coeffs_exact(params, degrees)
    c = (sp * delta * kp, sm * delta * km)
    ser_p, ser_m = expand_defect_series(params, degrees, a, b, c, R)
    for ser, req in ((ser_p, req_p), (ser_m, req_m)):
        m6 = ser.coefficient(3)
        if m6 == 0 or (m6 > 0) != (req > 0):
            return False
        if not ser.dominance_ok():
            return False
        if not ser.sign_definite(req):
            return False
    return True


def select_envelope(params: CouplingParams, degrees: DegreePair,
                    branch: str = "auto",
                    r_candidates=(2, 4, 8, 16, 32, 64),
                    delta_candidates=tuple(Fraction(1, 2 ** k)
                                           for k in range(1, 11))) -> EnvelopeSpec:
    """Search dyadic delta and doubling R for a certified envelope.

    The theory guarantees some (delta, R) works for admissible parameters but
    gives no constructive values; the search (budget: the candidate grid)
    turns "sufficiently large" into a falsifiable procedure.  R is scanned
    outward and delta downward from 1/2, so the first hit has the fattest
    envelope at the smallest workable R.  With branch="auto" both pairs of
    the applicable family are certified with the same (delta, R), which is
    what the two-sided sandwich needs.
    """
    validate(params)
    family, branches = _family_and_branches(params, branch)
    kp, km = _envelope_bases(params, family)
    for R in r_candidates:
        for delta in delta_candidates:
            if all(verify_envelope_pair(params, degrees, delta, R, br)
                   for br in branches):
                kwargs = {}
                if family == "mixed":
                    kwargs = {"c_tilde_plus": float(kp),
                              "c_tilde_minus": float(-km)}
                else:
                    kwargs = {"c_hat_plus": float(kp), "c_hat_minus": float(km)}
                return EnvelopeSpec(delta=float(delta), R=float(R),
                                    family=family, **kwargs)
    raise SelectionFailed(
        f"no (delta, R) certified within the search budget for params={params}, "
        f"degrees={degrees}: either the budget is too small or a defect "
        "coefficient is inconsistent")


# ---------------------------------------------------------------------------
# envelope evaluation against a solved profile


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    worst_margin: float
    margin_plus: float
    margin_minus: float
    R: float
    nodes_checked: int


def _envelope_values(spec: EnvelopeSpec, params, degrees, r, component, side):
    tail = second_coeffs(params, degrees)
    t = params.t_plus if component == "plus" else params.t_minus
    a = tail.a_plus if component == "plus" else tail.a_minus
    b = tail.b_plus if component == "plus" else tail.b_minus
    c = spec.envelope_c(component, side)
    return t + a / r ** 2 + b / r ** 4 + c * spec.R ** 6 / r ** 6


def envelope_check(profile: "Profile", spec: EnvelopeSpec) -> EnvelopeCheck:
    """Check the two-sided sandwich w_lower <= f <= w_upper on nodes >= R.

    Failure is a reported outcome (passed=False with the offending margin),
    not an error.
    """
    r = profile.grid.nodes
    mask = r >= spec.R - 1e-12
    if not mask.any():
        raise ValueError(f"envelope radius R={spec.R} beyond the grid")
    rr = r[mask]
    margins = {}
    for comp, f in (("plus", profile.f_plus[mask]),
                    ("minus", profile.f_minus[mask])):
        upper = _envelope_values(spec, profile.params, profile.degrees, rr,
                                 comp, "upper")
        lower = _envelope_values(spec, profile.params, profile.degrees, rr,
                                 comp, "lower")
        margins[comp] = min(float(np.min(upper - f)), float(np.min(f - lower)))
    worst = min(margins.values())
    return EnvelopeCheck(passed=worst >= 0.0, worst_margin=worst,
                         margin_plus=margins["plus"],
                         margin_minus=margins["minus"],
                         R=spec.R, nodes_checked=int(mask.sum()))


# ---------------------------------------------------------------------------
# tail fitting of solved profiles


@dataclass(frozen=True)
class TailFit:
    """Least-squares tail coefficients of a solved profile with the
    max |residual| * r^6 over the window (an empirical C_1)."""

    a_plus: float
    a_minus: float
    b_plus: float
    b_minus: float
    c1_plus: float
    c1_minus: float
    window: tuple
    nodes_used: int


def tail_fit(profile: "Profile", fit_window: tuple | None = None) -> TailFit:
    """Fit (f - t) against {r^-2, r^-4} over the window by weighted least
    squares with weights proportional to r^6.

    The weighting equalizes the untracked O(r^-6) model error across the
    window (it would otherwise bias b from the inner edge); concretely the
    fit runs in the scaled variable (f - t) r^6 = a r^4 + b r^2, which also
    keeps the design matrix well conditioned over windows like [R/4, 3R/4].
    """
    r = profile.grid.nodes
    if fit_window is None:
        fit_window = (0.25 * profile.grid.R_max, 0.75 * profile.grid.R_max)
    r_lo, r_hi = fit_window
    if r_hi > profile.grid.R_max + 1e-12:
        raise IllConditionedFit(f"window end {r_hi} beyond R_max")
    mask = (r >= r_lo) & (r <= r_hi)
    n_used = int(mask.sum())
    if n_used < 20:
        raise IllConditionedFit(f"window [{r_lo}, {r_hi}] holds only "
                                f"{n_used} nodes (need >= 20)")
    rr = r[mask]
    out = {}
    for comp, f, t in (("plus", profile.f_plus[mask], profile.params.t_plus),
                       ("minus", profile.f_minus[mask], profile.params.t_minus)):
        y = f - t
        if np.max(np.abs(y)) > 0.1 * t:
            raise IllConditionedFit(
                f"window starts too close in: |f_{comp} - t| exceeds 0.1 t")
        design = np.column_stack([rr ** 4, rr ** 2])
        sol, _, rank, sv = np.linalg.lstsq(design, y * rr ** 6, rcond=None)
        if rank < 2 or sv[-1] <= 0 or sv[0] / sv[-1] > 1e12:
            raise IllConditionedFit("tail basis is numerically collinear")
        a, b = float(sol[0]), float(sol[1])
        resid = y - a / rr ** 2 - b / rr ** 4
        out[comp] = (a, b, float(np.max(np.abs(resid) * rr ** 6)))
    return TailFit(a_plus=out["plus"][0], a_minus=out["minus"][0],
                   b_plus=out["plus"][1], b_minus=out["minus"][1],
                   c1_plus=out["plus"][2], c1_minus=out["minus"][2],
                   window=(float(r_lo), float(r_hi)), nodes_used=n_used)


def derivative_tail_check(profile: "Profile",
                          fit_window: tuple | None = None) -> tuple:
    """Empirical constants (C2_plus, C2_minus) of the derivative tail bound:
    max over the window of |f' + 2a/r^3| * r^5 with a from the closed form."""
    r = profile.grid.nodes
    if fit_window is None:
        fit_window = (0.25 * profile.grid.R_max, 0.75 * profile.grid.R_max)
    mask = (r >= fit_window[0]) & (r <= fit_window[1])
    if int(mask.sum()) < 20:
        raise IllConditionedFit("derivative window holds fewer than 20 nodes")
    tail = leading_coeffs(profile.params, profile.degrees)
    out = []
    for f, a in ((profile.f_plus, tail.a_plus),
                 (profile.f_minus, tail.a_minus)):
        df = np.gradient(f, r, edge_order=2)
        dev = np.abs(df[mask] + 2.0 * a / r[mask] ** 3) * r[mask] ** 5
        out.append(float(np.max(dev)))
    return tuple(out)
