"""Command-line front end: solves, sweeps, verification, tail reports, CSV export.

Structured results go to stdout as JSON (one object per check for `verify`);
plot data goes to CSV.  Exit codes: 0 success, 1 configuration/parse error,
2 solver non-convergence, 3 verification failure.  Errors are emitted as a
JSON object on stderr.  Configs are strict JSON: unknown keys are rejected so
typos cannot silently change a scientific run.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from . import asymptotics, diagnostics, model, solver
from .grid import build_grid


class ConfigError(ValueError):
    pass


_DEFAULT_GRID = {"R_max": 80.0, "N": 4000, "kind": "uniform", "stretch": None}
_DEFAULT_SOLVE = {"tolerance": 1e-10, "max_newton_iters": 50, "damping": 0.5,
                  "continuation_steps": 8, "far_field": "robin"}
_DEFAULT_VERIFY = {"quantization_tol": 0.01, "pohozaev_tol": 0.01,
                   "origin_order_tol": 0.05, "bound_tol": 1e-8,
                   "hessian_tol": 1e-8, "tail_a_rel": 0.01, "tail_b_rel": 0.05}


def _require_keys(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def load_config(path: str | None, args=None) -> dict:
    """Read and validate a run configuration, applying flag overrides."""
    if path is None:
        raise ConfigError("--config is required for this command")
    with open(path) as fh:
        raw = json.load(fh)
    _require_keys(raw, {"version", "params", "bec_params", "degrees", "grid",
                        "solve", "sweep", "fit_window", "verify"}, "config")
    if raw.get("version") != 1:
        raise ConfigError(f"unsupported config version {raw.get('version')!r}")
    if ("params" in raw) == ("bec_params" in raw):
        raise ConfigError("exactly one of params / bec_params must be present")

    cfg = {}
    if "params" in raw:
        cfg["params"] = model.coupling_from_json(raw["params"])
        cfg["epsilon"] = None
    else:
        cfg["params"], cfg["epsilon"] = model.bec_to_gl(
            model.bec_from_json(raw["bec_params"]))

    deg = raw.get("degrees", {})
    _require_keys(deg, {"n_plus", "n_minus"}, "degrees")
    if "n_plus" not in deg or "n_minus" not in deg:
        raise ConfigError("degrees must carry n_plus and n_minus")
    cfg["degrees"], cfg["conjugation"] = model.normalize_degrees(
        int(deg["n_plus"]), int(deg["n_minus"]))

    gdict = dict(_DEFAULT_GRID)
    _require_keys(raw.get("grid", {}), set(_DEFAULT_GRID), "grid")
    gdict.update(raw.get("grid", {}))
    sdict = dict(_DEFAULT_SOLVE)
    _require_keys(raw.get("solve", {}), set(_DEFAULT_SOLVE), "solve")
    sdict.update(raw.get("solve", {}))
    vdict = dict(_DEFAULT_VERIFY)
    _require_keys(raw.get("verify", {}), set(_DEFAULT_VERIFY), "verify")
    vdict.update(raw.get("verify", {}))

    if args is not None:
        if getattr(args, "grid_n", None) is not None:
            gdict["N"] = args.grid_n
        if getattr(args, "r_max", None) is not None:
            gdict["R_max"] = args.r_max
        if getattr(args, "tol", None) is not None:
            sdict["tolerance"] = args.tol
        if getattr(args, "far_field", None) is not None:
            sdict["far_field"] = args.far_field

    cfg["grid"] = build_grid(gdict["R_max"], int(gdict["N"]), gdict["kind"],
                             gdict.get("stretch"))
    cfg["options"] = solver.SolveOptions(**sdict)
    cfg["verify"] = vdict
    cfg["fit_window"] = raw.get("fit_window")
    if "sweep" in raw:
        sw = raw["sweep"]
        _require_keys(sw, {"b_start", "b_stop", "b_step"}, "sweep")
        cfg["sweep"] = (float(sw["b_start"]), float(sw["b_stop"]),
                        float(sw["b_step"]))
    return cfg


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit_error(exc: BaseException):
    sys.stderr.write(json.dumps({"error": type(exc).__name__,
                                 "message": str(exc)}) + "\n")


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config, args)
    except (ConfigError, OSError, ValueError, model.HypothesisViolation,
            model.NonPositiveDensity, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 1
    try:
        profile = solver.continuation_solve(cfg["params"], cfg["degrees"],
                                            cfg["grid"], cfg["options"])
    except solver.NoConvergence as exc:
        _emit_error(exc)
        return 2
    except solver.SingularJacobian as exc:
        _emit_error(exc)
        return 2
    out = args.out or "profile.json"
    with open(out, "w") as fh:
        fh.write(solver.profile_to_json(profile))
    q = diagnostics.quantization_check(profile)
    summary = {
        "out": out,
        "converged": profile.report.converged,
        "residual_norm": profile.report.final_residual,
        "iterations": list(profile.report.iterations),
        "wall_time": profile.report.wall_time,
        "quantization": {"lhs": q.lhs, "rhs": q.rhs,
                         "relative_gap": q.relative_gap},
        "monotonicity": diagnostics.monotonicity_classify(profile).label.value,
        "bound_margin": diagnostics.amplitude_bound_check(profile),
    }
    print(json.dumps(summary))
    return 0


# ---------------------------------------------------------------------------
# sweep


def _sweep_b_values(b_start: float, b_stop: float, b_step: float):
    if b_step <= 0:
        raise ConfigError("b_step must be positive")
    n = int(round((b_stop - b_start) / b_step))
    vals = [b_start + k * b_step for k in range(n + 1)]
    return [round(v, 12) for v in vals if v <= b_stop + 1e-12]


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config, args)
        if "sweep" not in cfg:
            raise ConfigError("sweep command needs a sweep section")
    except (ConfigError, OSError, ValueError, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 1
    base = cfg["params"]
    b_values = _sweep_b_values(*cfg["sweep"])
    for b in b_values:
        if not b * b < base.A_plus * base.A_minus:
            _emit_error(ConfigError(f"sweep value B={b} violates "
                                    "B^2 < A_plus*A_minus"))
            return 1

    # warm-start chains: away from the decoupled system in both directions
    records = {}
    for chain in ([b for b in b_values if b >= 0.0],
                  [b for b in b_values if b < 0.0]):
        start = None
        for b in sorted(chain, key=abs):
            params = model.CouplingParams(base.A_plus, base.A_minus, b,
                                          base.t_plus, base.t_minus)
            tail = asymptotics.leading_coeffs(params, cfg["degrees"])
            try:
                if start is None:
                    prof = solver.continuation_solve(params, cfg["degrees"],
                                                     cfg["grid"], cfg["options"])
                else:
                    prof = solver.newton_solve(start[0], start[1], cfg["grid"],
                                               params, cfg["degrees"],
                                               cfg["options"])
                start = (prof.f_plus, prof.f_minus)
                records[b] = {
                    "B": b,
                    "converged": True,
                    "class": diagnostics.monotonicity_classify(prof).label.value,
                    "a_plus": tail.a_plus,
                    "a_minus": tail.a_minus,
                    "quantization_gap":
                        diagnostics.quantization_check(prof).relative_gap,
                    "hessian_min_eig":
                        diagnostics.second_variation_min_eig(prof),
                }
            except (solver.NoConvergence, solver.SingularJacobian,
                    diagnostics.EigenFailure) as exc:
                start = None
                records[b] = {"B": b, "converged": False,
                              "class": None, "a_plus": tail.a_plus,
                              "a_minus": tail.a_minus,
                              "quantization_gap": None,
                              "hessian_min_eig": None,
                              "error": str(exc)}
    ordered = [records[b] for b in b_values]
    nondecr = [r["B"] for r in ordered
               if r["converged"] and r["class"] == "BothNondecreasing"]
    result = {"records": ordered,
              "empirical_B0": max(nondecr) if nondecr else None}
    text = json.dumps(result)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        csv_path = args.out.rsplit(".", 1)[0] + ".csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["B", "converged", "class", "a_plus", "a_minus",
                             "quantization_gap", "hessian_min_eig"])
            for rec in ordered:
                writer.writerow([
                    _fmt(rec["B"]), rec["converged"], rec["class"] or "",
                    _fmt(rec["a_plus"]), _fmt(rec["a_minus"]),
                    "" if rec["quantization_gap"] is None
                    else _fmt(rec["quantization_gap"]),
                    "" if rec["hessian_min_eig"] is None
                    else _fmt(rec["hessian_min_eig"])])
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_checks(profile: solver.Profile, vcfg: dict, fit_window=None):
    checks = []

    def check(name, value, target, tolerance, passed):
        checks.append({"check": name, "value": value, "target": target,
                       "tolerance": tolerance, "pass": bool(passed)})

    resnorm = solver.residual_norm(profile)
    check("residual_norm", resnorm, 0.0, profile.report.tolerance,
          resnorm <= profile.report.tolerance)

    low = min(float(np.min(profile.f_plus)), float(np.min(profile.f_minus)))
    check("positivity_min", low, 0.0, 1e-9, low >= -1e-9)

    margin = diagnostics.amplitude_bound_check(profile)
    check("amplitude_bound_margin", margin, 0.0, vcfg["bound_tol"],
          margin >= -vcfg["bound_tol"])

    q = diagnostics.quantization_check(profile)
    check("quantization_gap", q.relative_gap, 0.0, vcfg["quantization_tol"],
          q.relative_gap <= vcfg["quantization_tol"])

    poh = diagnostics.pohozaev_residual(profile)
    poh_rel = abs(poh) / max(q.rhs, 1.0)
    check("pohozaev_at_R_max", poh_rel, 0.0, vcfg["pohozaev_tol"],
          poh_rel <= vcfg["pohozaev_tol"])

    orders = diagnostics.near_origin_order(profile)
    for comp, got, n in (("plus", orders[0], profile.degrees.n_plus),
                         ("minus", orders[1], profile.degrees.n_minus)):
        dev = abs(got - n)
        check(f"near_origin_order_{comp}", got, float(n),
              vcfg["origin_order_tol"], dev <= vcfg["origin_order_tol"])

    eig = diagnostics.second_variation_min_eig(profile)
    check("hessian_min_eig", eig, 0.0, vcfg["hessian_tol"],
          eig >= -vcfg["hessian_tol"])

    tail = asymptotics.second_coeffs(profile.params, profile.degrees)
    try:
        fit = asymptotics.tail_fit(profile, fit_window)
        for comp, got, want, rel, floor in (
                ("a_plus", fit.a_plus, tail.a_plus, vcfg["tail_a_rel"],
                 1e-4 * profile.params.t_plus),
                ("a_minus", fit.a_minus, tail.a_minus, vcfg["tail_a_rel"],
                 1e-4 * profile.params.t_minus),
                ("b_plus", fit.b_plus, tail.b_plus, vcfg["tail_b_rel"],
                 1e-2 * profile.params.t_plus),
                ("b_minus", fit.b_minus, tail.b_minus, vcfg["tail_b_rel"],
                 1e-2 * profile.params.t_minus)):
            tol = max(rel * abs(want), floor)
            check(f"tail_{comp}", got, want, tol, abs(got - want) <= tol)
    except asymptotics.IllConditionedFit as exc:
        check("tail_fit", str(exc), None, None, False)

    try:
        spec = asymptotics.select_envelope(profile.params, profile.degrees)
        env = asymptotics.envelope_check(profile, spec)
        check("envelope_sandwich", env.worst_margin, 0.0, 0.0, env.passed)
    except (asymptotics.SelectionFailed, ValueError) as exc:
        # no certified radius, or the grid is too short to host one
        check("envelope_sandwich", str(exc), None, None, False)
    return checks


def _load_verify_config(path: str):
    """Tolerance overrides for verify: a full run config or just the
    verify/fit_window sections."""
    with open(path) as fh:
        raw = json.load(fh)
    _require_keys(raw, {"version", "params", "bec_params", "degrees", "grid",
                        "solve", "sweep", "fit_window", "verify"}, "config")
    if raw.get("version") != 1:
        raise ConfigError(f"unsupported config version {raw.get('version')!r}")
    vdict = dict(_DEFAULT_VERIFY)
    _require_keys(raw.get("verify", {}), set(_DEFAULT_VERIFY), "verify")
    vdict.update(raw.get("verify", {}))
    window = raw.get("fit_window")
    return vdict, tuple(window) if window else None


def cmd_verify(args) -> int:
    vcfg = dict(_DEFAULT_VERIFY)
    fit_window = None
    try:
        if args.config:
            vcfg, fit_window = _load_verify_config(args.config)
        with open(args.profile) as fh:
            profile = solver.profile_from_json(fh.read())
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 1
    checks = _verify_checks(profile, vcfg, fit_window)
    for c in checks:
        print(json.dumps(c))
    return 0 if all(c["pass"] for c in checks) else 3


# ---------------------------------------------------------------------------
# asymptotics report


def cmd_asymptotics(args) -> int:
    try:
        cfg = load_config(args.config, args)
    except (ConfigError, OSError, ValueError, json.JSONDecodeError) as exc:
        _emit_error(exc)
        return 1
    params, degrees = cfg["params"], cfg["degrees"]
    tail = asymptotics.second_coeffs(params, degrees)
    out = {"a_plus": tail.a_plus, "a_minus": tail.a_minus,
           "b_plus": tail.b_plus, "b_minus": tail.b_minus}
    try:
        spec = asymptotics.select_envelope(params, degrees)
        out["delta"] = spec.delta
        out["R"] = spec.R
        a = asymptotics.leading_coeffs_exact(params, degrees)
        b = asymptotics.second_coeffs_exact(params, degrees)
        m = {}
        sides = (("upper_plus_lower_minus", "lower_plus_upper_minus")
                 if params.B >= 0 else ("upper_both", "lower_both"))
        for branch in sides:
            sp, sm, _, _ = asymptotics._branch_requirements(branch)
            kp, km = asymptotics._envelope_bases(params, spec.family)
            delta = Fraction(spec.delta)
            ser_p, ser_m = asymptotics.expand_defect_series(
                params, degrees, a, b, (sp * delta * kp, sm * delta * km),
                spec.R)
            m[branch] = {"plus": ser_p.as_strings(),
                         "minus": ser_m.as_strings()}
        out["M_coefficients"] = m
    except asymptotics.SelectionFailed as exc:
        out["delta"] = None
        out["R"] = None
        out["M_coefficients"] = None
        out["selection_error"] = str(exc)
    print(json.dumps(out))
    return 0


# ---------------------------------------------------------------------------
# export


def _export_rows(profile: solver.Profile, what: str):
    r = profile.grid.nodes
    if what == "profiles":
        header = ["r", "f_plus", "f_minus"]
        cols = [r, profile.f_plus, profile.f_minus]
        mask = np.ones_like(r, dtype=bool)
    elif what == "slopes":
        header = ["r", "df_plus", "df_minus"]
        cols = [r,
                np.gradient(profile.f_plus, r, edge_order=2),
                np.gradient(profile.f_minus, r, edge_order=2)]
        mask = np.ones_like(r, dtype=bool)
    elif what == "tail":
        tail = asymptotics.leading_coeffs(profile.params, profile.degrees)
        mask = r > 0
        rr = r[mask]
        header = ["r", "tail2_plus", "tail2_minus",
                  "resid4_plus", "resid4_minus"]
        yp = profile.f_plus[mask] - profile.params.t_plus
        ym = profile.f_minus[mask] - profile.params.t_minus
        cols = [rr, yp * rr ** 2, ym * rr ** 2,
                (yp - tail.a_plus / rr ** 2) * rr ** 4,
                (ym - tail.a_minus / rr ** 2) * rr ** 4]
        return header, cols
    elif what == "envelope":
        spec = asymptotics.select_envelope(profile.params, profile.degrees)
        mask = r >= spec.R
        rr = r[mask]
        header = ["r", "w_lower_plus", "f_plus", "w_upper_plus",
                  "w_lower_minus", "f_minus", "w_upper_minus"]
        ev = asymptotics._envelope_values
        cols = [rr,
                ev(spec, profile.params, profile.degrees, rr, "plus", "lower"),
                profile.f_plus[mask],
                ev(spec, profile.params, profile.degrees, rr, "plus", "upper"),
                ev(spec, profile.params, profile.degrees, rr, "minus", "lower"),
                profile.f_minus[mask],
                ev(spec, profile.params, profile.degrees, rr, "minus", "upper")]
        return header, cols
    else:
        raise ConfigError(f"unknown export kind {what!r}")
    cols = [np.asarray(c)[mask] for c in cols]
    return header, cols


def cmd_export(args) -> int:
    try:
        with open(args.profile) as fh:
            profile = solver.profile_from_json(fh.read())
        header, cols = _export_rows(profile, args.what)
        out = args.out or f"{args.what}.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in zip(*cols):
                writer.writerow([_fmt(v) for v in row])
    except (OSError, ValueError, KeyError, json.JSONDecodeError,
            asymptotics.SelectionFailed) as exc:
        _emit_error(exc)
        return 1
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glvortex",
        description="Solve and verify symmetric two-component vortex profiles")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required)
        p.add_argument("--out")
        p.add_argument("--grid-n", dest="grid_n", type=int)
        p.add_argument("--r-max", dest="r_max", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--far-field", dest="far_field",
                       choices=["dirichlet", "robin"])

    p = sub.add_parser("solve", help="solve one configuration")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="continuation sweep over B")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the check suite on a profile")
    p.add_argument("profile")
    common(p, config_required=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("asymptotics", help="tail coefficients and envelope")
    common(p)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("export", help="CSV plot data from a profile")
    p.add_argument("profile")
    p.add_argument("what", choices=["profiles", "slopes", "tail", "envelope"])
    common(p, config_required=False)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
