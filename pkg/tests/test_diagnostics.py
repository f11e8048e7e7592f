import numpy as np
import pytest

import glvortex as gv
from glvortex.diagnostics import (quantization_rhs, second_variation_matrix,
                                  _hessian_dofs)
from glvortex.solver import Profile, SolveReport
from conftest import case_inputs
from oracles import scalar_gl_profile, scalar_hessian_min_eig


def make_profile(grid, params, degrees, f_plus, f_minus):
    report = SolveReport(iterations=(0,), final_residual=0.0,
                         tolerance=1e-10, converged=True, wall_time=0.0)
    return Profile(grid=grid, params=params, degrees=degrees,
                   f_plus=np.asarray(f_plus, float),
                   f_minus=np.asarray(f_minus, float), report=report)


@pytest.fixture(scope="module")
def ground_state():
    grid = gv.build_grid(30.0, 600)
    params = gv.CouplingParams(1, 1, 0, 1, 1)
    ones = np.ones(601)
    return make_profile(grid, params, gv.DegreePair(0, 0), ones, ones)


def test_energy_of_ground_state_is_zero(ground_state):
    # zero up to the squared roundoff of the derivative stencil weights
    assert abs(gv.radial_energy(ground_state)) < 1e-25
    assert abs(gv.radial_energy(ground_state, 10.0)) < 1e-25


def test_energy_grows_logarithmically(reference_profiles):
    # decoupled single vortex: E(R) ~ (n^2 t^2 / 2) ln R + const, so a
    # linear fit of E against ln R over [20, 80] has slope 1/2
    prof = reference_profiles["classical"]
    radii = np.array([20.0, 30.0, 40.0, 60.0, 80.0])
    energies = [gv.radial_energy(prof, R) for R in radii]
    slope = np.polyfit(np.log(radii), energies, 1)[0]
    assert slope == pytest.approx(0.5, rel=0.05)


def test_energy_decreases_toward_minimizer(reference_profiles):
    # local minimizer: random admissible perturbations raise the energy,
    # and the converged profile lies below its initial ansatz
    prof = reference_profiles["bpos"]
    base = gv.radial_energy(prof)
    rng = np.random.default_rng(17)
    for _ in range(5):
        vp = rng.normal(size=prof.f_plus.shape) * 1e-3
        vm = rng.normal(size=prof.f_minus.shape) * 1e-3
        vp[0] = vm[0] = vp[-1] = vm[-1] = 0.0
        bumped = make_profile(prof.grid, prof.params, prof.degrees,
                              prof.f_plus + vp, prof.f_minus + vm)
        assert gv.radial_energy(bumped) > base
    fp0, fm0 = gv.initial_guess(prof.grid, prof.params, prof.degrees)
    ansatz = make_profile(prof.grid, prof.params, prof.degrees, fp0, fm0)
    assert base < gv.radial_energy(ansatz)


def test_pohozaev_zero_for_ground_state(ground_state):
    assert gv.pohozaev_residual(ground_state, 20.0) == pytest.approx(0.0,
                                                                     abs=1e-14)


def test_pohozaev_decays_with_radius(reference_profiles):
    prof = reference_profiles["classical"]
    res = [abs(gv.pohozaev_residual(prof, R)) for R in (5.0, 20.0, 40.0, 80.0)]
    assert res[0] > res[1] > res[2] > res[3]
    assert res[-1] < 0.01  # within 1% of the quantized value 1


def test_pohozaev_consistent_with_quantization(reference_profiles):
    # at R_max the scaling identity and the quantization defect differ by
    # exactly the boundary flux term: same identity, two evaluations
    for prof in reference_profiles.values():
        q = gv.quantization_check(prof)
        poh = gv.pohozaev_residual(prof)
        r = prof.grid.nodes
        h = r[-1] - r[-2]
        flux = 0.0
        for f in (prof.f_plus, prof.f_minus):
            df = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
            flux += (r[-1] * df) ** 2
        assert poh - flux == pytest.approx(q.lhs - q.rhs, abs=1e-10)


def test_quantization_rhs_values(ground_state):
    grid = ground_state.grid
    p = gv.CouplingParams(1, 1, 0.3, 1, 2)
    prof = make_profile(grid, p, gv.DegreePair(1, 1),
                        np.ones(601), np.full(601, 2.0))
    assert quantization_rhs(prof) == pytest.approx(5.0)
    assert quantization_rhs(ground_state) == 0.0


def test_quantization_higher_degrees():
    grid = gv.build_grid(40.0, 1600)
    params = gv.CouplingParams(1, 1, 0.3, 1, 1)
    prof = gv.continuation_solve(params, gv.DegreePair(2, 1), grid)
    q = gv.quantization_check(prof)
    assert q.rhs == pytest.approx(5.0)
    assert q.relative_gap < 0.01


def test_amplitude_bound_ground_state_margin(ground_state):
    # Lambda^2 equals t_+^2 + t_-^2 here, so the constant state has margin 0
    assert gv.amplitude_bound_check(ground_state) == pytest.approx(0.0,
                                                                   abs=1e-14)


def test_amplitude_bound_on_solves(reference_profiles):
    for prof in reference_profiles.values():
        assert gv.amplitude_bound_check(prof) >= -1e-8


def test_amplitude_bound_overshoot_constrains_sum(reference_profiles):
    prof = reference_profiles["overshoot"]
    assert np.max(prof.f_minus) > prof.params.t_minus  # one component exceeds
    assert gv.amplitude_bound_check(prof) >= -1e-8     # the sum does not


def test_hessian_positive_at_constant_state(ground_state):
    p = gv.CouplingParams(1.4, 0.9, -0.5, 1.2, 0.8)
    grid = ground_state.grid
    prof = make_profile(grid, p, gv.DegreePair(0, 0),
                        np.full(601, p.t_plus), np.full(601, p.t_minus))
    eig = gv.second_variation_min_eig(prof)
    pot = 2.0 * np.array([[p.A_plus * p.t_plus ** 2,
                           p.B * p.t_plus * p.t_minus],
                          [p.B * p.t_plus * p.t_minus,
                           p.A_minus * p.t_minus ** 2]])
    pot_min = np.linalg.eigvalsh(pot)[0]
    lam_s = gv.derived_bounds(p).lambda_s
    assert pot_min >= 2 * lam_s * min(p.t_plus, p.t_minus) ** 2 - 1e-12
    assert eig > 0
    assert eig >= pot_min - 1e-10  # gradient part only adds


def test_hessian_matches_scalar_oracle():
    grid = gv.build_grid(40.0, 2000)
    params = gv.CouplingParams(1, 1, 0, 1, 1)
    prof = gv.continuation_solve(params, gv.DegreePair(1, 0), grid)
    lib = gv.second_variation_min_eig(prof)
    oracle_f = scalar_gl_profile(1.0, 1.0, 1, grid.nodes)
    oracle = scalar_hessian_min_eig(1.0, 1.0, 1, oracle_f, grid.nodes)
    assert oracle < 2.0  # the decoupled partner block sits at 2 A t^2
    assert lib == pytest.approx(oracle, abs=1e-4)


def test_hessian_positive_on_solves(reference_profiles):
    for prof in reference_profiles.values():
        assert gv.second_variation_min_eig(prof) >= -1e-8


def test_hessian_symmetric_by_construction():
    grid = gv.build_grid(20.0, 64)
    params = gv.CouplingParams(1, 1, 0.5, 1, 1)
    prof = gv.continuation_solve(params, gv.DegreePair(1, 0), grid)
    band, masses = second_variation_matrix(prof)
    ndof = band.shape[1]
    dense = np.zeros((ndof, ndof))
    dense[np.arange(ndof), np.arange(ndof)] = band[2]
    for k in (1, 2):
        rows = np.arange(ndof - k)
        dense[rows, rows + k] = band[2 - k, k:]
        dense[rows + k, rows] = band[2 - k, k:]
    assert np.array_equal(dense, dense.T)
    assert np.all(masses > 0)


def test_hessian_dof_layout():
    grid = gv.build_grid(20.0, 64)
    params = gv.CouplingParams(1, 1, 0.5, 1, 1)
    ones = np.ones(65)
    for degrees, expect in (((1, 1), 2 * 64 - 2), ((1, 0), 2 * 64 - 1),
                            ((0, 0), 2 * 64)):
        prof = make_profile(grid, params, gv.DegreePair(*degrees), ones, ones)
        gp, gm, ndof = _hessian_dofs(prof)
        assert ndof == expect
        if degrees[0] != 0:
            assert gp[0] == -1
        assert gp[-1] == -1 and gm[-1] == -1


def test_monotonicity_classes(reference_profiles, coarse_grid):
    cls = gv.monotonicity_classify(reference_profiles["bneg"])
    assert cls.label is gv.MonotonicityLabel.BothNondecreasing
    assert cls.witness is None

    params, _ = case_inputs("bpos")
    prof = gv.continuation_solve(params, gv.DegreePair(1, 0), coarse_grid)
    cls = gv.monotonicity_classify(prof)
    assert cls.label is gv.MonotonicityLabel.PlusUpMinusDown

    cls = gv.monotonicity_classify(reference_profiles["overshoot"])
    assert cls.label is gv.MonotonicityLabel.NonMonotoneMinus
    assert cls.witness is not None
    assert cls.witness.component == "minus"
    assert cls.witness.slope < 0


def test_monotonicity_classical_degenerate_minus(reference_profiles):
    # at zero interaction the n=0 partner is constant, which counts as
    # nondecreasing under the tolerance
    cls = gv.monotonicity_classify(reference_profiles["classical"])
    assert cls.label is gv.MonotonicityLabel.BothNondecreasing


def test_classifier_stable_under_tolerance_halving(reference_profiles):
    for prof in reference_profiles.values():
        a = gv.monotonicity_classify(prof, slope_tol=1e-6).label
        b = gv.monotonicity_classify(prof, slope_tol=5e-7).label
        assert a is b


def test_overshoot_agrees_with_tail_sign(reference_profiles):
    # a component with positive leading tail coefficient approaches its
    # modulus from above, so it cannot be monotone
    prof = reference_profiles["overshoot"]
    tail = gv.leading_coeffs(prof.params, prof.degrees)
    assert tail.a_minus > 0
    cls = gv.monotonicity_classify(prof)
    assert cls.label is gv.MonotonicityLabel.NonMonotoneMinus


def test_near_origin_order_on_reference(reference_profiles):
    for name, prof in reference_profiles.items():
        orders = gv.near_origin_order(prof)
        assert orders[0] == pytest.approx(prof.degrees.n_plus, abs=0.05)
        assert orders[1] == pytest.approx(prof.degrees.n_minus, abs=0.05)


def test_quantization_gap_shrinks_with_domain():
    # gap ~ C1/R_max^2 (untracked tail) + C2 h^2 (quadrature/discretization);
    # along a ladder at fixed h the tail term dominates first, so doubling
    # R_max cuts the gap by nearly 4 before the h^2 floor takes over
    params = gv.CouplingParams(1, 1, 0.5, 1, 1)
    deg = gv.DegreePair(1, 1)
    gaps = []
    for R_max, N in ((20.0, 1000), (40.0, 2000), (80.0, 4000)):
        prof = gv.continuation_solve(params, deg, gv.build_grid(R_max, N))
        gaps.append(gv.quantization_check(prof).relative_gap)
    assert gaps[0] > gaps[1] > gaps[2]
    assert 2.2 <= gaps[0] / gaps[1] <= 4.5


def test_identity_report_fields(reference_profiles):
    rep = gv.identity_report(reference_profiles["bpos"])
    assert rep.quantization_rhs == pytest.approx(2.0)
    assert rep.quantization_gap < 0.01
    assert abs(rep.pohozaev_at_R_max) < 0.01
    assert rep.bound_margin >= -1e-8
    assert rep.hessian_min_eig > 1e-4
    assert rep.energy_value > 0
