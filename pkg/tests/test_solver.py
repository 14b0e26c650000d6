import json
import math

import numpy as np
import pytest

from spintorus.dirac import apply_dirac
from spintorus.fields import (
    first_positive_eigenspinor,
    l2_norm,
    lp_norm,
    pointwise_power,
    random_band_limited,
    zero_field,
)
from spintorus.lattice import SPHERE_CONSTANT_2D, SpinStructure, make_lattice
from spintorus.solver import (
    ContinuationError,
    ContinuationSchedule,
    Solution,
    constant_solution,
    lambda_consistency,
    residual_field,
    solve_at_exponent,
    solve_critical,
)

SQ = make_lattice((1, 0), (0, 1))
NT = SpinStructure(1, -1)


def test_residual_field_constant_eigenspinor():
    for p in (2.0, 3.0, 4.0):
        sol = constant_solution(SQ, NT, 16)
        c = sol.phi.pointwise_norm()[0, 0]
        lam = math.pi / c ** (p - 2.0)
        assert l2_norm(residual_field(sol.phi, lam, p)) < 1e-12


def test_residual_field_zero_field():
    phi = zero_field(SQ, NT, 8)
    assert l2_norm(residual_field(phi, 2.0, 3.0)) == 0.0


def test_residual_field_matches_independent_recomputation(rng):
    phi = random_band_limited(SQ, NT, 8, rng)
    lam, p = 1.3, 3.2
    got = residual_field(phi, lam, p)
    dphi = apply_dirac(phi)
    w = pointwise_power(phi.pointwise_norm(), p - 2.0)
    assert np.allclose(got.plus, dphi.plus - lam * w * phi.plus, atol=1e-14)
    assert np.allclose(got.minus, dphi.minus - lam * w * phi.minus, atol=1e-14)


def test_residual_field_rejects_bad_exponent(rng):
    with pytest.raises(ValueError):
        residual_field(random_band_limited(SQ, NT, 8, rng), 1.0, 5.0)


def test_solve_p2_recovers_linear_eigenproblem(rng):
    init = first_positive_eigenspinor(SQ, NT, 16)
    init = init + 0.05 * random_band_limited(SQ, NT, 16, rng)
    sol = solve_at_exponent(2.0, init)
    assert sol.lam == pytest.approx(math.pi, rel=1e-10)
    assert sol.residual < 1e-10
    assert sol.norm_p == pytest.approx(1.0, abs=1e-10)


def test_solve_p4_constant_branch():
    sol = solve_at_exponent(4.0, constant_solution(SQ, NT, 16).phi)
    assert sol.lam == pytest.approx(math.pi, rel=1e-12)
    assert sol.min_abs() / sol.max_abs() > 1.0 - 1e-12
    assert sol.residual < 1e-12


def test_solve_p4_tall_rectangle_unscaled():
    # lambda_1 = pi/4, |phi|^2 = 1/2, lambda = lambda_1 sqrt(area) = pi/2
    lat = make_lattice((1, 0), (0, 4))
    sol = solve_at_exponent(4.0, constant_solution(lat, NT, 16).phi)
    assert sol.lam == pytest.approx(math.pi / 2.0, rel=1e-11)
    assert sol.phi.pointwise_norm()[0, 0] ** 2 == pytest.approx(0.5, rel=1e-11)


def test_solve_fixed_lambda_mode(rng):
    init = first_positive_eigenspinor(SQ, NT, 16)
    init = init + 0.02 * random_band_limited(SQ, NT, 16, rng)
    init = (1.0 / lp_norm(init, 4.0)) * init
    sol = solve_at_exponent(4.0, init, lambda_mode="fixed", lam_fixed=math.pi)
    assert sol.lam == math.pi
    assert sol.residual < 1.6e-8


def test_solve_critical_unit_square(rng):
    sol = solve_critical(SQ, NT, n_grid=16, seed=4, perturbation=0.05)
    assert sol.lam == pytest.approx(math.pi, abs=1e-6)
    assert sol.residual < 1e-8
    assert [step["p"] for step in sol.trace] == [2.0, 2.5, 3.0, 3.5, 3.8, 3.95, 4.0]


def test_solve_critical_rectangle_y2():
    lat = make_lattice((1, 0), (0, 2))
    sol = solve_critical(lat, NT, n_grid=16, seed=4, perturbation=0.05)
    assert sol.lam * math.sqrt(sol.phi.lat.area) == pytest.approx(
        math.pi / math.sqrt(2.0), abs=1e-5
    )


def test_solve_critical_trivial_spin_tall_torus():
    lat = make_lattice((1, 0), (0, 8))
    sol = solve_critical(lat, SpinStructure.trivial(), n_grid=16, seed=4, perturbation=0.05)
    expected = 2 * math.pi / math.sqrt(8.0)
    assert sol.lam == pytest.approx(expected, abs=1e-6)
    assert sol.lam * math.sqrt(sol.phi.lat.area) < SPHERE_CONSTANT_2D


def test_lambda_consistency(rng):
    sol = solve_critical(SQ, NT, n_grid=16, seed=2, perturbation=0.03)
    assert lambda_consistency(sol) == pytest.approx(sol.lam, abs=2e-8)


def test_gauge_covariance(rng):
    init = first_positive_eigenspinor(SQ, NT, 16)
    init = init + 0.05 * random_band_limited(SQ, NT, 16, rng)
    a = solve_critical(SQ, NT, init=init, n_grid=16)
    b = solve_critical(SQ, NT, init=np.exp(0.9j) * init, n_grid=16)
    assert a.lam == pytest.approx(b.lam, abs=1e-12)
    assert np.allclose(a.phi.pointwise_norm(), b.phi.pointwise_norm(), atol=1e-10)


def test_grid_convergence_constant_branch():
    lams = [
        solve_critical(SQ, NT, n_grid=n, seed=1).lam for n in (16, 32, 64)
    ]
    assert max(lams) - min(lams) < 1e-8


def test_schedule_validation():
    with pytest.raises(ValueError):
        ContinuationSchedule(p_values=(2.0, 3.0))
    with pytest.raises(ValueError):
        ContinuationSchedule(p_values=(2.0, 3.0, 3.0, 4.0))
    with pytest.raises(ValueError):
        ContinuationSchedule(p_values=(2.5, 3.0, 4.0))


def test_zero_init_rejected():
    with pytest.raises(ValueError):
        solve_at_exponent(4.0, zero_field(SQ, NT, 8))


def test_invalid_lambda_mode_rejected():
    with pytest.raises(ValueError):
        solve_at_exponent(4.0, constant_solution(SQ, NT, 8).phi, lambda_mode="bogus")


def test_continuation_failure_carries_trace(rng):
    schedule = ContinuationSchedule(max_newton=1)
    init = first_positive_eigenspinor(SQ, NT, 16)
    init = init + 0.5 * random_band_limited(SQ, NT, 16, rng)
    with pytest.raises(ContinuationError) as err:
        solve_critical(SQ, NT, schedule=schedule, init=init, n_grid=16)
    assert hasattr(err.value, "trace")


def test_solution_serialization_roundtrip():
    sol = solve_critical(SQ, NT, n_grid=16, seed=7, perturbation=0.02)
    data = json.loads(json.dumps(sol.to_dict()))
    back = Solution.from_dict(data)
    assert back.lam == sol.lam
    assert back.p == sol.p
    assert back.trace == sol.trace
    assert np.array_equal(back.phi.plus, sol.phi.plus)


def test_init_lattice_mismatch_rejected():
    lat = make_lattice((1, 0), (0, 2))
    init = first_positive_eigenspinor(lat, NT, 16)  # not unit area
    with pytest.raises(ValueError):
        solve_critical(lat, NT, init=init, n_grid=16)
