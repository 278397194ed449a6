import warnings

import numpy as np
import pytest

from bie import (
    IllConditionedError,
    assemble_theta,
    condition_estimate,
    embed_omega,
    h_inner,
    perturbed_resolvent_kernel,
    solve_charge,
    with_direction,
)
from geometry import build_mesh, load_fixture
from greens import EnergySpec, KernelPoint, ThresholdError, sigma_green_resolvent

SCATTER = EnergySpec(5.0, -3.125)
BOUND = EnergySpec.from_kappa(2.0, 1.5)


# --- 조립 ---
def test_diagonal_mode_is_minus_sign_over_alpha():
    mesh = build_mesh(load_fixture("stub"), 8, 0.25)
    system = assemble_theta(mesh, SCATTER, kernel_mode="diagonal")
    assert system.matrix.dtype == complex
    np.testing.assert_allclose(system.matrix, np.diag(-mesh.signs / SCATTER.alpha), atol=1e-15)


def test_diagonal_mode_solution_closed_form():
    mesh = build_mesh(load_fixture("stub"), 8, 0.25)
    system = assemble_theta(mesh, SCATTER, kernel_mode="diagonal")
    charge = solve_charge(system)
    expected = -SCATTER.alpha * mesh.signs * embed_omega(mesh, SCATTER)
    np.testing.assert_allclose(charge.coefficients, expected, rtol=1e-12)
    assert charge.condition == pytest.approx(1.0)


def test_bound_matrix_is_real_symmetric():
    mesh = build_mesh(load_fixture("gap"), 8, 0.25)
    system = assemble_theta(mesh, BOUND)
    assert system.matrix.dtype == float
    assert system.size == mesh.size == 32
    assert np.all(np.isfinite(system.matrix))
    np.testing.assert_array_equal(system.matrix, system.matrix.T)
    np.testing.assert_array_equal(system.rhs, np.zeros(32))


def test_unknown_kernel_mode_and_direction():
    mesh = build_mesh(load_fixture("gap"), 8, 0.5)
    with pytest.raises(ValueError):
        assemble_theta(mesh, SCATTER, kernel_mode="nope")
    with pytest.raises(ValueError):
        assemble_theta(mesh, SCATTER, direction="up")


def test_embed_omega_needs_scattering_energy():
    mesh = build_mesh(load_fixture("gap"), 8, 0.5)
    with pytest.raises(ThresholdError):
        embed_omega(mesh, BOUND)


def test_with_direction_conjugates_incoming_wave():
    mesh = build_mesh(load_fixture("gap"), 8, 0.5)
    left = assemble_theta(mesh, SCATTER, kernel_mode="diagonal")
    right = with_direction(left, "right")
    assert right.matrix is left.matrix
    # gap 은 x2 = 0 위에 있으므로 오른쪽 입사파는 왼쪽 입사파의 켤레
    np.testing.assert_allclose(right.rhs, np.conj(left.rhs), atol=1e-15)


# --- 풀이 ---
def test_empty_mesh_solve():
    mesh = build_mesh(load_fixture("flat"))
    system = assemble_theta(mesh, SCATTER)
    assert system.matrix.shape == (0, 0)
    charge = solve_charge(system)
    assert charge.size == 0
    assert charge.h_norm() == 0.0


def test_ill_conditioned_system_rejected():
    mesh = build_mesh(load_fixture("stub"), 8, 0.25)
    system = assemble_theta(mesh, BOUND)
    with pytest.raises(IllConditionedError) as info:
        solve_charge(system, cond_cap=1.0)
    assert info.value.condition > 1.0


def test_complex_condition_estimate_is_real_without_warnings():
    mesh = build_mesh(load_fixture("stub"), 8, 0.25)
    system = assemble_theta(mesh, SCATTER)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cond = condition_estimate(system)
        solve_charge(system)
    assert isinstance(cond, float) and cond >= 1.0


# --- 내적 ---
def test_h_inner_conventions():
    f = np.array([1j, 2.0])
    g = np.array([1.0, 1j])
    w = np.array([2.0, 0.5])
    assert h_inner(f, g, w) == pytest.approx(2j - 1j)
    assert h_inner(f, g, w, "first") == pytest.approx(-2j + 1j)
    with pytest.raises(ValueError):
        h_inner(f, g, w, "third")


# --- 섭동 레졸벤트 ---
def test_perturbed_kernel_flat_equals_sigma_kernel():
    mesh = build_mesh(load_fixture("flat"))
    x, y = [0.3, 0.2], [-0.5, 0.1]
    expected = sigma_green_resolvent(BOUND, KernelPoint.between(x, y))
    assert perturbed_resolvent_kernel(mesh, BOUND, x, y) == expected


def test_perturbed_kernel_symmetric_and_below_sigma_for_gap():
    mesh = build_mesh(load_fixture("gap"), 8, 0.25)
    x, y = [0.5, 0.4], [-0.3, 0.6]
    forward = perturbed_resolvent_kernel(mesh, BOUND, x, y)
    backward = perturbed_resolvent_kernel(mesh, BOUND, y, x)
    assert forward == pytest.approx(backward, rel=1e-8)
    # 인력을 일부 없앤 선 위에서는 레졸벤트 핵이 점별로 작아진다
    assert forward < sigma_green_resolvent(BOUND, KernelPoint.between(x, y))


def test_perturbed_kernel_needs_euclidean_energy():
    mesh = build_mesh(load_fixture("gap"), 8, 0.5)
    with pytest.raises(ThresholdError):
        perturbed_resolvent_kernel(mesh, SCATTER, [0.0, 1.0], [1.0, 1.0])
