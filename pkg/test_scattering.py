import numpy as np
import pytest

from bie import ChargeVector
from geometry import MeshParams, load_fixture
from greens import DirectKernel, EnergySpec, ThresholdError
from scattering import (
    SWEEP_COLUMNS,
    GridSpec,
    ScatteringAmplitudes,
    amplitudes,
    amplitudes_from_field,
    asymptote_residual,
    energy_sweep,
    field_map,
    probe_grid,
    scattering_matrix,
    solution_field_map,
    solve_scattering,
    unitarity_defect,
)

ALPHA = 5.0
LAM = -ALPHA ** 2 / 8.0
ENERGY = EnergySpec(ALPHA, LAM)
FINE = MeshParams(16, 0.04)
SMALL = MeshParams(8, 0.5)
ROUNDOFF_DEFECT = 1e-12


def _amps(T, R):
    return ScatteringAmplitudes(LAM, ALPHA, 1.0, complex(T), complex(R), 0.0, 0)


@pytest.mark.parametrize("T, R, expected", [(1, 0, 0.0), (0, 1j, 0.0), (0.5, 0.5, 0.5)])
def test_unitarity_defect_examples(T, R, expected):
    assert unitarity_defect(_amps(T, R)) == pytest.approx(expected)


# --- 평평한 직선 ---
def test_flat_line_is_transparent():
    amps = amplitudes(load_fixture("flat"), ENERGY)
    assert amps.T == 1.0 and amps.R == 0.0
    assert amps.N == 0 and amps.unitarity_defect == 0.0
    assert amps.k_alpha == pytest.approx(np.sqrt(ALPHA ** 2 / 4.0 + LAM))


def test_flat_scattering_matrix_is_identity():
    S, (left, right) = scattering_matrix(load_fixture("flat"), ENERGY)
    np.testing.assert_array_equal(S, np.eye(2))
    assert left.direction == "left" and right.direction == "right"


def test_flat_field_equals_incoming_wave():
    geom = load_fixture("flat")
    solution = solve_scattering(geom, ENERGY)
    grid = GridSpec(-2.0, 2.0, 9, (0.0, 0.5))
    field = solution_field_map(solution, geom, grid)
    pts = grid.points()
    k = ENERGY.k_alpha.real
    expected = np.exp(1j * k * pts[:, 0]) * np.exp(-0.5 * ALPHA * np.abs(pts[:, 1]))
    np.testing.assert_allclose(field.values, expected, rtol=1e-15)
    assert not field.skipped.any()
    assert list(field.to_frame().columns) == ["x1", "x2", "re_psi", "im_psi"]


def test_flat_field_probe_recovers_identity():
    geom = load_fixture("flat")
    solution = solve_scattering(geom, ENERGY, direction="right")
    field = solution_field_map(solution, geom, probe_grid(geom, ALPHA, n_x1=201))
    T, R = amplitudes_from_field(field, geom)
    assert T == pytest.approx(1.0, abs=1e-12)
    assert abs(R) <= 1e-12
    assert asymptote_residual(field, solution.amplitudes, geom) <= 1e-12


def test_scattering_needs_scattering_energy():
    with pytest.raises(ThresholdError):
        amplitudes(load_fixture("gap"), EnergySpec.from_kappa(ALPHA, 3.0))


# --- 격자 ---
def test_grid_points_are_x2_major():
    pts = GridSpec(0.0, 1.0, 3, (0.0, 1.0)).points()
    np.testing.assert_array_equal(pts[:, 1], [0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    np.testing.assert_array_equal(pts[:3, 0], [0.0, 0.5, 1.0])


@pytest.mark.parametrize("args", [(1.0, 0.0, 5), (0.0, 1.0, 1)])
def test_bad_grid_rejected(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_probe_requires_line_and_reach():
    geom = load_fixture("flat")
    solution = solve_scattering(geom, ENERGY)
    off_line = solution_field_map(solution, geom, GridSpec(-10.0, 10.0, 11, (0.5,)))
    with pytest.raises(ValueError, match="probe line"):
        amplitudes_from_field(off_line, geom)
    short = solution_field_map(solution, geom, GridSpec(-1.0, 1.0, 11))
    with pytest.raises(ValueError, match="grid too small"):
        amplitudes_from_field(short, geom)


def test_field_map_rejects_mismatched_charge():
    geom = load_fixture("gap")
    charge = ChargeVector(np.ones(3, dtype=complex), np.ones(3, dtype=complex))
    with pytest.raises(ValueError, match="does not match"):
        field_map(geom, ENERGY, charge, GridSpec(-1.0, 1.0, 5), params=MeshParams(8, 0.5))


# --- 스윕 ---
def test_energy_sweep_order_and_columns():
    lambdas = [-5.0, -1.0, -3.0]
    one = energy_sweep(load_fixture("flat"), ALPHA, lambdas)
    two = energy_sweep(load_fixture("flat"), ALPHA, lambdas, jobs=2)
    assert list(one.columns) == SWEEP_COLUMNS
    np.testing.assert_array_equal(one["lambda"].to_numpy(), lambdas)
    assert one.equals(two)


# --- 변형된 직선 (느림) ---
@pytest.mark.slow
@pytest.mark.parametrize("name", ["gap", "stub", "bump"])
def test_unitarity_on_fine_mesh(name):
    amps = amplitudes(load_fixture(name), ENERGY, FINE)
    if name == "gap":
        assert amps.N == 400
    assert amps.unitarity_defect <= 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("name", ["gap", "stub", "bump"])
def test_unitarity_improves_with_refinement(name):
    geom = load_fixture(name)
    coarse = amplitudes(geom, ENERGY, FINE)
    fine = amplitudes(geom, ENERGY, FINE.refined())
    assert fine.N == 2 * coarse.N
    assert coarse.unitarity_defect <= 1e-3
    # 핵이 정확하면 결함은 반올림 수준에서 멈춘다
    assert fine.unitarity_defect <= 0.5 * coarse.unitarity_defect or fine.unitarity_defect <= ROUNDOFF_DEFECT


def test_table_amplitudes_match_direct_kernel():
    geom = load_fixture("stub")
    table_amps = solve_scattering(geom, ENERGY, SMALL).amplitudes
    direct_amps = solve_scattering(geom, ENERGY, SMALL, table=DirectKernel(ENERGY)).amplitudes
    assert abs(table_amps.T - direct_amps.T) <= 2e-5
    assert abs(table_amps.R - direct_amps.R) <= 2e-5
    assert table_amps.unitarity_defect <= ROUNDOFF_DEFECT
    assert direct_amps.unitarity_defect <= ROUNDOFF_DEFECT


@pytest.mark.slow
def test_reciprocity_and_parity():
    S, (left, right) = scattering_matrix(load_fixture("bump"), ENERGY, FINE)
    assert abs(abs(S[0, 0]) - abs(S[1, 1])) <= 1e-4
    # 좌우 대칭인 변형에서는 양쪽 반사도 같다
    assert abs(left.R - right.R) <= 1e-4
    assert left.unitarity_defect <= 1e-3 and right.unitarity_defect <= 1e-3


@pytest.mark.slow
def test_field_asymptotics_match_amplitude_formula():
    geom = load_fixture("gap")
    solution = solve_scattering(geom, ENERGY, FINE)
    field = solution_field_map(solution, geom, probe_grid(geom, ALPHA))
    T, R = amplitudes_from_field(field, geom)
    amps = solution.amplitudes
    assert abs(T - amps.T) <= 5e-2
    assert abs(R - amps.R) <= 5e-2
    assert asymptote_residual(field, amps, geom) <= 5e-2
