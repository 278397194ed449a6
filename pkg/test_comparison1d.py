import cmath
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from comparison1d import (
    CONJECTURE_COLUMNS,
    CurvatureProfile,
    IneligibleGeometryError,
    RectangularWell,
    conjecture_test,
    frobenius_discrepancy,
    ground_state_1d,
    lowest_eigenvalue_fd,
    s_matrix_1d,
    scattering_1d,
)
from geometry import load_fixture


def _well_transmission(V0, L, k):
    q = math.sqrt(k * k + V0)
    denom = 2.0 * k * q * math.cos(q * L) - 1j * (k * k + q * q) * math.sin(q * L)
    return cmath.exp(-1j * k * L) * 2.0 * k * q / denom, (q * q - k * k) * abs(math.sin(q * L)) / abs(denom)


def _well_ground_state(V0, L):
    # 짝 바탕 상태: q tan(qL/2) = κ, q² + κ² = V0
    f = lambda kappa: math.sqrt(V0 - kappa ** 2) * math.tan(0.5 * L * math.sqrt(V0 - kappa ** 2)) - kappa
    kappa = brentq(f, 0.62, 1.0 - 1e-12, xtol=1e-15)
    return -kappa ** 2


# --- 산란 ---
def test_zero_profile_is_identity():
    result = scattering_1d(CurvatureProfile.zero(), 1.0)
    np.testing.assert_array_equal(result.s_matrix(), np.eye(2))
    assert result.unitarity_defect == 0.0


@pytest.mark.parametrize("k", [0.5, 1.0, 2.5])
def test_rectangular_well_matches_closed_form(k):
    result = scattering_1d(RectangularWell(1.0, 4.0), k)
    T, abs_R = _well_transmission(1.0, 4.0, k)
    assert abs(result.T - T) <= 1e-8
    assert abs(abs(result.R) - abs_R) <= 1e-8


def test_rectangular_well_unitarity_and_reciprocity():
    result = scattering_1d(RectangularWell(2.0, 1.5), 0.8)
    assert result.unitarity_defect <= 1e-9
    assert abs(result.T - result.T_right) <= 1e-9
    assert abs(abs(result.T_right) ** 2 + abs(result.R_right) ** 2 - 1.0) <= 1e-9


def test_s_matrix_layout():
    S = s_matrix_1d(RectangularWell(1.0, 2.0), 1.2)
    result = scattering_1d(RectangularWell(1.0, 2.0), 1.2)
    assert S[0, 0] == result.T and S[1, 0] == result.R and S[0, 1] == result.R_right


def test_scattering_rejects_non_positive_k():
    with pytest.raises(ValueError):
        scattering_1d(RectangularWell(1.0, 1.0), 0.0)


# --- 바탕 상태 ---
def test_ground_state_rectangular_well():
    assert ground_state_1d(RectangularWell(1.0, 4.0)) == pytest.approx(_well_ground_state(1.0, 4.0), abs=1e-6)


def test_finite_difference_is_second_order():
    well = RectangularWell(1.0, 4.0)
    exact = _well_ground_state(1.0, 4.0)
    coarse = lowest_eigenvalue_fd(well, 200, 1000) - exact
    fine = lowest_eigenvalue_fd(well, 400, 2000) - exact
    assert 3.0 <= coarse / fine <= 5.0


def test_no_ground_state_without_potential():
    assert ground_state_1d(CurvatureProfile.zero()) is None
    assert ground_state_1d(RectangularWell(0.0, 1.0)) is None


# --- 곡률 퍼텐셜 ---
def test_curvature_profile_of_bump():
    profile = CurvatureProfile.from_geometry(load_fixture("bump"))
    lo, hi = profile.support
    assert lo < 0.0 < hi
    assert not profile.is_zero
    s = np.linspace(lo - 1.0, hi + 1.0, 501)
    v = profile.potential(s)
    assert np.all(v <= 0.0)
    assert v[0] == 0.0 and v[-1] == 0.0


def test_curvature_profile_rejects_ineligible_geometry():
    with pytest.raises(IneligibleGeometryError):
        CurvatureProfile.from_geometry(load_fixture("gap"))


# --- 불일치 ---
def test_frobenius_discrepancy_removes_global_phase():
    S = np.array([[0.6, 0.8j], [0.8j, 0.6]])
    raw, phasemin = frobenius_discrepancy(S, cmath.exp(0.7j) * S)
    assert raw == pytest.approx(abs(1.0 - cmath.exp(0.7j)) * math.sqrt(2.0))
    assert phasemin == pytest.approx(0.0, abs=1e-7)
    raw_same, phasemin_same = frobenius_discrepancy(S, S)
    assert raw_same == 0.0 and phasemin_same == pytest.approx(0.0, abs=1e-7)
    assert frobenius_discrepancy(np.eye(2), S)[1] <= frobenius_discrepancy(np.eye(2), S)[0]


# --- 추측 비교 ---
def test_flat_conjecture_has_zero_discrepancy():
    report = conjecture_test(load_fixture("flat"), 1.0, [5.0, 10.0])
    assert list(report.rows.columns) == CONJECTURE_COLUMNS
    np.testing.assert_array_equal(report.discrepancies, [0.0, 0.0])
    assert report.rows["lambda"].tolist() == [1.0 - 6.25, 1.0 - 25.0]


def test_conjecture_input_checks():
    with pytest.raises(IneligibleGeometryError):
        conjecture_test(load_fixture("semicircle"), 1.0, [5.0])
    with pytest.raises(ValueError, match="window"):
        conjecture_test(load_fixture("bump"), 3.0, [5.0])
    with pytest.raises(ValueError):
        conjecture_test(load_fixture("bump"), 0.0, [5.0])


@pytest.mark.slow
def test_conjecture_discrepancy_decreases_with_alpha():
    report = conjecture_test(load_fixture("bump_low"), 1.0, [5.0, 10.0, 20.0, 40.0])
    assert np.all(np.diff(report.discrepancies) < 0.0)
    assert report.is_decreasing()
    assert report.one_d.unitarity_defect <= 1e-9
