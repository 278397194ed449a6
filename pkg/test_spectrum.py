import math

import numpy as np
import pandas as pd
import pytest

from comparison1d import CurvatureProfile, default_conjecture_params, ground_state_1d
from geometry import MeshParams, load_fixture
from greens import ThresholdError
from spectrum import (
    SCAN_COLUMNS,
    SCAN_TABLE_SCALE,
    SCAN_TABLE_TOL,
    BoundStateResult,
    NoDeformationError,
    bound_states_frame,
    find_bound_states,
    scan_smallest_singular,
    smallest_singular,
)

SMALL = MeshParams(8, 0.25)


def _scan_below_threshold(geom, alpha, offsets, params):
    # 문턱 바로 아래를 촘촘하게 보려고 로그 간격 주사를 직접 만든다
    lambdas = np.sort(-0.25 * alpha * alpha - np.asarray(offsets))
    sigmas = [smallest_singular(geom, alpha, lam, params, SCAN_TABLE_SCALE, SCAN_TABLE_TOL) for lam in lambdas]
    return pd.DataFrame({"lambda": lambdas, "sigma_min": sigmas})


def test_flat_line_has_no_bound_states():
    geom = load_fixture("flat")
    assert find_bound_states(geom, 5.0, (-7.5, -6.3)) == []
    with pytest.raises(NoDeformationError):
        smallest_singular(geom, 5.0, -7.0)


def test_deep_energy_sigma_approaches_inverse_alpha():
    # gap 에서는 R 이 양의 연산자라 σ_min = 1/α + (R 의 최소 고유값)
    sigma = smallest_singular(load_fixture("gap"), 5.0, -400.0, SMALL)
    assert 0.19 <= sigma <= 0.24


def test_smallest_singular_needs_euclidean_energy():
    with pytest.raises(ThresholdError):
        smallest_singular(load_fixture("gap"), 5.0, -3.0, SMALL)


@pytest.mark.parametrize("scan_range, error", [
    ((-7.0, -6.25), ThresholdError),
    ((-7.0, -6.0), ThresholdError),
    ((-6.5, -7.0), ValueError),
])
def test_scan_range_checks(scan_range, error):
    with pytest.raises(error):
        scan_smallest_singular(load_fixture("bump"), 5.0, scan_range)


def test_bound_states_frame_layout():
    empty = bound_states_frame([])
    assert empty.empty and "lambda_star" in empty.columns
    row = BoundStateResult(-7.0, 1e-9, np.ones(3), 3).as_row()
    assert math.isnan(row["interval_lo"]) and row["rank_deficiency"] == 1


@pytest.mark.slow
def test_scan_trace_columns_and_gap_has_no_bound_state():
    geom = load_fixture("gap")
    scan = scan_smallest_singular(geom, 5.0, (-7.5, -6.3), resolution=0.2, params=SMALL)
    assert list(scan.columns) == SCAN_COLUMNS
    assert np.all(np.diff(scan["lambda"].to_numpy()) > 0.0)
    assert find_bound_states(geom, 5.0, (-7.5, -6.3), params=SMALL, scan=scan) == []


@pytest.mark.slow
def test_bump_binds_below_threshold():
    geom = load_fixture("bump")
    params = MeshParams()
    offsets = np.logspace(-4, math.log10(2.0), 60)
    scan = _scan_below_threshold(geom, 5.0, offsets, params)
    states = find_bound_states(geom, 5.0, (scan["lambda"].min(), scan["lambda"].max()), params=params, scan=scan)
    assert len(states) >= 1
    ground = states[0]
    assert ground.lambda_star < -6.25
    assert ground.residual <= 1e-6
    assert ground.sigma_min <= 5e-6


@pytest.mark.slow
def test_strong_coupling_matches_comparison_ground_state():
    geom = load_fixture("bump")
    alpha = 20.0
    mu = ground_state_1d(CurvatureProfile.from_geometry(geom))
    assert mu is not None and mu < 0.0
    params = default_conjecture_params(alpha)
    scan = _scan_below_threshold(geom, alpha, -mu * np.linspace(0.3, 2.0, 35), params)
    states = find_bound_states(geom, alpha, (scan["lambda"].min(), scan["lambda"].max()), params=params, scan=scan)
    assert states
    binding = min(s.lambda_star for s in states) + 0.25 * alpha * alpha
    assert binding == pytest.approx(mu, rel=0.1)
