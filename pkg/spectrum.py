import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import svd, svdvals
from scipy.optimize import minimize_scalar

from bie import ThetaSystem, assemble_theta
from geometry import DeformedLineGeometry, MeshParams, mesh_from_params
from greens import TABLE_TOL, THRESHOLD_GUARD, EnergySpec, ThresholdError, build_kernel_table, essential_threshold, kernel_ranges

logger = logging.getLogger(__name__)

# --- 설정값 ---
DETECTION_FACTOR = 1e-6         # σ_min ≤ 1e-6·α 이면 고유값으로 인정
SCAN_RESOLUTION_FACTOR = 1.0 / 4000.0   # 기본 주사 간격 α²/4000
REFINE_TOL = 1e-10              # 황금분할 정밀화 목표 (λ 절대값)
RANK_FACTOR = 10.0              # 중복도 판정: σ ≤ 10·검출 문턱
SCAN_TABLE_SCALE = 2.0          # 주사 단계에서는 보간 격자를 성기게
SCAN_TABLE_TOL = 1e-4           # 주사 단계 보간 오차 한도 (정밀화는 TABLE_TOL)
SCAN_COLUMNS = ["lambda", "sigma_min"]


class NoDeformationError(ValueError):
    """Λ 가 비어 있어 Θ 가 0×0 인 경우 (평평한 직선)."""


@dataclass(eq=False)
class BoundStateResult:
    lambda_star: float
    sigma_min: float
    null_vector: np.ndarray          # 노드에서의 q (‖√w q‖ = 1)
    N: int
    interval: Optional[Tuple[float, float]] = None
    rank_deficiency: int = 1
    residual: float = float("nan")

    def as_row(self) -> dict:
        lo, hi = self.interval if self.interval else (float("nan"), float("nan"))
        return {
            "lambda_star": self.lambda_star,
            "sigma_min": self.sigma_min,
            "N": self.N,
            "rank_deficiency": self.rank_deficiency,
            "residual": self.residual,
            "interval_lo": lo,
            "interval_hi": hi,
        }


def _bound_system(geom: DeformedLineGeometry, alpha: float, lam: float, params: MeshParams,
                  spacing_scale: float = 1.0, tol: float = TABLE_TOL) -> ThetaSystem:
    energy = EnergySpec(alpha, lam)
    if not energy.is_euclidean:
        raise ThresholdError(f"lambda={lam:g} is not below the essential threshold {essential_threshold(alpha):g}")
    mesh = mesh_from_params(geom, params)
    if mesh.size == 0:
        raise NoDeformationError("geometry has no deformation: Theta is 0x0")
    table = build_kernel_table(energy, *kernel_ranges(mesh.nodes, mesh.nodes), spacing_scale=spacing_scale, tol=tol)
    return assemble_theta(mesh, energy, table)


def smallest_singular(geom: DeformedLineGeometry, alpha: float, lam: float, params: Optional[MeshParams] = None,
                      spacing_scale: float = 1.0, tol: float = TABLE_TOL) -> float:
    """λ < -α²/4 에서 실대칭 Θ 의 최소 특이값."""
    system = _bound_system(geom, alpha, lam, params or MeshParams(), spacing_scale, tol)
    return float(svdvals(system.matrix, check_finite=False)[-1])


def _scan_point(args) -> float:
    geom, alpha, lam, params, scale = args
    return smallest_singular(geom, alpha, lam, params, scale, SCAN_TABLE_TOL)


def _check_range(alpha: float, scan_range: Sequence[float]) -> Tuple[float, float]:
    lo, hi = map(float, scan_range)
    threshold = essential_threshold(alpha)
    if not lo < hi:
        raise ValueError(f"scan range must satisfy min < max, got [{lo:g}, {hi:g}]")
    if hi >= threshold - THRESHOLD_GUARD * alpha * alpha:
        raise ThresholdError(f"scan range must stay below the essential threshold {threshold:g}")
    return lo, hi


def scan_smallest_singular(geom: DeformedLineGeometry, alpha: float, scan_range: Sequence[float],
                           resolution: Optional[float] = None, params: Optional[MeshParams] = None,
                           jobs: int = 1, spacing_scale: float = SCAN_TABLE_SCALE) -> pd.DataFrame:
    lo, hi = _check_range(alpha, scan_range)
    resolution = resolution or SCAN_RESOLUTION_FACTOR * alpha * alpha
    n = max(3, int(math.ceil((hi - lo) / resolution)) + 1)
    lambdas = np.linspace(lo, hi, n)
    tasks = [(geom, alpha, float(lam), params or MeshParams(), spacing_scale) for lam in lambdas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sigmas = list(pool.map(_scan_point, tasks))
    else:
        sigmas = [_scan_point(t) for t in tasks]
    logger.info("Scanned %d energies in [%g, %g], min sigma %.3e", n, lo, hi, min(sigmas))
    return pd.DataFrame({"lambda": lambdas, "sigma_min": sigmas})[SCAN_COLUMNS]


def _refine(geom, alpha, params, a: float, b: float, c: float):
    func = lambda lam: smallest_singular(geom, alpha, lam, params)
    xtol = REFINE_TOL / (2.0 * max(abs(b), 1.0))
    try:
        res = minimize_scalar(func, bracket=(a, b, c), method="golden", options={"xtol": xtol})
    except ValueError:
        # 평평한 골짜기에서는 bracket 조건이 깨질 수 있음
        res = minimize_scalar(func, bounds=(a, c), method="bounded", options={"xatol": REFINE_TOL})
    return float(res.x), float(res.fun)


def _valley_interval(lambdas: np.ndarray, sigmas: np.ndarray, i: int, detection: float):
    lo = hi = i
    while lo > 0 and sigmas[lo - 1] <= detection:
        lo -= 1
    while hi < len(sigmas) - 1 and sigmas[hi + 1] <= detection:
        hi += 1
    if hi > lo:
        return float(lambdas[lo]), float(lambdas[hi])
    return None


def find_bound_states(geom: DeformedLineGeometry, alpha: float, scan_range: Sequence[float],
                      resolution: Optional[float] = None, params: Optional[MeshParams] = None,
                      jobs: int = 1, detection: Optional[float] = None,
                      scan: Optional[pd.DataFrame] = None) -> List[BoundStateResult]:
    """σ_min(λ) 주사 → 국소 최소에서 황금분할 정밀화 → 문턱 이하만 고유값으로 보고."""
    lo, hi = _check_range(alpha, scan_range)
    if geom.is_flat:
        logger.info("Flat geometry: discrete spectrum is empty")
        return []
    params = params or MeshParams()
    if scan is None:
        scan = scan_smallest_singular(geom, alpha, (lo, hi), resolution, params, jobs)
    lambdas = scan["lambda"].to_numpy()
    sigmas = scan["sigma_min"].to_numpy()
    detection = detection if detection is not None else DETECTION_FACTOR * alpha

    results: List[BoundStateResult] = []
    for i in range(1, len(lambdas) - 1):
        if not (sigmas[i] <= sigmas[i - 1] and sigmas[i] <= sigmas[i + 1]):
            continue
        # 골짜기 바닥이 여러 점이면 첫 점만
        if sigmas[i] == sigmas[i - 1] and i > 1 and sigmas[i - 1] <= sigmas[i - 2]:
            continue
        lam_star, sigma_star = _refine(geom, alpha, params, lambdas[i - 1], lambdas[i], lambdas[i + 1])
        if sigma_star > detection:
            logger.debug("Local minimum at lambda=%.8f rejected (sigma=%.3e)", lam_star, sigma_star)
            continue

        system = _bound_system(geom, alpha, lam_star, params)
        _, s, vh = svd(system.matrix, check_finite=False)
        v = vh[-1]
        q = v / system.sqrt_weights
        residual = float(np.linalg.norm(system.matrix @ v))
        rank = int(np.count_nonzero(s <= RANK_FACTOR * detection))
        result = BoundStateResult(lam_star, float(s[-1]), q, system.size,
                                  _valley_interval(lambdas, sigmas, i, detection), max(rank, 1), residual)
        if result.rank_deficiency > 1:
            logger.warning("Eigenvalue at lambda=%.10f has multiplicity %d", lam_star, result.rank_deficiency)
        logger.info("Bound state lambda*=%.10f sigma=%.2e residual=%.2e N=%d",
                    lam_star, result.sigma_min, residual, system.size)
        results.append(result)
    return results


def bound_states_frame(results: Sequence[BoundStateResult]) -> pd.DataFrame:
    columns = ["lambda_star", "sigma_min", "N", "rank_deficiency", "residual", "interval_lo", "interval_hi"]
    return pd.DataFrame([r.as_row() for r in results], columns=columns)


if __name__ == "__main__":
    from geometry import load_fixture

    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    states = find_bound_states(load_fixture("bump"), 5.0, (-7.5, -6.2501), resolution=0.005)
    print(bound_states_frame(states).to_string(index=False))
