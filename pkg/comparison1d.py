import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from geometry import DeformedLineGeometry, MeshParams, curvature
from greens import EnergySpec
from scattering import scattering_matrix

logger = logging.getLogger(__name__)

# --- 설정값 ---
ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
PROFILE_SAMPLES = 2001          # 곡률 표본 수
FD_CELLS = 800                  # 지지 구간을 나누는 유한차분 칸 수
PAD_DECAY_LENGTHS = 20.0        # 바탕 상태 감쇠 길이 단위의 여유 영역
BOUNDARY_TOL = 1e-10            # 영역 확장에 대한 μ₁ 변화 허용치 (상대)
MAX_PAD_DOUBLINGS = 6
MAX_FD_POINTS = 2_000_000
CONJECTURE_COLUMNS = ["alpha", "lambda", "re_T2d", "im_T2d", "re_R2d", "im_R2d",
                      "re_TK", "im_TK", "re_RK", "im_RK", "disc_raw", "disc_phasemin"]


class IneligibleGeometryError(ValueError):
    """추측 비교는 하나의 C⁴ 그래프 변형(또는 평평한 선)에서만 의미가 있다."""


class IntegratorError(ArithmeticError):
    pass


class DomainTooSmallError(ArithmeticError):
    pass


# --- 1차원 퍼텐셜 ---
class CurvatureProfile:
    """K = -d²/ds² - κ(s)²/4 의 퍼텐셜. s 는 변형 중심(x1 = 0)에서 잰 호 길이."""

    def __init__(self, s: np.ndarray, kappa: np.ndarray, smoothness: int = 4):
        self.s = np.asarray(s, dtype=float)
        self.kappa = np.asarray(kappa, dtype=float)
        self.smoothness = smoothness
        if len(self.s) < 2 or np.any(np.diff(self.s) <= 0.0):
            raise ValueError("curvature samples need an increasing grid of at least two points")
        self._spline = CubicSpline(self.s, self.kappa)

    @classmethod
    def zero(cls) -> "CurvatureProfile":
        return cls(np.array([-1.0, 1.0]), np.zeros(2))

    @classmethod
    def from_geometry(cls, geom: DeformedLineGeometry, samples: int = PROFILE_SAMPLES) -> "CurvatureProfile":
        if geom.is_flat:
            return cls.zero()
        if not geom.conjecture_eligible:
            raise IneligibleGeometryError(f"geometry '{geom.name}' is not a single C4 graph deformation")
        seg = geom.segments[0]
        s = np.linspace(0.0, seg.length, samples)
        kappa = curvature(seg, s)
        kappa[0] = kappa[-1] = 0.0
        # x1 = 0 에 해당하는 호 길이를 원점으로
        x1 = seg.points[:, 0]
        order = np.argsort(x1)
        center = float(np.interp(0.0, x1[order], seg.s[order]))
        return cls(s - center, kappa, seg.smoothness)

    @property
    def support(self) -> Tuple[float, float]:
        return float(self.s[0]), float(self.s[-1])

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    @property
    def is_zero(self) -> bool:
        return not np.any(self.kappa)

    def potential(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= self.s[0]) & (s <= self.s[-1])
        return np.where(inside, -0.25 * self._spline(np.clip(s, self.s[0], self.s[-1])) ** 2, 0.0)


@dataclass(frozen=True)
class RectangularWell:
    """-V₀ on [0, L], 닫힌 형 해가 있는 시험용 퍼텐셜."""

    depth: float
    length: float

    @property
    def support(self) -> Tuple[float, float]:
        return 0.0, float(self.length)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return 0.0, float(self.length)

    @property
    def is_zero(self) -> bool:
        return self.depth == 0.0 or self.length == 0.0

    def potential(self, s):
        s = np.asarray(s, dtype=float)
        return np.where((s >= 0.0) & (s <= self.length), -self.depth, 0.0)


@dataclass(frozen=True)
class OneDScattering:
    k: float
    T: complex
    R: complex
    T_right: complex
    R_right: complex

    @property
    def unitarity_defect(self) -> float:
        return abs(abs(self.T) ** 2 + abs(self.R) ** 2 - 1.0)

    def s_matrix(self) -> np.ndarray:
        return np.array([[self.T, self.R_right], [self.R, self.T_right]], dtype=complex)


# --- 산란 ---
def _fundamental_matrix(profile, k: float) -> np.ndarray:
    """지지 구간을 가로지르는 실수 전달 행렬 Φ, [ψ, ψ'](s1) = Φ [ψ, ψ'](s0)."""
    s0, s1 = profile.support
    cuts = sorted({s0, s1, *[b for b in profile.breakpoints if s0 < b < s1]})
    k2 = k * k

    def rhs(s, y):
        v = float(profile.potential(s)) - k2
        return [y[1], v * y[0], y[3], v * y[2]]

    phi = np.eye(2)
    # 퍼텐셜이 매끄러운 조각마다 따로 적분
    for a, b in zip(cuts[:-1], cuts[1:]):
        sol = solve_ivp(rhs, (a, b), [1.0, 0.0, 0.0, 1.0],
                        method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL)
        if sol.status != 0:
            raise IntegratorError(f"ODE integration failed on [{a:g}, {b:g}]: {sol.message}")
        y = sol.y[:, -1]
        phi = np.array([[y[0], y[2]], [y[1], y[3]]]) @ phi
    return phi


def _plane_waves(k: float, s: float) -> np.ndarray:
    e_plus, e_minus = np.exp(1j * k * s), np.exp(-1j * k * s)
    return np.array([[e_plus, e_minus], [1j * k * e_plus, -1j * k * e_minus]])


def scattering_1d(profile, k: float) -> OneDScattering:
    """-ψ'' + Vψ = k²ψ 를 적분해 e^{±iks} 에 맞춘다."""
    if not k > 0.0:
        raise ValueError(f"k must be positive, got {k}")
    if profile.is_zero:
        return OneDScattering(float(k), 1.0 + 0.0j, 0.0j, 1.0 + 0.0j, 0.0j)
    s0, s1 = profile.support
    M = np.linalg.solve(_plane_waves(k, s1), _fundamental_matrix(profile, k) @ _plane_waves(k, s0))
    R = -M[1, 0] / M[1, 1]
    T_right = 1.0 / M[1, 1]
    R_right = M[0, 1] / M[1, 1]
    # det M = 1 이므로 T_left = T_right 는 상호성 점검이 된다
    T_left = M[0, 0] + M[0, 1] * R
    result = OneDScattering(float(k), complex(T_left), complex(R), complex(T_right), complex(R_right))
    logger.debug("1D scattering k=%g |T|^2=%.12f |R|^2=%.12f defect=%.2e", k, abs(T_left) ** 2, abs(R) ** 2,
                 result.unitarity_defect)
    return result


def s_matrix_1d(profile, k: float) -> np.ndarray:
    return scattering_1d(profile, k).s_matrix()


# --- 바탕 상태 ---
def _node_potential(profile, s: np.ndarray) -> np.ndarray:
    v = profile.potential(s)
    for b in profile.breakpoints:
        hit = np.abs(s - b) <= 1e-12 * max(1.0, abs(b))
        if hit.any():
            eps = 1e-9 * max(1.0, abs(b))
            v[hit] = 0.5 * (profile.potential(b - eps) + profile.potential(b + eps))
    return v


def _fd_grid(profile, cells: int, pad_cells: int) -> Tuple[np.ndarray, float]:
    s0, s1 = profile.support
    h = (s1 - s0) / cells
    idx = np.arange(-pad_cells + 1, cells + pad_cells)
    return s0 + idx * h, h


def lowest_eigenvalue_fd(profile, cells: int, pad_cells: int) -> float:
    """Dirichlet 조건의 3점 유한차분 최저 고유값 (Richardson 이전 값)."""
    s, h = _fd_grid(profile, cells, pad_cells)
    if len(s) > MAX_FD_POINTS:
        raise DomainTooSmallError(f"finite-difference grid too large ({len(s)} points)")
    diag = 2.0 / (h * h) + _node_potential(profile, s)
    off = np.full(len(s) - 1, -1.0 / (h * h))
    w = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def _pad_estimate(profile) -> float:
    s0, s1 = profile.support
    s = np.linspace(s0, s1, 4001)
    v = np.abs(profile.potential(s))
    # 약결합 근사 μ ≈ -(∫|V|/2)², 깊이 이상은 될 수 없다
    mu_est = min((0.5 * trapezoid(v, s)) ** 2, float(v.max()))
    return max(s1 - s0, PAD_DECAY_LENGTHS / math.sqrt(mu_est))


def ground_state_1d(profile, cells: int = FD_CELLS) -> Optional[float]:
    """K 의 최저 고유값 μ₁ < 0, 음의 고유값이 없으면 None."""
    if profile.is_zero:
        return None
    s0, s1 = profile.support
    h = (s1 - s0) / cells
    pad_cells = int(math.ceil(_pad_estimate(profile) / h))

    for _ in range(MAX_PAD_DOUBLINGS):
        mu_h = lowest_eigenvalue_fd(profile, cells, pad_cells)
        mu_wide = lowest_eigenvalue_fd(profile, cells, int(1.5 * pad_cells))
        if abs(mu_wide - mu_h) <= BOUNDARY_TOL * max(1.0, abs(mu_h)):
            break
        logger.debug("Boundary sensitivity %.2e, enlarging domain", abs(mu_wide - mu_h))
        pad_cells *= 2
    else:
        raise DomainTooSmallError("ground state still sensitive to the domain boundary after enlarging")

    mu_half = lowest_eigenvalue_fd(profile, 2 * cells, 2 * pad_cells)
    mu = (4.0 * mu_half - mu_h) / 3.0
    logger.info("1D ground state mu1=%.12g (h=%.3g, raw %.12g / %.12g)", mu, h, mu_h, mu_half)
    if mu >= 0.0:
        return None
    return float(mu)


# --- 추측 비교 ---
def frobenius_discrepancy(S2: np.ndarray, S1: np.ndarray) -> Tuple[float, float]:
    """(‖S2 - S1‖_F, min_φ ‖S2 - e^{iφ} S1‖_F)."""
    raw = float(np.linalg.norm(S2 - S1, "fro"))
    overlap = abs(np.sum(S2 * np.conj(S1)))
    squared = np.linalg.norm(S2, "fro") ** 2 + np.linalg.norm(S1, "fro") ** 2 - 2.0 * overlap
    return raw, float(math.sqrt(max(squared, 0.0)))


def default_conjecture_params(alpha: float, base: MeshParams = MeshParams()) -> MeshParams:
    # 가이드 모드 폭 ~ 1/α 를 따라 패널 길이를 줄인다
    return MeshParams(base.nodes_per_panel, min(base.panel_length, 4.0 / alpha))


@dataclass(eq=False)
class ConjectureReport:
    k: float
    rows: pd.DataFrame
    one_d: OneDScattering

    @property
    def discrepancies(self) -> np.ndarray:
        return self.rows["disc_phasemin"].to_numpy()

    def is_decreasing(self, column: str = "disc_phasemin") -> bool:
        values = self.rows[column].to_numpy()
        return bool(np.all(np.diff(values) < 0.0))


def _conjecture_row(args) -> dict:
    geom, k, alpha, params, S1, one_d = args
    lam = k * k - 0.25 * alpha * alpha
    S2, (left, _) = scattering_matrix(geom, EnergySpec(alpha, lam), params)
    raw, phasemin = frobenius_discrepancy(S2, S1)
    logger.info("alpha=%g lambda=%g disc_raw=%.4e disc_phasemin=%.4e", alpha, lam, raw, phasemin)
    return {
        "alpha": alpha, "lambda": lam,
        "re_T2d": left.T.real, "im_T2d": left.T.imag, "re_R2d": left.R.real, "im_R2d": left.R.imag,
        "re_TK": one_d.T.real, "im_TK": one_d.T.imag, "re_RK": one_d.R.real, "im_RK": one_d.R.imag,
        "disc_raw": raw, "disc_phasemin": phasemin,
    }


def conjecture_test(geom: DeformedLineGeometry, k: float, alphas: Sequence[float],
                    params_for_alpha: Optional[Callable[[float], MeshParams]] = None, jobs: int = 1) -> ConjectureReport:
    """α 마다 λ = k² - α²/4 에서 2차원 S 행렬과 비교 연산자 K 의 S 행렬의 거리."""
    if not geom.conjecture_eligible:
        raise IneligibleGeometryError(f"geometry '{geom.name}' is not eligible for the curvature comparison")
    if not k > 0.0:
        raise ValueError(f"k must be positive, got {k}")
    for alpha in alphas:
        if not k < 0.5 * alpha:
            raise ValueError(f"alpha={alpha:g} too small for the window condition k < alpha/2 (k={k:g})")
    params_for_alpha = params_for_alpha or default_conjecture_params
    one_d = scattering_1d(CurvatureProfile.from_geometry(geom), k)
    S1 = one_d.s_matrix()
    tasks = [(geom, float(k), float(alpha), params_for_alpha(float(alpha)), S1, one_d) for alpha in alphas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows: List[dict] = list(pool.map(_conjecture_row, tasks))
    else:
        rows = [_conjecture_row(t) for t in tasks]
    return ConjectureReport(float(k), pd.DataFrame(rows, columns=CONJECTURE_COLUMNS), one_d)


# --- 메인 실행 부분 ---
if __name__ == "__main__":
    from geometry import load_fixture

    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    profile = CurvatureProfile.from_geometry(load_fixture("bump"))
    logger.info("mu1(K) = %s", ground_state_1d(profile))
    report = conjecture_test(load_fixture("bump_low"), 1.0, [5.0, 10.0, 20.0])
    print(report.rows[["alpha", "disc_raw", "disc_phasemin"]].to_string(index=False))
