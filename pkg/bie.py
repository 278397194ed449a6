import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize_scalar

from geometry import PanelMesh
from greens import (
    INV_2PI,
    EnergySpec,
    KernelPoint,
    ThresholdError,
    build_kernel_table,
    kernel_matrix,
    kernel_ranges,
    self_term_limit,
    sigma_green_resolvent,
)
from specfun import log_product_rule

logger = logging.getLogger(__name__)

# --- 설정값 ---
COND_CAP = 1e12                 # 이보다 나쁜 조건수는 풀지 않는다
SOLVE_TOL = 1e-10               # 상대 잔차 목표
NEAR_FIELD_FACTOR = 0.5         # 반 패널 길이 이내면 특이 적분 처리
DIRECTIONS = ("left", "right")
CONVENTIONS = ("second", "first")


class MeshTooCoarseError(ArithmeticError):
    """패널별 특이 적분이 유한한 행렬을 만들지 못할 때."""


class IllConditionedError(ArithmeticError):
    """Θ 행렬이 거의 특이함 (속박 상태/공명 근처일 수 있음)."""

    def __init__(self, condition: float, message: Optional[str] = None):
        self.condition = float(condition)
        super().__init__(message or f"Theta matrix is ill-conditioned (1-norm condition estimate {condition:.3e})")


@dataclass(eq=False)
class ThetaSystem:
    """가중치 대칭화된 Nyström 행렬 M = D Θ D⁻¹, D = diag(√w), 과 우변 D·ω."""

    matrix: np.ndarray
    rhs: np.ndarray
    mesh: PanelMesh
    energy: EnergySpec
    sqrt_weights: np.ndarray
    direction: str = "left"
    condition: Optional[float] = None

    @property
    def size(self) -> int:
        return len(self.rhs)


@dataclass(eq=False)
class ChargeVector:
    coefficients: np.ndarray        # 노드에서의 밀도 q
    scaled: np.ndarray              # √w·q
    residual: float = 0.0
    condition: float = 1.0

    @property
    def size(self) -> int:
        return len(self.coefficients)

    def h_norm(self) -> float:
        return float(np.linalg.norm(self.scaled))


# --- 입사파 ---
def embed_omega(mesh: PanelMesh, energy: EnergySpec, direction: str = "left") -> np.ndarray:
    """노드에서 ω(x) = e^{ik_α x1} e^{-α|x2|/2} (오른쪽에서 들어오면 켤레)."""
    energy.require("scattering")
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got '{direction}'")
    return incoming_wave(mesh.nodes, energy, direction)


def incoming_wave(points: np.ndarray, energy: EnergySpec, direction: str = "left") -> np.ndarray:
    k = energy.k_alpha.real
    phase = k * points[:, 0] if direction == "left" else -k * points[:, 0]
    return np.exp(1j * phase) * np.exp(-0.5 * energy.alpha * np.abs(points[:, 1]))


# --- 근접장 (특이/준특이) 보정 ---
def _closest_on_panel(comp, a: float, b: float, x: np.ndarray) -> Tuple[float, float]:
    s = np.linspace(a, b, 65)
    dist = np.linalg.norm(comp.point_at(s) - x, axis=1)
    i = int(np.argmin(dist))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    res = minimize_scalar(lambda t: float(np.linalg.norm(comp.point_at(t)[0] - x)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12 * max(b - a, 1.0)})
    if res.fun < dist[i]:
        return float(res.x), float(res.fun)
    return float(s[i]), float(dist[i])


def _near_pairs(mesh: PanelMesh, r: np.ndarray):
    """(target, panel index, s0, offset) 목록. offset = 0 이면 같은 성분의 호 거리 기준."""
    pairs = []
    for p, panel in enumerate(mesh.panels):
        comp = mesh.components[panel.component]
        reach = NEAR_FIELD_FACTOR * panel.length
        same = np.flatnonzero(mesh.component_index == panel.component)
        for i in same:
            candidates = [mesh.s[i]]
            if comp.closed:
                candidates += [mesh.s[i] - comp.length, mesh.s[i] + comp.length]
            gaps = [max(panel.a - s0, 0.0, s0 - panel.b) for s0 in candidates]
            best = int(np.argmin(gaps))
            if gaps[best] < reach:
                pairs.append((int(i), p, float(candidates[best]), 0.0))
        others = np.flatnonzero(mesh.component_index != panel.component)
        if len(others):
            close = others[np.min(r[others, panel.start:panel.stop], axis=1) < reach]
            for i in close:
                s_star, offset = _closest_on_panel(comp, panel.a, panel.b, mesh.nodes[i])
                pairs.append((int(i), p, s_star, max(offset, 1e-14)))
    return pairs


def _apply_near_field(A: np.ndarray, G: np.ndarray, mesh: PanelMesh, self_limit: np.ndarray, r: np.ndarray) -> int:
    # 자유 핵의 -(1/2π) ln r 만 로그 곱 규칙으로, 나머지 매끄러운 부분은 보통 가중치로
    pairs = _near_pairs(mesh, r)
    for i, p, s0, offset in pairs:
        panel = mesh.panels[p]
        cols = slice(panel.start, panel.stop)
        rule = log_product_rule((panel.a, panel.b), s0, mesh.nodes_per_panel, offset=offset, allow_exterior=True)
        s_nodes = mesh.s[cols]
        with np.errstate(divide="ignore"):
            if offset == 0.0:
                phi = np.log(np.abs(s_nodes - s0))
            else:
                phi = 0.5 * np.log((s_nodes - s0) ** 2 + offset * offset)
        bracket = G[i, cols] + INV_2PI * phi
        if panel.start <= i < panel.stop and offset == 0.0:
            bracket[i - panel.start] = self_limit[i]
        A[i, cols] = -INV_2PI * rule.weights + mesh.weights[cols] * bracket
    return len(pairs)


# --- 조립 / 풀이 ---
def assemble_theta(mesh: PanelMesh, energy: EnergySpec, table=None, direction: str = "left",
                   kernel_mode: str = "full") -> ThetaSystem:
    """Θ = -α⁻¹Ǐ - R_νν 의 Nyström 이산화.

    kernel_mode="diagonal" 은 핵을 0으로 둔 시험용 모드.
    bound 영역에서는 우변이 0 이고 행렬은 실대칭이다.
    """
    n = mesh.size
    scattering = energy.regime == "scattering"
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got '{direction}'")
    dtype = complex if scattering else float
    sqrt_w = np.sqrt(mesh.weights)
    rhs = sqrt_w * embed_omega(mesh, energy, direction) if scattering else np.zeros(n)
    if n == 0:
        return ThetaSystem(np.zeros((0, 0), dtype=dtype), rhs.astype(dtype), mesh, energy, sqrt_w, direction)

    if kernel_mode == "diagonal":
        A = np.zeros((n, n), dtype=dtype)
    elif kernel_mode == "full":
        if table is None:
            d_max, a_max = kernel_ranges(mesh.nodes, mesh.nodes)
            table = build_kernel_table(energy, d_max, a_max)
        G = kernel_matrix(energy, mesh.nodes, mesh.nodes, table)
        r = np.hypot(mesh.nodes[:, 0, None] - mesh.nodes[None, :, 0], mesh.nodes[:, 1, None] - mesh.nodes[None, :, 1])
        A = G * mesh.weights[None, :]
        self_limit = self_term_limit(energy, 2.0 * np.abs(mesh.nodes[:, 1]), table)
        n_near = _apply_near_field(A, G, mesh, self_limit, r)
        logger.debug("Near-field corrections applied to %d target/panel pairs", n_near)
        if not np.all(np.isfinite(A)):
            raise MeshTooCoarseError("mesh too coarse for panel-wise singular quadrature (non-finite entries)")
    else:
        raise ValueError(f"unknown kernel_mode '{kernel_mode}'")

    theta = -A
    theta[np.diag_indices(n)] -= mesh.signs / energy.alpha
    matrix = sqrt_w[:, None] * theta / sqrt_w[None, :]
    matrix = 0.5 * (matrix + matrix.T)
    return ThetaSystem(matrix.astype(dtype), rhs.astype(dtype), mesh, energy, sqrt_w, direction)


def with_direction(system: ThetaSystem, direction: str) -> ThetaSystem:
    """같은 행렬에 다른 입사 방향의 우변을 붙인다."""
    rhs = system.sqrt_weights * embed_omega(system.mesh, system.energy, direction)
    return ThetaSystem(system.matrix, rhs, system.mesh, system.energy, system.sqrt_weights, direction, system.condition)


def condition_estimate(system: ThetaSystem) -> float:
    if system.size == 0:
        return 1.0
    if system.condition is None:
        system.condition = float(np.abs(np.linalg.cond(system.matrix, 1)))
    return system.condition


def solve_charge(system: ThetaSystem, cond_cap: float = COND_CAP, tol: float = SOLVE_TOL) -> ChargeVector:
    """부분 피벗 LU 로 Θq = Jω 를 푼다. 잔차가 크면 반복 개선을 한 번 한다."""
    n = system.size
    if n == 0:
        empty = np.zeros(0, dtype=complex)
        return ChargeVector(empty, empty, 0.0, 1.0)
    cond = condition_estimate(system)
    if not math.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(cond)

    factors = lu_factor(system.matrix)
    u = lu_solve(factors, system.rhs)
    scale = max(np.linalg.norm(system.rhs), np.finfo(float).tiny)
    residual = float(np.linalg.norm(system.matrix @ u - system.rhs) / scale)
    if residual > tol:
        u = u + lu_solve(factors, system.rhs - system.matrix @ u)
        residual = float(np.linalg.norm(system.matrix @ u - system.rhs) / scale)
        logger.warning("Iterative refinement applied, residual now %.2e", residual)
    logger.debug("Charge solved: N=%d cond=%.3e residual=%.2e", n, cond, residual)
    return ChargeVector(u / system.sqrt_weights, u, residual, cond)


# --- Krein 형 분해 핵 ---
def perturbed_resolvent_kernel(mesh: PanelMesh, energy: EnergySpec, x: Sequence[float], y: Sequence[float],
                               table=None) -> float:
    """G_Γ(x, y) = G_Σ(x, y) + Σ_ij G_Σ(x, n_i) w_i (Θ⁻¹)_ij G_Σ(n_j, y), 유클리드 에너지."""
    if not energy.is_euclidean:
        raise ThresholdError("perturbed resolvent kernel needs a euclidean energy (lambda < -alpha^2/4)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    base = sigma_green_resolvent(energy, KernelPoint.between(x, y))
    if mesh.size == 0:
        return base
    if table is None:
        pts = np.vstack([mesh.nodes, x[None, :], y[None, :]])
        table = build_kernel_table(energy, *kernel_ranges(pts, pts))
    system = assemble_theta(mesh, energy, table)
    gx = kernel_matrix(energy, x[None, :], mesh.nodes, table)[0]
    gy = kernel_matrix(energy, mesh.nodes, y[None, :], table)[:, 0]
    v = lu_solve(lu_factor(system.matrix), system.sqrt_weights * gy)
    return float(base + (system.sqrt_weights * gx) @ v)


def h_inner(f: np.ndarray, g: np.ndarray, weights: np.ndarray, convention: str = "second") -> complex:
    """(f, g)_h = Σ w f ḡ ("second") 또는 Σ w f̄ g ("first")."""
    if convention == "second":
        return complex(np.sum(weights * f * np.conj(g)))
    if convention == "first":
        return complex(np.sum(weights * np.conj(f) * g))
    raise ValueError(f"convention must be one of {CONVENTIONS}, got '{convention}'")


if __name__ == "__main__":
    from geometry import build_mesh, load_fixture

    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    mesh = build_mesh(load_fixture("stub"), 16, 0.1)
    system = assemble_theta(mesh, EnergySpec(5.0, -3.125))
    charge = solve_charge(system)
    logger.info("N=%d cond=%.3e residual=%.2e |q|_h=%.6f", system.size, charge.condition, charge.residual,
                charge.h_norm())
