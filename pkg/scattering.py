import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bie import (
    ChargeVector,
    assemble_theta,
    embed_omega,
    h_inner,
    incoming_wave,
    solve_charge,
    with_direction,
)
from geometry import DeformedLineGeometry, MeshParams, PanelMesh, mesh_from_params
from greens import EnergySpec, build_kernel_table, guided_mode_coefficient, kernel_matrix, kernel_ranges

logger = logging.getLogger(__name__)

# --- 설정값 ---
PROBE_FACTOR = 30.0             # 원거리 탐침 거리 (단위 1/α)
PROBE_FRACTION = 0.2            # 격자 가장자리에서 쓰는 비율
SINGULAR_DISTANCE_FACTOR = 0.1  # 노드와 이보다 가까운 격자점은 건너뜀 (패널 길이 단위)
FIELD_CHUNK = 2000
SWEEP_COLUMNS = ["lambda", "k_alpha", "re_T", "im_T", "re_R", "im_R", "absT2", "absR2", "defect", "N"]
FIELD_COLUMNS = ["x1", "x2", "re_psi", "im_psi"]


@dataclass(frozen=True)
class ScatteringAmplitudes:
    lam: float
    alpha: float
    k_alpha: float
    T: complex
    R: complex
    unitarity_defect: float
    N: int
    direction: str = "left"
    convention: str = "second"

    def as_row(self) -> dict:
        return {
            "lambda": self.lam,
            "k_alpha": self.k_alpha,
            "re_T": self.T.real,
            "im_T": self.T.imag,
            "re_R": self.R.real,
            "im_R": self.R.imag,
            "absT2": abs(self.T) ** 2,
            "absR2": abs(self.R) ** 2,
            "defect": self.unitarity_defect,
            "N": self.N,
        }


@dataclass(eq=False)
class ScatteringSolution:
    amplitudes: ScatteringAmplitudes
    mesh: PanelMesh
    charge: ChargeVector
    energy: EnergySpec
    direction: str
    table: object = None


@dataclass(frozen=True)
class GridSpec:
    x1_min: float
    x1_max: float
    n_x1: int
    x2_values: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not self.x1_max > self.x1_min or self.n_x1 < 2:
            raise ValueError("grid needs x1_min < x1_max and at least two x1 samples")

    def points(self) -> np.ndarray:
        x1 = np.linspace(self.x1_min, self.x1_max, self.n_x1)
        return np.array([(a, b) for b in self.x2_values for a in x1], dtype=float)


@dataclass(eq=False)
class FieldMap:
    points: np.ndarray
    values: np.ndarray
    direction: str
    energy: EnergySpec
    skipped: np.ndarray = field(default=None)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "x1": self.points[:, 0],
            "x2": self.points[:, 1],
            "re_psi": np.real(self.values),
            "im_psi": np.imag(self.values),
        })[FIELD_COLUMNS]


def unitarity_defect(amps) -> float:
    return abs(abs(amps.T) ** 2 + abs(amps.R) ** 2 - 1.0)


# --- 진폭 ---
def _amplitudes_from_charge(mesh: PanelMesh, energy: EnergySpec, charge: ChargeVector,
                            direction: str, convention: str) -> ScatteringAmplitudes:
    k = energy.k_alpha.real
    if mesh.size == 0:
        return ScatteringAmplitudes(energy.lam, energy.alpha, k, 1.0 + 0.0j, 0.0j, 0.0, 0, direction, convention)
    incoming = embed_omega(mesh, energy, direction)
    c = guided_mode_coefficient(energy)
    T = 1.0 + c * h_inner(charge.coefficients, incoming, mesh.weights, convention)
    R = c * h_inner(charge.coefficients, np.conj(incoming), mesh.weights, convention)
    defect = abs(abs(T) ** 2 + abs(R) ** 2 - 1.0)
    return ScatteringAmplitudes(energy.lam, energy.alpha, k, complex(T), complex(R), defect, mesh.size,
                                direction, convention)


def _table_for(energy: EnergySpec, mesh: PanelMesh, extra: Optional[np.ndarray] = None):
    pts = mesh.nodes if extra is None else np.vstack([mesh.nodes, extra])
    d_max, a_max = kernel_ranges(pts, mesh.nodes)
    return build_kernel_table(energy, d_max, a_max)


def solve_scattering(geom: DeformedLineGeometry, energy: EnergySpec, params: Optional[MeshParams] = None,
                     direction: str = "left", convention: str = "second", table=None) -> ScatteringSolution:
    energy.require("scattering")
    mesh = mesh_from_params(geom, params or MeshParams())
    if mesh.size == 0:
        empty = np.zeros(0, dtype=complex)
        amps = _amplitudes_from_charge(mesh, energy, ChargeVector(empty, empty), direction, convention)
        return ScatteringSolution(amps, mesh, ChargeVector(empty, empty), energy, direction)
    table = table or _table_for(energy, mesh)
    system = assemble_theta(mesh, energy, table, direction)
    charge = solve_charge(system)
    amps = _amplitudes_from_charge(mesh, energy, charge, direction, convention)
    logger.info("lambda=%g N=%d |T|^2=%.6f |R|^2=%.6f defect=%.2e", energy.lam, mesh.size,
                abs(amps.T) ** 2, abs(amps.R) ** 2, amps.unitarity_defect)
    return ScatteringSolution(amps, mesh, charge, energy, direction, table)


def amplitudes(geom: DeformedLineGeometry, energy: EnergySpec, params: Optional[MeshParams] = None,
               direction: str = "left", convention: str = "second") -> ScatteringAmplitudes:
    """T = 1 + c (q, Jω)_h, R = c (q, Jω̄)_h, c = iα/(4k_α)."""
    return solve_scattering(geom, energy, params, direction, convention).amplitudes


def scattering_matrix(geom: DeformedLineGeometry, energy: EnergySpec, params: Optional[MeshParams] = None,
                      convention: str = "second") -> Tuple[np.ndarray, Tuple[ScatteringAmplitudes, ScatteringAmplitudes]]:
    """[[T_left, R_right], [R_left, T_right]] 과 두 방향의 진폭."""
    energy.require("scattering")
    mesh = mesh_from_params(geom, params or MeshParams())
    empty = np.zeros(0, dtype=complex)
    if mesh.size == 0:
        left = _amplitudes_from_charge(mesh, energy, ChargeVector(empty, empty), "left", convention)
        right = _amplitudes_from_charge(mesh, energy, ChargeVector(empty, empty), "right", convention)
    else:
        system = assemble_theta(mesh, energy, _table_for(energy, mesh), "left")
        left = _amplitudes_from_charge(mesh, energy, solve_charge(system), "left", convention)
        right = _amplitudes_from_charge(mesh, energy, solve_charge(with_direction(system, "right")), "right", convention)
    S = np.array([[left.T, right.R], [left.R, right.T]], dtype=complex)
    return S, (left, right)


# --- 장 (field) ---
def field_map(geom: DeformedLineGeometry, energy: EnergySpec, charge: ChargeVector, grid, direction: str = "left",
              mesh: Optional[PanelMesh] = None, params: Optional[MeshParams] = None, table=None) -> FieldMap:
    """ψ(x) = ω(x) + Σ_j w_j G_Σ(x - n_j) q_j. Λ 에 너무 가까운 점은 NaN 으로 표시하고 건너뛴다."""
    energy.require("scattering")
    if mesh is None:
        mesh = mesh_from_params(geom, params or MeshParams())
    if mesh.size != charge.size:
        raise ValueError(f"charge vector ({charge.size}) does not match the mesh ({mesh.size} nodes)")
    pts = grid.points() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    values = incoming_wave(pts, energy, direction).astype(complex)
    skipped = np.zeros(len(pts), dtype=bool)
    if mesh.size == 0:
        return FieldMap(pts, values, direction, energy, skipped)

    limit = SINGULAR_DISTANCE_FACTOR * mesh.panel_length
    for start in range(0, len(pts), FIELD_CHUNK):
        block = pts[start:start + FIELD_CHUNK]
        dist = np.min(np.hypot(block[:, 0, None] - mesh.nodes[None, :, 0], block[:, 1, None] - mesh.nodes[None, :, 1]), axis=1)
        skipped[start:start + FIELD_CHUNK] = dist < limit
    if skipped.any():
        logger.warning("%d grid point(s) within singular distance %.3g of a node were skipped", int(skipped.sum()), limit)

    active = np.flatnonzero(~skipped)
    d_max, a_max = kernel_ranges(pts[active], mesh.nodes) if len(active) else (0.0, 0.0)
    if table is None or not table.covers(d_max, a_max):
        table = build_kernel_table(energy, d_max, a_max)
    density = mesh.weights * charge.coefficients
    for start in range(0, len(active), FIELD_CHUNK):
        idx = active[start:start + FIELD_CHUNK]
        values[idx] += kernel_matrix(energy, pts[idx], mesh.nodes, table) @ density
    values[skipped] = np.nan
    return FieldMap(pts, values, direction, energy, skipped)


def solution_field_map(solution: ScatteringSolution, geom: DeformedLineGeometry, grid) -> FieldMap:
    return field_map(geom, solution.energy, solution.charge, grid, solution.direction, mesh=solution.mesh,
                     table=solution.table)


def _probe_regions(field: FieldMap, geom: DeformedLineGeometry, fraction: float, probe_factor: float):
    on_line = (field.points[:, 1] == 0.0) & ~field.skipped
    if not on_line.any():
        raise ValueError("grid has no probe line x2 = 0")
    x1 = field.points[:, 0]
    lo, hi = x1.min(), x1.max()
    reach = probe_factor / field.energy.alpha
    if lo > geom.box[0] - reach or hi < geom.box[1] + reach:
        raise ValueError(
            f"grid too small: need x1 beyond [{geom.box[0] - reach:.4g}, {geom.box[1] + reach:.4g}], "
            f"got [{lo:.4g}, {hi:.4g}]"
        )
    span = hi - lo
    left = on_line & (x1 <= lo + fraction * span)
    right = on_line & (x1 >= hi - fraction * span)
    return left, right


def _asymptotic_form(field: FieldMap, amps, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    k = field.energy.k_alpha.real
    x1 = field.points[:, 0]
    transverse = np.exp(-0.5 * field.energy.alpha * np.abs(field.points[:, 1]))
    forward, backward = np.exp(1j * k * x1), np.exp(-1j * k * x1)
    expected = np.full(len(x1), np.nan, dtype=complex)
    if field.direction == "left":
        expected[right] = amps.T * forward[right]
        expected[left] = forward[left] + amps.R * backward[left]
    else:
        expected[left] = amps.T * backward[left]
        expected[right] = backward[right] + amps.R * forward[right]
    return expected * transverse


def asymptote_residual(field: FieldMap, amps, geom: DeformedLineGeometry, fraction: float = PROBE_FRACTION,
                       probe_factor: float = PROBE_FACTOR) -> float:
    """x2 = 0 탐침선의 가장 바깥 부분에서 ψ 와 양쪽 점근형의 최대 상대 편차."""
    left, right = _probe_regions(field, geom, fraction, probe_factor)
    expected = _asymptotic_form(field, amps, left, right)
    mask = left | right
    transverse = np.exp(-0.5 * field.energy.alpha * np.abs(field.points[mask, 1]))
    return float(np.max(np.abs(field.values[mask] - expected[mask]) / transverse))


def amplitudes_from_field(field: FieldMap, geom: DeformedLineGeometry, fraction: float = PROBE_FRACTION,
                          probe_factor: float = PROBE_FACTOR) -> Tuple[complex, complex]:
    """장의 점근 거동에서 (T, R) 을 직접 맞춘다 (진폭 공식과 독립인 두 번째 경로)."""
    left, right = _probe_regions(field, geom, fraction, probe_factor)
    k = field.energy.k_alpha.real
    x1 = field.points[:, 0]
    psi = field.values
    if field.direction == "left":
        T = np.mean(psi[right] * np.exp(-1j * k * x1[right]))
        R = np.mean((psi[left] - np.exp(1j * k * x1[left])) * np.exp(1j * k * x1[left]))
    else:
        T = np.mean(psi[left] * np.exp(1j * k * x1[left]))
        R = np.mean((psi[right] - np.exp(-1j * k * x1[right])) * np.exp(-1j * k * x1[right]))
    return complex(T), complex(R)


def probe_grid(geom: DeformedLineGeometry, alpha: float, n_x1: int = 401, probe_factor: float = PROBE_FACTOR,
               margin: float = 1.25, x2_values: Sequence[float] = (0.0,)) -> GridSpec:
    reach = margin * probe_factor / alpha
    return GridSpec(geom.box[0] - reach, geom.box[1] + reach, n_x1, tuple(x2_values))


# --- 에너지 스윕 ---
def _sweep_point(args) -> dict:
    geom, alpha, lam, params, direction, convention = args
    amps = amplitudes(geom, EnergySpec(alpha, lam), params, direction, convention)
    return amps.as_row()


def energy_sweep(geom: DeformedLineGeometry, alpha: float, lambdas: Sequence[float],
                 params: Optional[MeshParams] = None, jobs: int = 1, direction: str = "left",
                 convention: str = "second") -> pd.DataFrame:
    """λ 마다 독립적인 Θ 를 푼다. jobs 와 무관하게 입력 순서대로 행을 돌려준다."""
    params = params or MeshParams()
    tasks = [(geom, alpha, float(lam), params, direction, convention) for lam in lambdas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows: List[dict] = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


# --- 메인 실행 부분 (이 파일을 직접 실행할 경우) ---
if __name__ == "__main__":
    from geometry import load_fixture

    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    S, (left, right) = scattering_matrix(load_fixture("gap"), EnergySpec(5.0, -3.125), MeshParams(16, 0.04))
    logger.info("S =\n%s", np.array2string(S, precision=6))
    logger.info("unitarity defect left=%.2e right=%.2e", left.unitarity_defect, right.unitarity_defect)
