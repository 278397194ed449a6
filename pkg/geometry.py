import json
import logging
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from specfun import gauss_legendre

logger = logging.getLogger(__name__)

# --- 설정값 ---
JUNCTION_TOL = 1e-9             # 이 거리 이내의 끝점은 같은 접합점
ARC_TOL = 1e-6                  # 호/현 불일치 허용 (상대)
MAX_EXTENT = 1e6                # 좌표 절댓값 상한 (유계 변형 조건)
DEFAULT_CHORD_ARC_C = 0.05      # 기본 현-호 상수
INTERSECTION_SAMPLES = 400      # 자기 교차 검사용 현 개수
CHORD_ARC_SAMPLES = 600
MAX_PARAMETRIC_SAMPLES = 200000
BUMP_SUPPORT_FACTOR = 3.0       # 범프 지지 구간 X = 3w
BUMP_TAPER_POWER = 5            # (1-(x/X)²)^5 → C⁴ 접합
FIXTURES_FILE = "geometry_fixtures.json"

SEGMENT_KINDS = ("polyline", "circular-arc", "parametric-sampled")


class GeometryError(ValueError):
    """기하 입력이 가정(유계성, 단순 곡선, 현-호 조건)을 위반할 때."""


# --- 기본 자료형 ---
@dataclass(frozen=True)
class Point2:
    x1: float
    x2: float

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise GeometryError(f"non-finite point ({self.x1}, {self.x2})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


@dataclass(frozen=True, eq=False)
class CurveSegment:
    """호길이로 매개화된 곡선 조각 Γ_i.

    kind 별 평가 방식:
      - polyline: 꼭짓점 사이 선형 보간 (정확)
      - circular-arc: arc = (c1, c2, radius, theta0, orientation) 로 정확한 식
      - parametric-sampled: 정제된 샘플표 (s, point) 위의 3차 스플라인
    """

    kind: str
    s: np.ndarray
    points: np.ndarray
    closed: bool = False
    arc: Optional[Tuple[float, float, float, float, float]] = None
    smoothness: int = 0
    graph: bool = False
    label: str = ""

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise GeometryError(f"unknown segment kind '{self.kind}'")
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) != len(self.s):
            raise GeometryError("segment sample table must be (s, point) pairs")
        if len(self.s) < 2 or not self.s[-1] > 0.0:
            raise GeometryError("degenerate segment (zero length)")
        if not np.all(np.isfinite(self.points)):
            raise GeometryError("unbounded deformation data (non-finite sample)")
        if np.any(np.abs(self.points) > MAX_EXTENT):
            raise GeometryError(f"unbounded deformation data (|coordinate| > {MAX_EXTENT:g})")
        if np.any(np.diff(self.s) <= 0.0):
            raise GeometryError("arc-length samples must be strictly increasing")

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def endpoints(self) -> Tuple[Point2, Point2]:
        return Point2(*self.points[0]), Point2(*self.points[-1])

    @cached_property
    def _spline(self) -> CubicSpline:
        pts = np.array(self.points, dtype=float)
        if self.closed:
            pts[-1] = pts[0]
            return CubicSpline(self.s, pts, bc_type="periodic")
        return CubicSpline(self.s, pts)

    def point_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kind == "polyline":
            return np.column_stack([np.interp(s, self.s, self.points[:, 0]), np.interp(s, self.s, self.points[:, 1])])
        if self.kind == "circular-arc":
            c1, c2, radius, theta0, orient = self.arc
            theta = theta0 + orient * s / radius
            return np.column_stack([c1 + radius * np.cos(theta), c2 + radius * np.sin(theta)])
        return self._spline(s)

    def tangent_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.kind == "polyline":
            edges = np.diff(self.points, axis=0)
            edges = edges / np.linalg.norm(edges, axis=1)[:, None]
            idx = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(edges) - 1)
            return edges[idx]
        if self.kind == "circular-arc":
            _, _, radius, theta0, orient = self.arc
            theta = theta0 + orient * s / radius
            return orient * np.column_stack([-np.sin(theta), np.cos(theta)])
        deriv = self._spline(s, 1)
        return deriv / np.linalg.norm(deriv, axis=1)[:, None]

    @property
    def breakpoints(self) -> np.ndarray:
        # 꺾인 점은 패널 경계로 쓴다
        if self.kind == "polyline":
            return np.array(self.s)
        return np.array([0.0, self.length])

    @property
    def resolution(self) -> float:
        if self.kind == "parametric-sampled":
            return float(np.min(np.diff(self.s)))
        return 0.0


@dataclass(frozen=True)
class ChordArcResult:
    passed: bool
    worst_ratio: float
    constant: float


@dataclass(frozen=True, eq=False)
class DeformedLineGeometry:
    """Γ = (Σ ∖ 제거 구간) ∪ 변형 조각들. build_geometry 를 거쳐야 검증된다."""

    segments: Tuple[CurveSegment, ...] = ()
    removed_intervals: Tuple[Tuple[float, float], ...] = ()
    box: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    name: str = ""

    @property
    def is_flat(self) -> bool:
        return not self.segments and not self.removed_intervals

    @property
    def conjecture_eligible(self) -> bool:
        # 평평하거나, 하나의 C⁴ 그래프 변형이 정확히 한 제거 구간을 대체하는 경우
        if self.is_flat:
            return True
        if len(self.segments) != 1 or len(self.removed_intervals) != 1:
            return False
        seg = self.segments[0]
        if not (seg.graph and seg.smoothness >= 4 and not seg.closed):
            return False
        a, b = self.removed_intervals[0]
        start, end = seg.points[0], seg.points[-1]
        return (
            abs(start[0] - a) <= JUNCTION_TOL
            and abs(end[0] - b) <= JUNCTION_TOL
            and abs(start[1]) <= JUNCTION_TOL
            and abs(end[1]) <= JUNCTION_TOL
        )

    def describe(self) -> Dict:
        return {
            "name": self.name,
            "removed_intervals": [list(map(float, iv)) for iv in self.removed_intervals],
            "segments": [
                {"kind": seg.kind, "label": seg.label, "length": seg.length, "closed": seg.closed}
                for seg in self.segments
            ],
            "box": list(self.box),
        }


@dataclass(frozen=True, eq=False)
class SignedComponent:
    """Λ 의 한 성분. Λ₀(제거된 Σ 구간)은 +1, Λ₁(변형 조각)은 -1."""

    support: CurveSegment
    sign: int
    interval: Optional[Tuple[float, float]] = None

    @property
    def length(self) -> float:
        return self.support.length

    @property
    def closed(self) -> bool:
        return self.support.closed

    def point_at(self, s) -> np.ndarray:
        return self.support.point_at(s)


@dataclass(frozen=True)
class MeshParams:
    nodes_per_panel: int = 16
    panel_length: float = 0.25

    def __post_init__(self):
        if self.nodes_per_panel < 2:
            raise GeometryError(f"nodes_per_panel must be >= 2, got {self.nodes_per_panel}")
        if not (self.panel_length > 0.0 and math.isfinite(self.panel_length)):
            raise GeometryError(f"panel_length must be positive, got {self.panel_length}")

    def refined(self, factor: int = 2) -> "MeshParams":
        return MeshParams(self.nodes_per_panel, self.panel_length / factor)


@dataclass(frozen=True)
class Panel:
    component: int
    a: float
    b: float
    start: int
    stop: int

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True, eq=False)
class PanelMesh:
    nodes: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    signs: np.ndarray
    component_index: np.ndarray
    panels: Tuple[Panel, ...]
    components: Tuple[SignedComponent, ...]
    nodes_per_panel: int
    panel_length: float

    @property
    def size(self) -> int:
        return len(self.weights)

    def component_weight_sums(self) -> np.ndarray:
        return np.bincount(self.component_index, weights=self.weights, minlength=len(self.components))


# --- 곡선 조각 생성 ---
def polyline_segment(vertices: Sequence[Sequence[float]], label: str = "") -> CurveSegment:
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise GeometryError("polyline needs at least two (x1, x2) vertices")
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(steps <= JUNCTION_TOL):
        raise GeometryError("polyline has a zero-length edge")
    s = np.concatenate([[0.0], np.cumsum(steps)])
    closed = bool(np.linalg.norm(pts[-1] - pts[0]) <= JUNCTION_TOL)
    return CurveSegment("polyline", s, pts, closed=closed, smoothness=0, graph=False, label=label)


def arc_segment(center: Sequence[float], radius: float, theta0: float, theta1: float, label: str = "") -> CurveSegment:
    if not radius > 0.0:
        raise GeometryError(f"arc radius must be positive, got {radius}")
    sweep = theta1 - theta0
    if sweep == 0.0:
        raise GeometryError("degenerate segment (zero length)")
    orient = 1.0 if sweep > 0 else -1.0
    length = radius * abs(sweep)
    closed = abs(abs(sweep) - 2.0 * math.pi) < 1e-12
    n = int(min(4000, max(64, math.ceil(length / (0.01 * radius)))))
    s = np.linspace(0.0, length, n + 1)
    theta = theta0 + orient * s / radius
    pts = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)])
    arc = (float(center[0]), float(center[1]), float(radius), float(theta0), orient)
    return CurveSegment("circular-arc", s, pts, closed=closed, arc=arc, smoothness=10, label=label)


def _refine_parametric(func: Callable[[np.ndarray], np.ndarray], t0: float, t1: float, n0: int = 64):
    # 현 하나와 중점을 지나는 두 현의 차이로 호/현 불일치를 추정하며 구간을 나눈다
    t = np.linspace(t0, t1, n0 + 1)
    for _ in range(60):
        pts = func(t)
        mids = 0.5 * (t[:-1] + t[1:])
        pm = func(mids)
        coarse = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
        fine = np.linalg.norm(pm - pts[:-1], axis=1) + np.linalg.norm(pts[1:] - pm, axis=1)
        bad = (fine - coarse) > 0.75 * ARC_TOL * np.maximum(fine, 1e-300)
        if not bad.any():
            arc = fine + (fine - coarse) / 3.0
            keep = np.concatenate([[True], arc > 0.0])
            s = np.concatenate([[0.0], np.cumsum(arc)])
            return s[keep], pts[keep]
        t = np.sort(np.concatenate([t, mids[bad]]))
        if len(t) > MAX_PARAMETRIC_SAMPLES:
            break
    raise GeometryError("parametric curve could not be resolved to the arc-length tolerance")


def parametric_segment(
    func: Callable[[np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    label: str = "",
    smoothness: int = 4,
    graph: bool = False,
) -> CurveSegment:
    s, pts = _refine_parametric(func, t0, t1)
    closed = bool(np.linalg.norm(pts[-1] - pts[0]) <= JUNCTION_TOL)
    return CurveSegment("parametric-sampled", s, pts, closed=closed, smoothness=smoothness, graph=graph, label=label)


def graph_segment(profile: Callable[[np.ndarray], np.ndarray], x1_min: float, x1_max: float,
                  label: str = "", smoothness: int = 4) -> CurveSegment:
    """x2 = profile(x1) 그래프 곡선."""
    if not x1_max > x1_min:
        raise GeometryError("graph range must satisfy x1_min < x1_max")

    def func(t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([t, profile(t)])

    return parametric_segment(func, x1_min, x1_max, label=label, smoothness=smoothness, graph=True)


def sampled_segment(points: Sequence[Sequence[float]], label: str = "") -> CurveSegment:
    # 점 표만 주어진 곡선: 현 길이 매개변수의 스플라인을 만든 뒤 다시 호길이로 정제
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise GeometryError("parametric-sampled points need at least four (x1, x2) rows")
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    if np.any(np.diff(chord) <= 0.0):
        raise GeometryError("parametric-sampled points contain repeated rows")
    spline = CubicSpline(chord, pts)
    return parametric_segment(spline, 0.0, float(chord[-1]), label=label, smoothness=2)


def tapered_gaussian(h: float, w: float):
    """h·exp(-x²/w²)·(1-(x/X)²)^5, |x| < X = 3w. 지지 구간 끝에서 C⁴."""
    support = BUMP_SUPPORT_FACTOR * w

    def profile(x):
        x = np.asarray(x, dtype=float)
        u = np.clip(1.0 - (x / support) ** 2, 0.0, None)
        return h * np.exp(-(x / w) ** 2) * u ** BUMP_TAPER_POWER

    return profile, support


def gaussian(h: float, w: float):
    def profile(x):
        return h * np.exp(-(np.asarray(x, dtype=float) / w) ** 2)

    return profile


# --- 검증 ---
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _chords(segment: CurveSegment, m: int = INTERSECTION_SAMPLES) -> np.ndarray:
    s = np.linspace(0.0, segment.length, m + 1)
    return segment.point_at(s)


def _crossing_pairs(p: np.ndarray, q: np.ndarray, scale: float) -> np.ndarray:
    """두 꺾은선의 현 쌍 중 진짜로 교차하는 쌍 (i, j) 마스크."""
    a, b = p[:-1], p[1:]
    c, d = q[:-1], q[1:]
    A = [x[:, None] for x in (a[:, 0], a[:, 1], b[:, 0], b[:, 1])]
    C = [x[None, :] for x in (c[:, 0], c[:, 1], d[:, 0], d[:, 1])]
    eps = 1e-12 * scale * scale
    o1 = _orient(A[0], A[1], A[2], A[3], C[0], C[1])
    o2 = _orient(A[0], A[1], A[2], A[3], C[2], C[3])
    o3 = _orient(C[0], C[1], C[2], C[3], A[0], A[1])
    o4 = _orient(C[0], C[1], C[2], C[3], A[2], A[3])
    return (o1 * o2 < -eps * eps) & (o3 * o4 < -eps * eps)


def _check_simple(segment: CurveSegment):
    pts = _chords(segment)
    m = len(pts) - 1
    mask = _crossing_pairs(pts, pts, segment.length)
    i, j = np.indices((m, m))
    mask &= j >= i + 2
    if segment.closed:
        mask &= ~((i == 0) & (j == m - 1))
    if mask.any():
        raise GeometryError(f"self-intersection detected in segment '{segment.label or segment.kind}'")


def _check_pair(first: CurveSegment, second: CurveSegment):
    p, q = _chords(first), _chords(second)
    mask = _crossing_pairs(p, q, max(first.length, second.length))
    # 공유 끝점에 붙은 현은 접합으로 본다
    for pi, p_end in ((0, p[0]), (len(p) - 2, p[-1])):
        for qi, q_end in ((0, q[0]), (len(q) - 2, q[-1])):
            if np.linalg.norm(p_end - q_end) <= JUNCTION_TOL:
                mask[pi, qi] = False
    if mask.any():
        raise GeometryError(f"self-intersection detected between segments '{first.label}' and '{second.label}'")


def _inside_removed(x1: float, intervals) -> bool:
    return any(a - JUNCTION_TOL <= x1 <= b + JUNCTION_TOL for a, b in intervals)


def _check_sigma_crossing(segment: CurveSegment, intervals):
    pts = segment.points
    x2 = pts[:, 1]
    sign_change = (np.abs(x2[:-1]) > JUNCTION_TOL) & (np.abs(x2[1:]) > JUNCTION_TOL) & (x2[:-1] * x2[1:] < 0)
    for i in np.flatnonzero(sign_change):
        frac = x2[i] / (x2[i] - x2[i + 1])
        x1 = pts[i, 0] + frac * (pts[i + 1, 0] - pts[i, 0])
        if not _inside_removed(x1, intervals):
            raise GeometryError(f"self-intersection detected: segment crosses the line at x1={x1:.6g}")


def _check_junctions(segments: Sequence[CurveSegment], intervals, chord_arc_c: float):
    # 접합점마다 바깥으로 나가는 방향을 모으고, 두 가지 사이 각이 0에 가까우면 첨점
    branches: List[Tuple[np.ndarray, np.ndarray, str]] = []
    for seg in segments:
        if seg.closed:
            continue
        t_start = seg.tangent_at(0.0)[0]
        t_end = seg.tangent_at(seg.length)[0]
        branches.append((seg.points[0], t_start, seg.label or seg.kind))
        branches.append((seg.points[-1], -t_end, seg.label or seg.kind))
    for a, b in intervals:
        if not _inside_removed(a - 2 * JUNCTION_TOL, intervals):
            branches.append((np.array([a, 0.0]), np.array([-1.0, 0.0]), "line"))
        if not _inside_removed(b + 2 * JUNCTION_TOL, intervals):
            branches.append((np.array([b, 0.0]), np.array([1.0, 0.0]), "line"))
    for i in range(len(branches)):
        for j in range(i + 1, len(branches)):
            pi, ti, li = branches[i]
            pj, tj, lj = branches[j]
            if np.linalg.norm(pi - pj) > JUNCTION_TOL:
                continue
            cos_angle = float(np.clip(np.dot(ti, tj), -1.0, 1.0))
            ratio = math.sin(0.5 * math.acos(cos_angle))
            if ratio < chord_arc_c:
                raise GeometryError(
                    f"cusp detected at junction ({pi[0]:.6g}, {pi[1]:.6g}) between '{li}' and '{lj}' "
                    f"(chord-arc ratio {ratio:.3g} < {chord_arc_c:g})"
                )


def _normalize_intervals(intervals) -> Tuple[Tuple[float, float], ...]:
    cleaned = []
    for item in intervals:
        if len(item) != 2:
            raise GeometryError(f"removed interval must be [a, b], got {item!r}")
        a, b = float(item[0]), float(item[1])
        if not (math.isfinite(a) and math.isfinite(b)):
            raise GeometryError("unbounded deformation data (non-finite interval)")
        if max(abs(a), abs(b)) > MAX_EXTENT:
            raise GeometryError(f"unbounded deformation data (interval beyond {MAX_EXTENT:g})")
        if not a < b:
            raise GeometryError(f"removed interval needs a < b, got ({a}, {b})")
        cleaned.append((a, b))
    cleaned.sort()
    for (a0, b0), (a1, b1) in zip(cleaned, cleaned[1:]):
        if a1 < b0:
            raise GeometryError(f"removed intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
    return tuple(cleaned)


def _bounding_box(segments, intervals) -> Tuple[float, float, float, float]:
    xs, ys = [], []
    for seg in segments:
        xs.extend([seg.points[:, 0].min(), seg.points[:, 0].max()])
        ys.extend([seg.points[:, 1].min(), seg.points[:, 1].max()])
    for a, b in intervals:
        xs.extend([a, b])
        ys.append(0.0)
    if not xs:
        return (0.0, 0.0, 0.0, 0.0)
    return (float(min(xs)), float(max(xs)), float(min(ys)), float(max(ys)))


def _segment_from_dict(item) -> CurveSegment:
    if isinstance(item, CurveSegment):
        return item
    if not isinstance(item, Mapping) or "kind" not in item:
        raise GeometryError(f"segment description needs a 'kind' field: {item!r}")
    kind = item["kind"]
    label = str(item.get("label", ""))
    try:
        if kind == "polyline":
            return polyline_segment(item["vertices"], label=label)
        if kind == "circular-arc":
            return arc_segment(item["center"], float(item["radius"]), float(item["theta0"]), float(item["theta1"]), label=label)
        if kind == "parametric-sampled":
            if "points" in item:
                return sampled_segment(item["points"], label=label)
            graph = item.get("graph")
            if not isinstance(graph, Mapping):
                raise GeometryError("parametric-sampled segment needs 'points' or a 'graph' description")
            h, w = float(graph["h"]), float(graph["w"])
            if graph.get("profile", "tapered-gaussian") == "gaussian":
                x1_min, x1_max = graph["x1_range"]
                return graph_segment(gaussian(h, w), float(x1_min), float(x1_max), label=label)
            profile, support = tapered_gaussian(h, w)
            return graph_segment(profile, -support, support, label=label)
    except KeyError as e:
        raise GeometryError(f"segment of kind '{kind}' is missing field {e}") from None
    raise GeometryError(f"unknown segment kind '{kind}'")


def build_geometry(description: Optional[Mapping] = None) -> DeformedLineGeometry:
    """구조화된 기하 설명에서 검증된 DeformedLineGeometry 를 만든다.

    허용 형식:
      {"fixture": "gap"}                           - geometry_fixtures.json 항목
      {"family": "bump", "h": 0.5, "w": 1.0}       - 내장 계열
      {"removed_intervals": [[a, b], ...], "segments": [{kind, ...}, ...]}
    """
    description = dict(description or {})
    if "fixture" in description:
        return load_fixture(description["fixture"])
    if "family" in description:
        family = description.pop("family")
        name = description.pop("name", "")
        if family not in FAMILIES:
            raise GeometryError(f"unknown geometry family '{family}'")
        try:
            geom = FAMILIES[family](**description)
        except TypeError as e:
            raise GeometryError(f"bad parameters for family '{family}': {e}") from None
        if name:
            geom = DeformedLineGeometry(geom.segments, geom.removed_intervals, geom.box, str(name))
        return geom

    unknown = set(description) - {"removed_intervals", "segments", "name", "chord_arc_constant"}
    if unknown:
        raise GeometryError(f"unknown geometry field(s): {sorted(unknown)}")
    intervals = _normalize_intervals(description.get("removed_intervals", []))
    segments = tuple(_segment_from_dict(item) for item in description.get("segments", []))
    chord_arc_c = float(description.get("chord_arc_constant", DEFAULT_CHORD_ARC_C))

    for seg in segments:
        _check_simple(seg)
        _check_sigma_crossing(seg, intervals)
        result = check_chord_arc(seg, chord_arc_c)
        if not result.passed:
            raise GeometryError(
                f"segment '{seg.label or seg.kind}' violates the chord-arc bound "
                f"(ratio {result.worst_ratio:.4g} < {chord_arc_c:g})"
            )
    for i in range(len(segments)):
        for j in range(i + 1, len(segments)):
            _check_pair(segments[i], segments[j])
    _check_junctions(segments, intervals, chord_arc_c)

    geom = DeformedLineGeometry(segments, intervals, _bounding_box(segments, intervals), str(description.get("name", "")))
    logger.debug("Geometry '%s' built: %d segment(s), %d removed interval(s)", geom.name, len(segments), len(intervals))
    return geom


# --- 내장 계열 ---
def gap(L: float) -> DeformedLineGeometry:
    return build_geometry({"removed_intervals": [[-0.5 * L, 0.5 * L]], "name": f"gap(L={L:g})"})


def stub(L: float, gap: float) -> DeformedLineGeometry:
    if not gap > 0.0:
        raise GeometryError("stub height must be positive")
    segment = polyline_segment([[-0.5 * L, gap], [0.5 * L, gap]], label="stub")
    return build_geometry({"removed_intervals": [[-0.5 * L, 0.5 * L]], "segments": [segment],
                           "name": f"stub(L={L:g}, gap={gap:g})"})


def bump(h: float, w: float) -> DeformedLineGeometry:
    profile, support = tapered_gaussian(h, w)
    segment = graph_segment(profile, -support, support, label="bump")
    return build_geometry({"removed_intervals": [[-support, support]], "segments": [segment],
                           "name": f"bump(h={h:g}, w={w:g})"})


def circle(r: float, contact: float = 0.0) -> DeformedLineGeometry:
    # 접점 (contact, 0) 에서 Σ 에 위쪽으로 접하는 원, 닫힌 곡선
    segment = arc_segment([contact, r], r, -0.5 * math.pi, 1.5 * math.pi, label="circle")
    return build_geometry({"segments": [segment], "name": f"circle(r={r:g}, contact={contact:g})"})


def semicircle_detour(r: float) -> DeformedLineGeometry:
    segment = arc_segment([0.0, 0.0], r, math.pi, 0.0, label="semicircle")
    return build_geometry({"removed_intervals": [[-r, r]], "segments": [segment],
                           "name": f"semicircle_detour(r={r:g})"})


FAMILIES: Dict[str, Callable[..., DeformedLineGeometry]] = {
    "gap": gap,
    "stub": stub,
    "bump": bump,
    "circle": circle,
    "semicircle_detour": semicircle_detour,
}


def load_fixture(name: str, fixtures_path: str = FIXTURES_FILE) -> DeformedLineGeometry:
    """geometry_fixtures.json 에서 이름으로 기하를 읽는다."""
    # 경로가 절대 경로가 아니면, 이 스크립트 파일 위치 기준으로 구성
    if not os.path.isabs(fixtures_path):
        script_dir = os.path.dirname(os.path.abspath(__file__))
        fixtures_path = os.path.join(script_dir, fixtures_path)
    if not os.path.exists(fixtures_path):
        raise GeometryError(f"fixture file '{fixtures_path}' not found")
    with open(fixtures_path, "r", encoding="utf-8") as f:
        fixtures = json.load(f)
    if name not in fixtures:
        raise GeometryError(f"unknown geometry fixture '{name}' (available: {sorted(fixtures)})")
    entry = dict(fixtures[name])
    entry.pop("description", None)
    if "fixture" in entry:
        raise GeometryError("fixtures may not refer to other fixtures")
    geom = build_geometry(entry)
    return geom if geom.name else DeformedLineGeometry(geom.segments, geom.removed_intervals, geom.box, name)


# --- 연산 ---
def decompose(geom: DeformedLineGeometry) -> List[SignedComponent]:
    components = [
        SignedComponent(polyline_segment([[a, 0.0], [b, 0.0]], label="removed"), +1, (a, b))
        for a, b in geom.removed_intervals
    ]
    components.extend(SignedComponent(seg, -1) for seg in geom.segments)
    return components


def check_chord_arc(segment: CurveSegment, C: float, respect_closed: bool = True,
                    samples: int = CHORD_ARC_SAMPLES) -> ChordArcResult:
    """min |Γ(s)-Γ(s')| / |s-s'| 를 샘플 쌍에서 계산해 C 와 비교."""
    if not C > 0.0:
        raise GeometryError(f"chord-arc constant must be positive, got {C}")
    length = segment.length
    if not length > 0.0:
        raise GeometryError("degenerate segment (zero length)")
    s = np.linspace(0.0, length, samples + 1)
    pts = segment.point_at(s)
    arc = np.abs(s[:, None] - s[None, :])
    if segment.closed and respect_closed:
        arc = np.minimum(arc, length - arc)
    chord = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    mask = arc > 1e-12 * length
    worst = float(np.min(chord[mask] / arc[mask]))
    return ChordArcResult(worst >= C, worst, float(C))


def curvature(segment: CurveSegment, s):
    """접선각의 중심 차분으로 구한 부호 있는 곡률 (반시계 회전이 양수)."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    length = segment.length
    tol = 1e-9 * max(length, 1.0)
    if np.any(s_arr < -tol) or np.any(s_arr > length + tol):
        raise GeometryError(f"arc length outside [0, {length:.6g}]")
    s_arr = np.clip(s_arr, 0.0, length)
    h = min(1e-4, 0.01 * length)
    lo = np.clip(s_arr - h, 0.0, length)
    hi = np.clip(s_arr + h, 0.0, length)
    t_lo = segment.tangent_at(lo)
    t_hi = segment.tangent_at(hi)
    cross = t_lo[:, 0] * t_hi[:, 1] - t_lo[:, 1] * t_hi[:, 0]
    dot = np.sum(t_lo * t_hi, axis=1)
    kappa = np.arctan2(cross, dot) / (hi - lo)
    if np.ndim(s) == 0:
        return float(kappa[0])
    return kappa


def build_mesh(geom: DeformedLineGeometry, nodes_per_panel: int = 16, panel_length: float = 0.25) -> PanelMesh:
    """성분마다 균일 패널을 나누고 패널마다 Gauss-Legendre 노드를 둔다."""
    params = MeshParams(nodes_per_panel, panel_length)
    rule = gauss_legendre(params.nodes_per_panel)
    components = tuple(decompose(geom))

    nodes, s_all, weights, signs, comp_idx = [], [], [], [], []
    panels: List[Panel] = []
    count = 0
    for c, comp in enumerate(components):
        support = comp.support
        if params.panel_length < support.resolution:
            raise GeometryError(
                f"panel length {params.panel_length:g} below geometric resolution {support.resolution:g} "
                f"of component {c}"
            )
        breaks = support.breakpoints
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            n_panels = max(1, int(math.ceil((hi - lo) / params.panel_length - 1e-9)))
            edges = np.linspace(lo, hi, n_panels + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                half = 0.5 * (b - a)
                s_nodes = 0.5 * (a + b) + half * rule.nodes
                s_all.append(s_nodes)
                weights.append(half * rule.weights)
                nodes.append(support.point_at(s_nodes))
                signs.append(np.full(rule.size, comp.sign, dtype=int))
                comp_idx.append(np.full(rule.size, c, dtype=int))
                panels.append(Panel(c, float(a), float(b), count, count + rule.size))
                count += rule.size

    if count == 0:
        empty = np.zeros(0)
        return PanelMesh(np.zeros((0, 2)), empty, empty, np.zeros(0, dtype=int), np.zeros(0, dtype=int),
                         (), components, params.nodes_per_panel, params.panel_length)
    mesh = PanelMesh(
        np.vstack(nodes), np.concatenate(s_all), np.concatenate(weights), np.concatenate(signs),
        np.concatenate(comp_idx), tuple(panels), components, params.nodes_per_panel, params.panel_length,
    )
    logger.debug("Mesh built: %d panel(s), %d node(s)", len(panels), mesh.size)
    return mesh


def mesh_from_params(geom: DeformedLineGeometry, params: MeshParams) -> PanelMesh:
    return build_mesh(geom, params.nodes_per_panel, params.panel_length)


def reflect_geometry(geom: DeformedLineGeometry) -> DeformedLineGeometry:
    """x1 → -x1 거울상."""
    flip = np.array([-1.0, 1.0])
    segments = []
    for seg in geom.segments:
        if seg.kind == "circular-arc":
            c1, c2, radius, theta0, orient = seg.arc
            arc = (-c1, c2, radius, math.pi - theta0, -orient)
            segments.append(CurveSegment(seg.kind, seg.s, seg.points * flip, seg.closed, arc,
                                         seg.smoothness, seg.graph, seg.label))
        else:
            segments.append(CurveSegment(seg.kind, seg.s, seg.points * flip, seg.closed, None,
                                         seg.smoothness, seg.graph, seg.label))
    intervals = [[-b, -a] for a, b in geom.removed_intervals]
    return build_geometry({"segments": segments, "removed_intervals": intervals, "name": f"reflected {geom.name}".strip()})


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    for fixture in ("gap", "stub", "bump", "semicircle", "circle"):
        g = load_fixture(fixture)
        m = build_mesh(g, 16, 0.25)
        logger.info("%-12s components=%d nodes=%d lengths=%s", fixture, len(m.components), m.size,
                    np.round(m.component_weight_sums(), 6).tolist())
