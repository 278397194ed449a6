import math

import numpy as np
import pytest

from geometry import (
    GeometryError,
    MeshParams,
    arc_segment,
    build_geometry,
    build_mesh,
    check_chord_arc,
    curvature,
    decompose,
    gaussian,
    graph_segment,
    load_fixture,
    mesh_from_params,
    reflect_geometry,
)


def test_flat_fixture_has_empty_mesh():
    geom = load_fixture("flat")
    assert geom.is_flat
    mesh = build_mesh(geom)
    assert mesh.size == 0
    assert decompose(geom) == []


def test_gap_mesh_size_and_weights():
    geom = load_fixture("gap")
    mesh = build_mesh(geom, nodes_per_panel=16, panel_length=0.04)
    assert mesh.size == 400
    assert np.all(mesh.signs == 1)
    np.testing.assert_allclose(mesh.component_weight_sums(), [1.0], atol=1e-13)


def test_semicircle_components_and_signs():
    geom = load_fixture("semicircle")
    components = decompose(geom)
    assert [c.sign for c in components] == [1, -1]
    mesh = build_mesh(geom, 16, 0.25)
    np.testing.assert_allclose(mesh.component_weight_sums(), [2.0, math.pi], rtol=1e-10)
    # Λ₁ 노드는 반지름 1 원 위에 있어야 한다
    arc_nodes = mesh.nodes[mesh.component_index == 1]
    np.testing.assert_allclose(np.hypot(arc_nodes[:, 0], arc_nodes[:, 1]), 1.0, atol=1e-10)


def test_stub_has_two_unit_components():
    mesh = build_mesh(load_fixture("stub"), 16, 0.25)
    np.testing.assert_allclose(mesh.component_weight_sums(), [1.0, 1.0], atol=1e-12)
    assert set(mesh.signs.tolist()) == {1, -1}


def test_self_intersection_rejected():
    desc = {"segments": [{"kind": "polyline", "vertices": [[-1, 1], [1, 3], [1, 1], [-1, 3]]}]}
    with pytest.raises(GeometryError, match="self-intersection"):
        build_geometry(desc)


def test_cusp_rejected():
    # 직선의 오른쪽 가지와 거의 같은 방향으로 떠나는 조각
    desc = {"removed_intervals": [[0.0, 1.0]],
            "segments": [{"kind": "polyline", "vertices": [[1.0, 0.0], [2.0, 0.005]]}]}
    with pytest.raises(GeometryError, match="cusp"):
        build_geometry(desc)


@pytest.mark.parametrize("interval", [[1.0, 1.0], [0.0, float("inf")], [0.0, 1e7]])
def test_bad_intervals_rejected(interval):
    with pytest.raises(GeometryError):
        build_geometry({"removed_intervals": [interval]})


def test_unknown_fixture():
    with pytest.raises(GeometryError, match="unknown geometry fixture"):
        load_fixture("does-not-exist")


def test_chord_arc_closed_circle():
    seg = arc_segment([0.0, 1.0], 1.0, -0.5 * math.pi, 1.5 * math.pi)
    assert check_chord_arc(seg, 0.5).passed
    # 닫힌 곡선을 열린 곡선으로 보면 끝점이 겹쳐 비율이 0이 된다
    assert not check_chord_arc(seg, 0.5, respect_closed=False).passed


def test_curvature_of_arc_and_bump():
    seg = load_fixture("semicircle").segments[0]
    s = np.linspace(0.2, seg.length - 0.2, 7)
    np.testing.assert_allclose(np.abs(curvature(seg, s)), 1.0, rtol=1e-4)
    bump_seg = load_fixture("bump").segments[0]
    # 위로 볼록한 꼭대기에서 곡률은 음수 (시계 방향 회전)
    top = float(np.interp(0.0, bump_seg.points[:, 0], bump_seg.s))
    assert curvature(bump_seg, top) < 0.0


def test_curvature_outside_segment():
    seg = load_fixture("semicircle").segments[0]
    with pytest.raises(GeometryError):
        curvature(seg, seg.length + 1.0)


def test_panel_below_resolution_rejected():
    with pytest.raises(GeometryError):
        build_mesh(load_fixture("bump"), 16, 1e-7)


def test_conjecture_eligibility():
    assert load_fixture("flat").conjecture_eligible
    assert load_fixture("bump").conjecture_eligible
    assert not load_fixture("gap").conjecture_eligible
    assert not load_fixture("semicircle").conjecture_eligible


def test_reflect_geometry_mirrors_mesh():
    geom = load_fixture("stub")
    params = MeshParams(8, 0.25)
    mesh = mesh_from_params(geom, params)
    mirrored = mesh_from_params(reflect_geometry(geom), params)
    assert mirrored.size == mesh.size
    np.testing.assert_allclose(np.sort(mirrored.nodes[:, 0]), np.sort(-mesh.nodes[:, 0]), atol=1e-12)
    np.testing.assert_allclose(mirrored.component_weight_sums(), mesh.component_weight_sums(), atol=1e-12)


def test_circle_is_one_closed_added_component():
    components = decompose(load_fixture("circle"))
    assert len(components) == 1
    ring = components[0]
    assert ring.sign == -1 and ring.closed
    assert ring.length == pytest.approx(2.0 * math.pi, rel=1e-10)
    mesh = build_mesh(load_fixture("circle"), 16, 0.25)
    np.testing.assert_allclose(mesh.component_weight_sums(), [2.0 * math.pi], rtol=1e-10)


def test_broken_line_matches_gap_family():
    geom = load_fixture("broken_line")
    assert [c.sign for c in decompose(geom)] == [1]
    mesh = build_mesh(geom, 16, 0.25)
    gap_mesh = build_mesh(build_geometry({"family": "gap", "L": 2.0}), 16, 0.25)
    np.testing.assert_allclose(mesh.component_weight_sums(), [2.0], atol=1e-12)
    np.testing.assert_allclose(mesh.nodes, gap_mesh.nodes, atol=1e-12)


def test_semicircle_chord_arc_ratio():
    seg = load_fixture("semicircle").segments[0]
    result = check_chord_arc(seg, 0.5)
    assert result.passed
    assert result.worst_ratio == pytest.approx(2.0 / math.pi, rel=1e-6)
    assert not check_chord_arc(seg, 0.7).passed


def test_gaussian_graph_curvature_at_top():
    h = 0.5
    seg = graph_segment(gaussian(h, 1.0), -3.0, 3.0)
    # 좌우 대칭이라 꼭대기는 호 길이의 가운데
    assert curvature(seg, 0.5 * seg.length) == pytest.approx(-2.0 * h, rel=1e-4)
