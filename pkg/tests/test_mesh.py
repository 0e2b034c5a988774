import numpy as np
import pytest
from dataclasses import replace

from conftest import cached_ops
from sbpdg.mesh import (SPLIT_PATTERNS, Connectivity, OrientationError, TopologyError,
                        _check_mirror, dump_mesh, geometric_factors, interface_weight_mismatch,
                        periodic_connectivity, remap_mesh, split_cartesian_mesh, warp_function,
                        warp_mesh)
from sbpdg.refelem import triangle_volume_rule


def _geo(mesh, variant="QuadratureI", p=2):
    ops = cached_ops(variant, p)
    return ops, geometric_factors(mesh, ops.ip.nodes, ops.ip.facet_nodes)


@pytest.mark.parametrize("pattern", SPLIT_PATTERNS)
def test_split_counts_and_area(pattern):
    mesh = split_cartesian_mesh(4, 2.0, pattern)
    assert mesh.K == 32
    ops, geo = _geo(mesh)
    assert np.allclose(geo.J, mesh.h ** 2 / 4)
    area = np.einsum("q,kq->", np.diag(ops.W), geo.J)
    assert abs(area - 4.0) < 1e-13


def test_alternating_split_uses_both_diagonals():
    mesh = split_cartesian_mesh(2)
    # hypotenuse directions of the first triangle in each cell
    d = mesh.vertices[::2, 2] - mesh.vertices[::2, 1]
    slopes = np.sign(d[:, 0] * d[:, 1])
    assert set(slopes) == {-1.0, 1.0}


def test_bad_split_arguments():
    with pytest.raises(ValueError):
        split_cartesian_mesh(0)
    with pytest.raises(ValueError):
        split_cartesian_mesh(2, pattern="cross")


def test_warp_is_identity_on_boundary():
    s = np.linspace(0, 1, 11)
    edge = np.stack([s, np.zeros_like(s)], -1)
    for pts in (edge, edge[:, ::-1], edge + [0, 1], edge[:, ::-1] + [1, 0]):
        assert np.abs(warp_function(pts, 1.0) - pts).max() < 1e-15


@pytest.mark.parametrize("p_map", [1, 2, 3, 4])
def test_warped_area_and_normals(p_map):
    mesh = warp_mesh(split_cartesian_mesh(4, 10.0), p_map)
    p = max(p_map, 2)
    ops, geo = _geo(mesh, "QuadratureI", p)
    assert np.all(geo.J > 0)
    area = np.einsum("q,kq->", np.diag(ops.W), geo.J)
    # the warp preserves the square; curved maps are integrated exactly up to degree 2p
    assert abs(area - 100.0) < (1e-12 if p_map == 1 else 1e-2)
    assert np.allclose(np.linalg.norm(geo.normals, axis=-1), 1.0)


@pytest.mark.parametrize("variant", ["QuadratureI", "QuadratureII", "Collocation"])
@pytest.mark.parametrize("p_map", [1, 3])
def test_connectivity_matches_normals_and_weights(variant, p_map):
    mesh = warp_mesh(split_cartesian_mesh(3), p_map)
    ops, geo = _geo(mesh, variant, 3)
    conn = periodic_connectivity(mesh, geo.x_facet)
    for k in range(mesh.K):
        for f in range(3):
            kn, fn = conn.neighbor[k, f], conn.neighbor_facet[k, f]
            perm = conn.perm[k, f]
            # matched facet nodes coincide after the periodic shift
            assert np.allclose(geo.x_facet[k, f], geo.x_facet[kn, fn][perm] + conn.shift[k, f])
            assert np.allclose(geo.normals[k, f], -geo.normals[kn, fn][perm])
            assert np.allclose(geo.J_facet[k, f], geo.J_facet[kn, fn][perm])
            # shared edges are traversed in opposite directions
            assert np.array_equal(perm, np.arange(len(perm))[::-1])
    assert interface_weight_mismatch(conn, geo, ops.Wf) < 1e-12


def test_unmatched_facet_raises():
    mesh = split_cartesian_mesh(2)
    _, geo = _geo(mesh)
    xf = geo.x_facet.copy()
    xf[0, 0] += 0.01
    with pytest.raises(TopologyError, match="element 0"):
        periodic_connectivity(mesh, xf)


def test_broken_mirror_raises():
    mesh = split_cartesian_mesh(2)
    _, geo = _geo(mesh)
    conn = periodic_connectivity(mesh, geo.x_facet)
    nb = conn.neighbor.copy()
    nb[0, 0] = (nb[0, 0] + 1) % mesh.K
    with pytest.raises(TopologyError, match="mirrored"):
        _check_mirror(Connectivity(nb, conn.neighbor_facet, conn.perm, conn.shift))


def test_inverted_element_raises():
    mesh = split_cartesian_mesh(2)
    flipped = mesh.vertices.copy()
    flipped[3] = flipped[3][[0, 2, 1]]
    bad = replace(mesh, vertices=flipped, map_nodes=flipped.copy())
    with pytest.raises(OrientationError, match="element 3"):
        _geo(bad)


def test_remap_keeps_geometry():
    mesh = split_cartesian_mesh(2)
    rule = triangle_volume_rule(3)
    assert np.allclose(remap_mesh(mesh, 3).map_points(rule.nodes), mesh.map_points(rule.nodes))


def test_metric_identities_on_curved_mesh():
    # discrete metric identities: the sum over m of D_m applied to the metric vanishes
    # when the metric is a polynomial of degree p_map - 1 <= p
    mesh = warp_mesh(split_cartesian_mesh(2, 10.0), 2)
    ops, geo = _geo(mesh, "QuadratureI", 2)
    for n in range(2):
        div = sum(ops.V @ ops.D[m] @ (geo.metric[..., m, n] @ ops.P.T).T for m in range(2))
        assert np.abs(div).max() < 1e-11


def test_dump_mesh(tmp_path):
    mesh = split_cartesian_mesh(2)
    _, geo = _geo(mesh)
    conn = periodic_connectivity(mesh, geo.x_facet)
    dump_mesh(mesh, conn, tmp_path)
    rows = (tmp_path / "elements.csv").read_text().splitlines()
    assert len(rows) == mesh.K + 1
    rows = (tmp_path / "interfaces.csv").read_text().splitlines()
    assert len(rows) == 3 * mesh.K + 1
