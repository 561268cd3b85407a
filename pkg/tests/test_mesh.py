"""Mesh construction, tagging, refinement and file-format tests."""

import numpy as np
import pytest

from wavebem import mesh as wm


def global_edge_count(m: wm.SurfaceMesh) -> int:
    edges = set()
    for tri in m.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return len(edges)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_counts(level):
    m = wm.icosphere(level)
    assert m.n_triangles == 20 * 4 ** level
    assert m.n_vertices == 10 * 4 ** level + 2
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0, atol=1e-12)


def test_icosphere_valid_and_outward():
    rep = wm.validate_mesh(wm.icosphere(2))
    assert rep.ok
    assert rep.watertight[1] and rep.oriented[1] and rep.outward[1]
    # polyhedral volume approaches the ball volume from below
    assert 0.9 * 4 * np.pi / 3 < rep.enclosed_volume[1] < 4 * np.pi / 3


@pytest.mark.parametrize("level", [0, 1, 2])
def test_refine_counts(level):
    m = wm.icosphere(level)
    e = global_edge_count(m)
    r = wm.refine(m)
    assert r.n_triangles == 4 * m.n_triangles
    assert r.n_vertices == m.n_vertices + e
    assert np.allclose(np.linalg.norm(r.vertices, axis=1), 1.0, atol=1e-12)


def test_refine_split_ball_counts_and_projection():
    m = wm.split_ball(1)
    e = global_edge_count(m)
    r = wm.refine(m)
    assert r.n_triangles == 4 * m.n_triangles
    assert r.n_vertices == m.n_vertices + e
    # refined mesh must match the directly built one structurally
    direct = wm.split_ball(2)
    assert r.n_triangles == direct.n_triangles
    assert r.n_vertices == direct.n_vertices
    # disk stays flat, sphere vertices stay on the sphere
    on_sphere = np.abs(np.linalg.norm(r.vertices, axis=1) - 1.0) < 1e-12
    disk_verts = np.unique(r.triangles[r.part == "J"])
    assert np.all(np.abs(r.vertices[disk_verts, 2]) < 1e-12)
    sphere_verts = np.unique(r.triangles[r.part != "J"])
    assert np.all(on_sphere[sphere_verts])
    assert wm.validate_mesh(r).ok


@pytest.mark.parametrize("level", [0, 1, 2])
def test_split_ball_topology(level):
    m = wm.split_ball(level)
    rep = wm.validate_mesh(m)
    assert rep.ok
    assert rep.subdomains == (1, 2)
    # interface triangles are exactly the shared ones
    assert np.array_equal(m.part == "J", m.subdomain == wm.SUBDOMAIN_BOTH)
    assert np.sum(m.part == "J") == 4 * 4 ** level
    assert m.n_triangles == 12 * 4 ** level


def test_split_ball_part_areas_converge():
    # caps at theta_d = pi/3, theta_n = 2 pi/3 on the unit sphere
    cap = 2 * np.pi * (1 - np.cos(np.pi / 3))
    band = 2 * np.pi * (np.cos(np.pi / 3) - np.cos(2 * np.pi / 3))
    exact = {"D": cap, "I": band, "N": cap, "J": np.pi}
    errs = []
    for level in (3, 4):
        areas = wm.split_ball(level).areas_by_part()
        errs.append({k: abs(areas[k] - exact[k]) / exact[k] for k in exact})
    for k in exact:
        assert errs[1][k] < errs[0][k]  # refinement improves every part
        assert errs[1][k] < 0.02
    m = wm.split_ball(3)
    areas = m.areas_by_part()
    _, tri_areas = m.triangle_normals_areas()
    assert sum(areas.values()) == pytest.approx(float(tri_areas.sum()), rel=1e-12)


def test_split_ball_volumes():
    rep = wm.validate_mesh(wm.split_ball(4))
    for j in (1, 2):
        assert rep.enclosed_volume[j] == pytest.approx(2 * np.pi / 3, rel=0.01)


def test_orientation_signs():
    m = wm.split_ball(1)
    j_tris = np.flatnonzero(m.part == "J")
    outer = np.flatnonzero(m.subdomain == 1)
    for t in j_tris[:3]:
        assert wm.orientation_sign(m, 1, int(t)) == 1
        assert wm.orientation_sign(m, 2, int(t)) == -1
        # the two subdomain normals are opposite on the interface
        assert wm.orientation_sign(m, 1, int(t)) * wm.orientation_sign(m, 2, int(t)) == -1
    assert wm.orientation_sign(m, 1, int(outer[0])) == 1
    with pytest.raises(ValueError):
        wm.orientation_sign(m, 2, int(outer[0]))
    with pytest.raises(ValueError):
        wm.orientation_sign(m, 3, int(j_tris[0]))


def test_subdomain_surface_interface_normals_oppose():
    m = wm.split_ball(1)
    s1 = wm.subdomain_surface(m, 1)
    s2 = wm.subdomain_surface(m, 2)
    # match interface triangles through global ids
    j1 = {int(g): k for k, g in enumerate(s1.global_triangle_ids) if s1.part[k] == "J"}
    for k2, g in enumerate(s2.global_triangle_ids):
        if s2.part[k2] != "J":
            continue
        k1 = j1[int(g)]
        assert np.allclose(s1.normals[k1], -s2.normals[k2], atol=1e-12)
        assert s1.orientation[k1] == 1 and s2.orientation[k2] == -1
    # interface normal of subdomain 1 points down (into subdomain 2)
    jmask = s1.part == "J"
    assert np.all(s1.normals[jmask, 2] < 0)


def test_subdomain_surface_closed():
    m = wm.split_ball(2)
    for j in (1, 2):
        s = wm.subdomain_surface(m, j)
        wt, ok = wm._surface_topology_ok(s)
        assert wt and ok


def test_generate_builtin_dispatch():
    m = wm.generate_builtin("icosphere", 1)
    assert m.n_triangles == 80
    m = wm.generate_builtin("split_ball", 0, theta_d=0.9, theta_n=2.2)
    assert m.n_triangles == 12
    with pytest.raises(ValueError):
        wm.generate_builtin("torus", 1)
    with pytest.raises(ValueError):
        wm.generate_builtin("icosphere", 1, radius=2.0)
    with pytest.raises(ValueError):
        wm.split_ball(1, theta_d=2.0, theta_n=1.0)


@pytest.mark.parametrize("fmt", ["off", "msh"])
def test_roundtrip(tmp_path, fmt):
    m = wm.split_ball(1)
    path = str(tmp_path / f"ball.{fmt}")
    wm.save_mesh(m, path)
    back = wm.load_mesh(path)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.subdomain, m.subdomain)
    assert np.array_equal(back.part, m.part)
    # %.17g output reproduces doubles exactly
    assert np.array_equal(back.vertices, m.vertices)


def test_off_diagnostics(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n2 1 0\n0 0 0\n1 0 0\n3 0 1 1\n")
    with pytest.raises(ValueError):
        wm.load_off(str(bad))  # missing third vertex reference/tag line
    bad.write_text("NOFF\n1 0 0\n")
    with pytest.raises(ValueError, match="header"):
        wm.load_off(str(bad))
    bad.write_text("OFF\n1 1 0\n0 0 0\n4 0 0 0 0\n1 D\n")
    with pytest.raises(ValueError, match="triangle"):
        wm.load_off(str(bad))


def test_msh_diagnostics(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
    with pytest.raises(ValueError, match="version"):
        wm.load_msh(str(p))
    p.write_text(
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n"
        "$Elements\n1\n1 2 2 77 77 1 2 3\n$EndElements\n"
    )
    with pytest.raises(ValueError, match="physical id"):
        wm.load_msh(str(p))
    p.write_text(
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$Nodes\n2\n1 0 0 0\n2 1 0 0\n$EndNodes\n"
        "$Elements\n1\n1 1 2 11 11 1 2\n$EndElements\n"
    )
    with pytest.raises(ValueError, match="element type"):
        wm.load_msh(str(p))


def test_quality_warning():
    verts = np.array(
        [[0, 0, 0], [1, 0, 0], [0.5, 1e-3, 0], [0.5, -1e-3, 0]], dtype=float
    )
    tris = np.array([[0, 1, 2], [0, 3, 1]])
    m = wm.SurfaceMesh(verts, tris, np.ones(2, dtype=int), np.array(["D", "D"]))
    rep = wm.validate_mesh(m)
    assert rep.min_quality < wm.QUALITY_FLOOR
    assert rep.warnings


def test_merge_subdomains():
    m = wm.split_ball(1)
    merged, vmap, tmap = wm.merge_subdomains(m)
    assert merged.n_triangles == int(np.sum(m.part != "J"))
    assert np.all(merged.subdomain == 1)
    rep = wm.validate_mesh(merged)
    assert rep.ok
    # maps carry coordinates and tags back to the original skeleton
    assert np.array_equal(merged.vertices, m.vertices[vmap])
    assert np.array_equal(merged.part, m.part[tmap])


def test_material_params():
    wm.MaterialParams().validate()
    with pytest.raises(ValueError):
        wm.MaterialParams(a1=-1.0).validate()
    assert wm.MaterialParams(a1=2.0, p1=3.0).for_subdomain(1) == (2.0, 3.0)
    with pytest.raises(ValueError):
        wm.MaterialParams().for_subdomain(0)
