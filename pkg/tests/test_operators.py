"""Galerkin operator assembly, mass matrices, potentials, matrix I/O.

The anchor test rebuilds the operator matrices with a scalar per-pair
loop (same quadrature decisions, independent accumulation code) and
demands agreement to round-off.  Physical oracles: the Newtonian limits
of V and K on the unit sphere, interior constancy of the single-layer
shell potential, the Gauss identity for the double layer, and the jump
relations probed just off the surface.
"""

import numpy as np
import pytest

from wavebem.mesh import icosphere, split_ball, subdomain_surface
from wavebem.operators import (
    QuadratureOrders,
    assemble_mixed_mass,
    assemble_operators,
    assemble_p0_mass,
    assemble_p1_mass,
    double_layer_potential,
    load_matrix,
    save_matrix,
    single_layer_potential,
)
from wavebem.quadrature import (
    PanelPairKind,
    classify_pair,
    grad_factor,
    laplace_kernel,
    pair_points,
    shape_values,
    triangle_rule,
    wavenumber,
)

S_TEST = 0.8 + 1.9j
A_TEST, P_TEST = 1.3, 0.7


def reference_operators(surf, s, a, p, orders):
    """Scalar per-pair reassembly mirroring the production rule choices."""
    kappa = wavenumber(s, a, p)
    tris = surf.triangles
    tri_pts = surf.vertices[tris]
    cent, diam = surf.centroids(), surf.diameters()
    areas, normals = surf.areas, surf.normals
    curls = np.empty_like(tri_pts)
    for k in range(3):
        curls[:, k, :] = tri_pts[:, (k + 1) % 3] - tri_pts[:, (k + 2) % 3]
    curls /= 2.0 * areas[:, None, None]

    V = np.zeros((surf.n_p0, surf.n_p0), complex)
    K = np.zeros((surf.n_p0, surf.n_p1), complex)
    W = np.zeros((surf.n_p1, surf.n_p1), complex)
    for i in range(surf.n_p0):
        for j in range(surf.n_p0):
            kind, px, py = classify_pair(tris[i], tris[j])
            if kind is PanelPairKind.DISJOINT:
                near = np.linalg.norm(
                    cent[i] - cent[j]
                ) < orders.near_factor * max(diam[i], diam[j])
                n = orders.near if near else orders.base
            else:
                n = orders.singular
            pts = pair_points(tri_pts[i], tri_pts[j], kind, px, py, n=n)
            r = np.linalg.norm(pts.x - pts.y, axis=1)
            G = laplace_kernel(kappa, r)
            g00 = pts.w @ G
            V[i, j] = g00
            if kind is not PanelPairKind.IDENTICAL:
                dot = np.einsum("d,qd->q", normals[j], pts.y - pts.x)
                K[i, tris[j]] += np.einsum(
                    "q,qb->b", pts.w * grad_factor(kappa, r, kernel=G) * dot,
                    pts.lam_y,
                )
            IG = np.einsum("q,qa,qb->ab", pts.w * G, pts.lam_x, pts.lam_y)
            W[np.ix_(tris[i], tris[j])] += (
                curls[i] @ curls[j].T
            ) * g00 + (kappa * kappa) * (normals[i] @ normals[j]) * IG
    return V / a**2, K, a**2 * W


@pytest.mark.parametrize(
    "make_surf",
    [
        lambda: subdomain_surface(icosphere(1), 1),
        lambda: subdomain_surface(split_ball(1), 2),
    ],
    ids=["icosphere", "split_ball_flipped"],
)
def test_assembly_matches_per_pair_reference(make_surf):
    surf = make_surf()
    orders = QuadratureOrders()
    ops = assemble_operators(surf, S_TEST, A_TEST, P_TEST, orders)
    V, K, W = reference_operators(surf, S_TEST, A_TEST, P_TEST, orders)
    np.testing.assert_allclose(ops.V, V, atol=1e-13 * np.abs(V).max())
    np.testing.assert_allclose(ops.K, K, atol=1e-13 * np.abs(K).max())
    np.testing.assert_allclose(ops.W, W, atol=1e-13 * np.abs(W).max())


def test_real_frequency_assembly_matches_reference():
    surf = subdomain_surface(icosphere(1), 1)
    orders = QuadratureOrders()
    ops = assemble_operators(surf, 2.5, A_TEST, P_TEST, orders)
    V, K, W = reference_operators(surf, 2.5, A_TEST, P_TEST, orders)
    np.testing.assert_allclose(ops.V, V, atol=1e-13 * np.abs(V).max())
    np.testing.assert_allclose(ops.K, K, atol=1e-13 * np.abs(K).max())
    np.testing.assert_allclose(ops.W, W, atol=1e-13 * np.abs(W).max())


@pytest.fixture(scope="module")
def sphere2():
    return subdomain_surface(icosphere(2), 1)


@pytest.fixture(scope="module")
def ops_newtonian(sphere2):
    return assemble_operators(sphere2, 1e-6, 1.0, 1.0)


def test_single_layer_newtonian_limit(sphere2, ops_newtonian):
    ones = np.ones(sphere2.n_p0)
    total = (ones @ ops_newtonian.V @ ones).real
    assert abs(total - 4 * np.pi) / (4 * np.pi) < 0.03


def test_double_layer_gauss_identity(sphere2, ops_newtonian):
    mean = (
        (ops_newtonian.K @ np.ones(sphere2.n_p1)) / sphere2.areas
    ).real.mean()
    assert abs(mean + 0.5) < 1e-5


def test_hypersingular_annihilates_constants(sphere2, ops_newtonian):
    assert np.abs(ops_newtonian.W @ np.ones(sphere2.n_p1)).max() < 1e-12


def test_v_and_w_complex_symmetric(sphere2):
    ops = assemble_operators(sphere2, S_TEST, A_TEST, P_TEST)
    assert np.abs(ops.V - ops.V.T).max() < 1e-12 * np.abs(ops.V).max()
    assert np.abs(ops.W - ops.W.T).max() < 1e-12 * np.abs(ops.W).max()
    np.testing.assert_array_equal(ops.Kt, ops.K.T)


def test_conjugate_frequency_conjugates_operators(sphere2):
    ops = assemble_operators(sphere2, S_TEST, A_TEST, P_TEST)
    cops = assemble_operators(sphere2, np.conj(S_TEST), A_TEST, P_TEST)
    np.testing.assert_allclose(cops.V, np.conj(ops.V), rtol=1e-13)
    np.testing.assert_allclose(
        cops.K, np.conj(ops.K), atol=1e-13 * np.abs(ops.K).max()
    )
    np.testing.assert_allclose(cops.W, np.conj(ops.W), rtol=1e-13)


def test_operators_depend_on_s_only_through_wavenumber(sphere2):
    ops = assemble_operators(sphere2, S_TEST, A_TEST, P_TEST)
    other = assemble_operators(sphere2, 2 * S_TEST, A_TEST, P_TEST / 2)
    np.testing.assert_allclose(other.V, ops.V, rtol=1e-12)
    np.testing.assert_allclose(
        other.K, ops.K, atol=1e-12 * np.abs(ops.K).max()
    )
    np.testing.assert_allclose(other.W, ops.W, rtol=1e-12)


def test_material_scaling_at_fixed_wavenumber(sphere2):
    ops = assemble_operators(sphere2, S_TEST, A_TEST, P_TEST)
    scaled = assemble_operators(sphere2, S_TEST, 2 * A_TEST, 2 * P_TEST)
    assert abs(scaled.kappa - ops.kappa) < 1e-14 * abs(ops.kappa)
    np.testing.assert_allclose(scaled.V, ops.V / 4.0, rtol=1e-12)
    np.testing.assert_allclose(
        scaled.K, ops.K, atol=1e-12 * np.abs(ops.K).max()
    )
    np.testing.assert_allclose(scaled.W, 4.0 * ops.W, rtol=1e-12)


def test_rejects_frequency_in_left_half_plane(sphere2):
    with pytest.raises(ValueError, match="Re"):
        assemble_operators(sphere2, -1.0 + 2.0j, 1.0, 1.0)


def test_quadrature_orders_validation():
    with pytest.raises(ValueError, match="positive"):
        QuadratureOrders(base=0).validate()
    with pytest.raises(ValueError, match="near_factor"):
        QuadratureOrders(near_factor=-1.0).validate()


# ----------------------------------------------------------------------
# mass matrices
# ----------------------------------------------------------------------

def test_p0_mass_is_area_diagonal(sphere2):
    M = assemble_p0_mass(sphere2)
    np.testing.assert_allclose(M.diagonal(), sphere2.areas, rtol=1e-15)
    assert M.nnz == sphere2.n_p0


def test_p1_mass_total_area_and_positivity(sphere2):
    M = assemble_p1_mass(sphere2)
    ones = np.ones(sphere2.n_p1)
    total = ones @ (M @ ones)
    np.testing.assert_allclose(total, sphere2.areas.sum(), rtol=1e-13)
    assert np.abs((M - M.T).toarray()).max() < 1e-15
    eigs = np.linalg.eigvalsh(M.toarray())
    assert eigs.min() > 0


def test_mixed_mass_row_sums_are_areas(sphere2):
    M = assemble_mixed_mass(sphere2)
    np.testing.assert_allclose(
        np.asarray(M.sum(axis=1)).ravel(), sphere2.areas, rtol=1e-13
    )


def test_mixed_mass_interface_restriction_approaches_disk_area():
    totals = []
    for level in (1, 2):
        surf = subdomain_surface(split_ball(level), 1)
        M = assemble_mixed_mass(surf, parts="J")
        totals.append(np.ones(surf.n_p0) @ (M @ np.ones(surf.n_p1)))
    errs = [abs(t - np.pi) / np.pi for t in totals]
    assert errs[1] < errs[0]
    assert errs[1] < 0.05


def test_mass_restriction_empty_part_is_zero():
    surf = subdomain_surface(split_ball(1), 1)  # has no N triangles
    M = assemble_mixed_mass(surf, parts="N")
    assert M.nnz == 0


def test_mass_restriction_rejects_unknown_part(sphere2):
    with pytest.raises(ValueError, match="part tag"):
        assemble_mixed_mass(sphere2, parts="Q")


def test_p1_mass_part_restriction_splits_total():
    surf = subdomain_surface(split_ball(1), 1)
    full = assemble_p1_mass(surf).toarray()
    parts = sum(
        assemble_p1_mass(surf, parts=t).toarray() for t in ("D", "I", "J")
    )
    np.testing.assert_allclose(parts, full, atol=1e-15)


# ----------------------------------------------------------------------
# layer potentials
# ----------------------------------------------------------------------

def test_single_layer_shell_constancy(sphere2):
    # uniform density on the unit sphere: interior potential = 1/a^2
    a = 1.3
    pts = np.array([[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [0.0, 0.5, 0.0]])
    vals = single_layer_potential(
        sphere2, 1e-8, a, 0.7, np.ones(sphere2.n_p0), pts
    ).real
    assert np.ptp(vals) / vals.mean() < 1e-4
    assert abs(vals.mean() - 1 / a**2) * a**2 < 0.01


def test_double_layer_gauss_values(sphere2):
    ones = np.ones(sphere2.n_p1)
    inside = double_layer_potential(
        sphere2, 1e-8, 1.0, 1.0, ones, np.array([[0.2, 0.1, -0.3]])
    )
    outside = double_layer_potential(
        sphere2, 1e-8, 1.0, 1.0, ones, np.array([[2.0, 0.0, 0.0], [0, -3, 1]])
    )
    np.testing.assert_allclose(inside.real, -1.0, atol=1e-5)
    np.testing.assert_allclose(outside.real, 0.0, atol=1e-8)


def test_potential_far_field_matches_direct_quadrature(sphere2):
    rng = np.random.default_rng(11)
    phi = rng.standard_normal(sphere2.n_p0) + 1j * rng.standard_normal(
        sphere2.n_p0
    )
    z = np.array([3.0, 1.0, -2.0])
    got = single_layer_potential(sphere2, S_TEST, A_TEST, P_TEST, phi, z)
    ref_pts, ref_w = triangle_rule(12)
    lam = shape_values(ref_pts)
    Y = np.einsum("qa,nad->nqd", lam, sphere2.vertices[sphere2.triangles])
    wq = 2.0 * sphere2.areas[:, None] * ref_w[None, :]
    r = np.linalg.norm(z[None, None, :] - Y, axis=2)
    kap = wavenumber(S_TEST, A_TEST, P_TEST)
    ref = np.einsum(
        "nq,n->", wq * laplace_kernel(kap, r), phi
    ) / A_TEST**2
    assert abs(got - ref) / abs(ref) < 1e-9


@pytest.mark.parametrize("kind", ["single", "double"])
def test_potential_gradient_matches_finite_differences(kind):
    surf = subdomain_surface(icosphere(1), 1)
    rng = np.random.default_rng(3)
    if kind == "single":
        dens = rng.standard_normal(surf.n_p0) + 1j * rng.standard_normal(
            surf.n_p0
        )
        fn = single_layer_potential
    else:
        dens = rng.standard_normal(surf.n_p1) + 1j * rng.standard_normal(
            surf.n_p1
        )
        fn = double_layer_potential
    z = np.array([[1.8, 0.4, -0.9], [0.1, -0.2, 0.3]])
    g = fn(surf, S_TEST, A_TEST, P_TEST, dens, z, gradient=True)
    h = 1e-5
    fd = np.empty_like(g)
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd[:, d] = (
            fn(surf, S_TEST, A_TEST, P_TEST, dens, z + e)
            - fn(surf, S_TEST, A_TEST, P_TEST, dens, z - e)
        ) / (2 * h)
    assert np.abs(g - fd).max() / np.abs(g).max() < 1e-7


def test_potential_linearity(sphere2):
    rng = np.random.default_rng(9)
    phi = rng.standard_normal(sphere2.n_p0)
    z = np.array([[1.5, 0.0, 0.4]])
    v2 = single_layer_potential(sphere2, S_TEST, A_TEST, P_TEST, 2 * phi, z)
    v1 = single_layer_potential(sphere2, S_TEST, A_TEST, P_TEST, phi, z)
    np.testing.assert_allclose(v2, 2 * v1, rtol=1e-14)


def test_jump_relations_off_surface_probes(sphere2):
    """Probes at c +/- (h/10) n: traces jump by the density, conormal
    sign convention: exterior minus interior of the single layer's
    conormal trace is -phi; Dirichlet jump of the double layer is +psi.
    """
    surf = sphere2
    a, p, s = A_TEST, P_TEST, S_TEST
    c0 = surf.centroids()
    phi = np.cos(c0[:, 0]) + 0.5 * np.sin(2 * c0[:, 1])
    psi = np.cos(surf.vertices[:, 2]) + 0.3 * surf.vertices[:, 0]
    eps = surf.diameters().mean() / 10.0
    sel = np.random.default_rng(5).choice(surf.n_p0, size=12, replace=False)
    zc, nrm = c0[sel], surf.normals[sel]
    zp, zm = zc + eps * nrm, zc - eps * nrm

    gp = single_layer_potential(surf, s, a, p, phi, zp, gradient=True)
    gm = single_layer_potential(surf, s, a, p, phi, zm, gradient=True)
    jump_n = a**2 * np.einsum("md,md->m", nrm, gp - gm)
    assert np.abs(jump_n + phi[sel]).max() / np.abs(phi[sel]).max() < 0.15

    psi_c = psi[surf.triangles[sel]].mean(axis=1)
    up = double_layer_potential(surf, s, a, p, psi, zp)
    um = double_layer_potential(surf, s, a, p, psi, zm)
    assert np.abs(up - um - psi_c).max() / np.abs(psi_c).max() < 0.15

    # complementary traces are continuous
    vp = single_layer_potential(surf, s, a, p, phi, zp)
    vm = single_layer_potential(surf, s, a, p, phi, zm)
    assert np.abs(vp - vm).max() / np.abs(vm).max() < 0.15
    dgp = double_layer_potential(surf, s, a, p, psi, zp, gradient=True)
    dgm = double_layer_potential(surf, s, a, p, psi, zm, gradient=True)
    cont = np.einsum("md,md->m", nrm, dgp - dgm)
    scale = np.abs(np.einsum("md,md->m", nrm, dgm)).max()
    assert np.abs(cont).max() / scale < 0.15


# ----------------------------------------------------------------------
# matrix snapshots
# ----------------------------------------------------------------------

def test_matrix_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    m = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
    path = tmp_path / "v.bin"
    save_matrix(path, m, S_TEST, tag="V")
    back, s, tag = load_matrix(path)
    np.testing.assert_array_equal(back, m)
    assert s == S_TEST and tag == "V"


def test_matrix_snapshot_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(ValueError, match="snapshot"):
        load_matrix(path)


def test_matrix_snapshot_rejects_truncation(tmp_path):
    path = tmp_path / "t.bin"
    save_matrix(path, np.eye(4, dtype=complex), 1.0, tag="W")
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_matrix(path)


def test_matrix_snapshot_rejects_non_2d(tmp_path):
    with pytest.raises(ValueError, match="2-D"):
        save_matrix(tmp_path / "x.bin", np.zeros(3, dtype=complex), 1.0)
